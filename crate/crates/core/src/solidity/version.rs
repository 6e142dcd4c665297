use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SemVer {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
}

impl SemVer {
    pub const fn new(major: u64, minor: u64, patch: u64) -> Self {
        SemVer {
            major,
            minor,
            patch,
        }
    }

    pub fn parse(s: &str) -> Option<SemVer> {
        let s = s.trim().trim_start_matches('v');
        let mut parts = s.split('.');
        let major = parts.next()?.trim().parse().ok()?;
        let minor = match parts.next() {
            Some(p) => p.trim().parse().ok()?,
            None => 0,
        };
        let patch = match parts.next() {
            Some(p) => p.trim().parse().ok()?,
            None => 0,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(SemVer::new(major, minor, patch))
    }
}

impl fmt::Display for SemVer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.major, self.minor, self.patch)
    }
}

/// `[low, high)`; `high == None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionRange {
    pub low: SemVer,
    pub high: Option<SemVer>,
}

impl VersionRange {
    pub fn any() -> Self {
        VersionRange {
            low: SemVer::new(0, 0, 0),
            high: None,
        }
    }

    pub fn contains(&self, v: SemVer) -> bool {
        v >= self.low && self.high.is_none_or(|h| v < h)
    }

    fn intersect(&self, other: &VersionRange) -> Option<VersionRange> {
        let low = self.low.max(other.low);
        let high = match (self.high, other.high) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        match high {
            Some(h) if h <= low => None,
            _ => Some(VersionRange { low, high }),
        }
    }

    /// True when every version in `self` is also in `[min, max)`.
    pub fn within(&self, min: SemVer, max: Option<SemVer>) -> bool {
        if self.low < min {
            return false;
        }
        match (max, self.high) {
            (None, _) => true,
            (Some(_), None) => false,
            (Some(m), Some(h)) => h <= m,
        }
    }
}

/// A `pragma solidity` constraint. When `ranges` is empty the pragma was not
/// understood and is treated as unconstrained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionConstraint {
    pub raw_pragma: String,
    pub ranges: Vec<VersionRange>,
}

impl VersionConstraint {
    /// Parses the text following `pragma solidity` (without the `;`).
    pub fn parse(raw: &str) -> VersionConstraint {
        let ranges = parse_ranges(raw).unwrap_or_default();
        VersionConstraint {
            raw_pragma: raw.trim().to_string(),
            ranges,
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn allows(&self, v: SemVer) -> bool {
        self.is_unconstrained() || self.ranges.iter().any(|r| r.contains(v))
    }

    /// True when every version admitted by this constraint lies in `[min, max)`.
    pub fn only_admits_within(&self, min: SemVer, max: Option<SemVer>) -> bool {
        if self.is_unconstrained() {
            return true;
        }
        self.ranges.iter().all(|r| r.within(min, max))
    }
}

fn parse_ranges(raw: &str) -> Option<Vec<VersionRange>> {
    let mut out = Vec::new();
    for alt in raw.split("||") {
        let mut acc = VersionRange::any();
        let mut saw_any = false;
        for term in comparator_terms(alt) {
            let r = term_range(&term)?;
            saw_any = true;
            match acc.intersect(&r) {
                Some(x) => acc = x,
                None => {
                    saw_any = false;
                    break;
                }
            }
        }
        if saw_any {
            out.push(acc);
        }
    }
    if out.is_empty() {
        None
    } else {
        Some(out)
    }
}

/// Splits `>= 0.6.0 <0.9.0` into `[">=0.6.0", "<0.9.0"]`, tolerating spaces
/// between operator and version.
fn comparator_terms(s: &str) -> Vec<String> {
    let mut terms = Vec::new();
    let mut pending_op = String::new();
    for word in s.split_whitespace() {
        if word.chars().all(|c| "<>=^~".contains(c)) {
            pending_op.push_str(word);
            continue;
        }
        terms.push(format!("{pending_op}{word}"));
        pending_op.clear();
    }
    terms
}

fn bump_minor(v: SemVer) -> SemVer {
    SemVer::new(v.major, v.minor + 1, 0)
}

fn term_range(term: &str) -> Option<VersionRange> {
    let ops = ["^", "~", ">=", "<=", ">", "<", "="];
    let op = ops.iter().find(|o| term.starts_with(**o)).copied().unwrap_or("");
    let ver_text = &term[op.len()..];
    let parts = ver_text.trim().split('.').count();
    let v = SemVer::parse(ver_text)?;
    let next = |v: SemVer| SemVer::new(v.major, v.minor, v.patch + 1);
    Some(match op {
        "^" => {
            let high = if v.major > 0 {
                SemVer::new(v.major + 1, 0, 0)
            } else if v.minor > 0 {
                bump_minor(v)
            } else {
                next(v)
            };
            VersionRange {
                low: v,
                high: Some(high),
            }
        }
        "~" => VersionRange {
            low: v,
            high: Some(if parts >= 2 {
                bump_minor(v)
            } else {
                SemVer::new(v.major + 1, 0, 0)
            }),
        },
        ">=" => VersionRange { low: v, high: None },
        ">" => VersionRange {
            low: next(v),
            high: None,
        },
        "<" => VersionRange {
            low: SemVer::new(0, 0, 0),
            high: Some(v),
        },
        "<=" => VersionRange {
            low: SemVer::new(0, 0, 0),
            high: Some(next(v)),
        },
        _ => VersionRange {
            low: v,
            high: Some(next(v)),
        },
    })
}
