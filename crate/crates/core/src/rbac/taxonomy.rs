use super::normalize::{normalize_pair, normalize_term, SynonymMap};
use super::RolePermissionPair;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::{Arc, RwLock};

pub const SCHEMA_VERSION: u32 = 1;
pub const UNCATEGORIZED: &str = "uncategorized";

const SHIPPED: &str = include_str!("data/taxonomy.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Provenance {
    Shipped,
    RuntimeAdded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub role: String,
    pub permission: String,
    pub checks: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added_at: Option<String>,
}

impl TaxonomyEntry {
    pub fn label(&self) -> String {
        format!("{} - {}", self.role, self.permission)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub schema_version: u32,
    pub version: u64,
    #[serde(default)]
    pub synonyms: SynonymMap,
    #[serde(default, rename = "entry")]
    pub entries: Vec<TaxonomyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ProposeOutcome {
    Added { entry: TaxonomyEntry },
    DuplicateOf { entry: TaxonomyEntry },
    Rejected { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ReviewVerdict {
    Keep,
    MergeInto { role: String, permission: String },
    Drop,
}

impl Taxonomy {
    pub fn shipped() -> Taxonomy {
        Taxonomy::from_toml(SHIPPED).expect("shipped taxonomy parses")
    }

    pub fn from_toml(text: &str) -> Result<Taxonomy> {
        let mut t: Taxonomy = toml::from_str(text).map_err(|e| Error::Format(format!("taxonomy: {e}")))?;
        if t.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "taxonomy schema_version {} (expected {SCHEMA_VERSION})",
                t.schema_version
            )));
        }
        t.sort();
        Ok(t)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("taxonomy serializes")
    }

    pub fn load(path: &Path) -> Result<Taxonomy> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::InputNotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Taxonomy::from_toml(&text)
    }

    /// Writes through a temporary file in the same directory and renames it
    /// into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::fsutil::write_atomic(path, self.to_toml().as_bytes())
    }

    fn sort(&mut self) {
        self.entries
            .sort_by(|a, b| (&a.role, &a.permission).cmp(&(&b.role, &b.permission)));
    }

    pub fn normalize(&self, role: &str, permission: &str) -> (String, String) {
        normalize_pair(role, permission, &self.synonyms)
    }

    pub fn key(&self, e: &TaxonomyEntry) -> (String, String) {
        self.normalize(&e.role, &e.permission)
    }

    pub fn find(&self, role: &str, permission: &str) -> Option<&TaxonomyEntry> {
        let k = self.normalize(role, permission);
        self.entries.iter().find(|e| self.key(e) == k)
    }

    pub fn roles(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.role.as_str()) {
                out.push(&e.role);
            }
        }
        out
    }

    pub fn shipped_count(&self) -> usize {
        self.entries.iter().filter(|e| e.provenance == Provenance::Shipped).count()
    }

    /// Adds `(role, permission)` as a runtime entry unless it is empty or
    /// already present under normalization.
    pub fn propose(&mut self, role: &str, permission: &str, checks: &[String], added_at: Option<String>) -> ProposeOutcome {
        if role.trim().is_empty() || permission.trim().is_empty() {
            return ProposeOutcome::Rejected { reason: "empty".into() };
        }
        let (nr, np) = self.normalize(role, permission);
        if nr.is_empty() || np.is_empty() {
            return ProposeOutcome::Rejected { reason: "empty".into() };
        }
        if let Some(e) = self.find(role, permission) {
            return ProposeOutcome::DuplicateOf { entry: e.clone() };
        }
        // reuse the spelling of an existing role category when it matches
        let role_text = self
            .entries
            .iter()
            .find(|e| normalize_term(&e.role, &self.synonyms) == nr)
            .map(|e| e.role.clone())
            .unwrap_or_else(|| role.trim().to_string());
        let entry = TaxonomyEntry {
            role: role_text,
            permission: permission.trim().to_string(),
            checks: checks.iter().map(|c| c.trim().to_string()).filter(|c| !c.is_empty()).collect(),
            keywords: Vec::new(),
            provenance: Provenance::RuntimeAdded,
            added_at,
        };
        self.entries.push(entry.clone());
        self.sort();
        self.version += 1;
        ProposeOutcome::Added { entry }
    }

    /// Maps a mined pair to a (role category, permission category), or
    /// `uncategorized` for the parts that match nothing. Roles match exactly
    /// after normalization, then by containment; permissions match the
    /// longest keyword contained in the normalized permission.
    pub fn categorize(&self, pair: &RolePermissionPair) -> (String, String) {
        let roles: Vec<(&str, String)> = self
            .roles()
            .into_iter()
            .map(|r| (r, normalize_term(r, &self.synonyms)))
            .collect();
        let role = roles
            .iter()
            .find(|(_, n)| *n == pair.role)
            .or_else(|| {
                roles
                    .iter()
                    .filter(|(_, n)| !n.is_empty() && (pair.role.contains(n.as_str()) || n.contains(pair.role.as_str())))
                    .max_by_key(|(_, n)| n.len())
            })
            .map(|(r, _)| r.to_string());
        let Some(role) = role else {
            return (UNCATEGORIZED.into(), UNCATEGORIZED.into());
        };
        let mut best: Option<(usize, &TaxonomyEntry)> = None;
        for e in self.entries.iter().filter(|e| e.role == role) {
            let implicit = normalize_term(&e.permission, &self.synonyms);
            for k in e.keywords.iter().map(|k| k.as_str()).chain(std::iter::once(implicit.as_str())) {
                if !k.is_empty() && pair.permission.contains(k) && best.is_none_or(|(len, _)| k.len() > len) {
                    best = Some((k.len(), e));
                }
            }
        }
        match best {
            Some((_, e)) => (role, e.permission.clone()),
            None => (role, UNCATEGORIZED.into()),
        }
    }
}

pub fn propose_taxonomy_entry(t: &mut Taxonomy, role: &str, permission: &str, checks: &[String]) -> ProposeOutcome {
    let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    t.propose(role, permission, checks, Some(now))
}

/// Asks `review` about every entry and applies the verdicts to runtime
/// entries on a copy, committing only if every call succeeded. Shipped
/// entries are reviewed but never changed.
pub fn sanitize_taxonomy<F>(t: &mut Taxonomy, mut review: F) -> Result<Vec<(TaxonomyEntry, ReviewVerdict)>>
where
    F: FnMut(&TaxonomyEntry, &Taxonomy) -> Result<ReviewVerdict>,
{
    let mut verdicts = Vec::new();
    for e in &t.entries {
        let v = review(e, t).map_err(|err| Error::Taxonomy(format!("review of {} failed: {err}", e.label())))?;
        verdicts.push((e.clone(), v));
    }
    let mut next = t.clone();
    for (e, v) in &verdicts {
        if e.provenance != Provenance::RuntimeAdded {
            continue;
        }
        let key = next.key(e);
        let Some(pos) = next.entries.iter().position(|x| next.key(x) == key) else { continue };
        match v {
            ReviewVerdict::Keep => {}
            ReviewVerdict::Drop => {
                next.entries.remove(pos);
                next.version += 1;
            }
            ReviewVerdict::MergeInto { role, permission } => {
                let target_key = next.normalize(role, permission);
                if target_key == key {
                    continue;
                }
                let Some(target) = next.entries.iter().position(|x| next.key(x) == target_key) else {
                    return Err(Error::Taxonomy(format!("merge target {role} - {permission} not found")));
                };
                let moved = next.entries[pos].checks.clone();
                if next.entries[target].provenance == Provenance::RuntimeAdded {
                    for c in moved {
                        if !next.entries[target].checks.contains(&c) {
                            next.entries[target].checks.push(c);
                        }
                    }
                }
                next.entries.remove(pos);
                next.version += 1;
            }
        }
    }
    *t = next;
    Ok(verdicts)
}

/// Shared taxonomy: readers take cheap snapshots, writers serialize
/// through the lock and optionally persist each new version.
#[derive(Debug)]
pub struct TaxonomyStore {
    current: RwLock<Arc<Taxonomy>>,
    path: Option<std::path::PathBuf>,
}

impl TaxonomyStore {
    pub fn new(t: Taxonomy, path: Option<std::path::PathBuf>) -> Self {
        TaxonomyStore {
            current: RwLock::new(Arc::new(t)),
            path,
        }
    }

    pub fn snapshot(&self) -> Arc<Taxonomy> {
        self.current.read().expect("taxonomy lock").clone()
    }

    /// Runs `f` on a private copy and publishes it if the version moved.
    pub fn update<R>(&self, f: impl FnOnce(&mut Taxonomy) -> R) -> Result<R> {
        let mut guard = self.current.write().expect("taxonomy lock");
        let mut next = (**guard).clone();
        let out = f(&mut next);
        if next != **guard {
            if let Some(p) = &self.path {
                next.save(p)?;
            }
            *guard = Arc::new(next);
        }
        Ok(out)
    }
}
