//! Line-based unified diffs: creation by longest common subsequence over the
//! changed middle of two texts, and strict application without fuzz.

use crate::error::{Error, Result};

const NO_NEWLINE: &str = "\\ No newline at end of file";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Equal(usize, usize),
    Delete(usize),
    Insert(usize),
}

fn lines(s: &str) -> Vec<&str> {
    s.split_inclusive('\n').collect()
}

fn edit_script(a: &[&str], b: &[&str]) -> Vec<Op> {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    let suffix = a[prefix..]
        .iter()
        .rev()
        .zip(b[prefix..].iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (am, bm) = (&a[prefix..a.len() - suffix], &b[prefix..b.len() - suffix]);
    let (n, m) = (am.len(), bm.len());
    // lcs[i][j] = LCS length of am[i..] and bm[j..]
    let mut lcs = vec![0u32; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[at(i, j)] = if am[i] == bm[j] {
                lcs[at(i + 1, j + 1)] + 1
            } else {
                lcs[at(i + 1, j)].max(lcs[at(i, j + 1)])
            };
        }
    }
    let mut ops: Vec<Op> = (0..prefix).map(|i| Op::Equal(i, i)).collect();
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && am[i] == bm[j] {
            ops.push(Op::Equal(prefix + i, prefix + j));
            i += 1;
            j += 1;
        } else if j < m && (i == n || lcs[at(i, j + 1)] > lcs[at(i + 1, j)]) {
            ops.push(Op::Insert(prefix + j));
            j += 1;
        } else {
            ops.push(Op::Delete(prefix + i));
            i += 1;
        }
    }
    for k in 0..suffix {
        ops.push(Op::Equal(a.len() - suffix + k, b.len() - suffix + k));
    }
    ops
}

fn push_line(out: &mut String, tag: char, line: &str) {
    out.push(tag);
    out.push_str(line);
    if !line.ends_with('\n') {
        out.push('\n');
        out.push_str(NO_NEWLINE);
        out.push('\n');
    }
}

/// `start,len`, or just `start` for a single line.
fn range(start: usize, len: usize) -> String {
    if len == 1 {
        start.to_string()
    } else {
        format!("{start},{len}")
    }
}

/// Unified diff from `old` to `new` with `context` lines around each change.
/// Identical inputs give an empty string.
pub fn unified_diff(old: &str, new: &str, old_name: &str, new_name: &str, context: usize) -> String {
    let (a, b) = (lines(old), lines(new));
    let ops = edit_script(&a, &b);
    let changes: Vec<usize> = (0..ops.len()).filter(|&k| !matches!(ops[k], Op::Equal(..))).collect();
    if changes.is_empty() {
        return String::new();
    }
    // group changes whose gap of equal lines fits in two contexts
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for &k in &changes {
        match groups.last_mut() {
            Some((_, end)) if k - *end <= 2 * context + 1 => *end = k,
            _ => groups.push((k, k)),
        }
    }
    let mut out = format!("--- {old_name}\n+++ {new_name}\n");
    for (first, last) in groups {
        let lo = first.saturating_sub(context);
        let hi = (last + context).min(ops.len() - 1);
        let hunk = &ops[lo..=hi];
        let (mut old_start, mut new_start) = (None, None);
        let (mut old_len, mut new_len) = (0, 0);
        for op in hunk {
            match *op {
                Op::Equal(i, j) => {
                    old_start.get_or_insert(i);
                    new_start.get_or_insert(j);
                    old_len += 1;
                    new_len += 1;
                }
                Op::Delete(i) => {
                    old_start.get_or_insert(i);
                    old_len += 1;
                }
                Op::Insert(j) => {
                    new_start.get_or_insert(j);
                    new_len += 1;
                }
            }
        }
        // a side with no lines in the hunk anchors after the preceding line
        let anchor = |start: Option<usize>, len: usize, before: usize| match (start, len) {
            (_, 0) => before,
            (Some(s), _) => s + 1,
            (None, _) => before,
        };
        let old_before = ops[..lo]
            .iter()
            .filter(|o| matches!(o, Op::Equal(..) | Op::Delete(_)))
            .count();
        let new_before = ops[..lo]
            .iter()
            .filter(|o| matches!(o, Op::Equal(..) | Op::Insert(_)))
            .count();
        out.push_str(&format!(
            "@@ -{} +{} @@\n",
            range(anchor(old_start, old_len, old_before), old_len),
            range(anchor(new_start, new_len, new_before), new_len)
        ));
        for op in hunk {
            match *op {
                Op::Equal(i, _) => push_line(&mut out, ' ', a[i]),
                Op::Delete(i) => push_line(&mut out, '-', a[i]),
                Op::Insert(j) => push_line(&mut out, '+', b[j]),
            }
        }
    }
    out
}

struct Hunk {
    old_start: usize,
    old_len: usize,
    lines: Vec<(char, String)>,
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Format(format!("bad hunk range `{s}`"));
    let (start, len) = match s.split_once(',') {
        Some((a, b)) => (a, b),
        None => (s, "1"),
    };
    Ok((start.parse().map_err(|_| bad())?, len.parse().map_err(|_| bad())?))
}

fn parse_hunks(diff: &str) -> Result<Vec<Hunk>> {
    let mut hunks: Vec<Hunk> = Vec::new();
    for line in diff.split_inclusive('\n') {
        let body = line.strip_suffix('\n').unwrap_or(line);
        if let Some(rest) = body.strip_prefix("@@ ") {
            let inner = rest
                .split(" @@")
                .next()
                .ok_or_else(|| Error::Format(format!("bad hunk header `{body}`")))?;
            let mut parts = inner.split_whitespace();
            let old = parts.next().and_then(|p| p.strip_prefix('-'));
            let new = parts.next().and_then(|p| p.strip_prefix('+'));
            let (Some(old), Some(_)) = (old, new) else {
                return Err(Error::Format(format!("bad hunk header `{body}`")));
            };
            let (old_start, old_len) = parse_range(old)?;
            hunks.push(Hunk {
                old_start,
                old_len,
                lines: Vec::new(),
            });
            continue;
        }
        let Some(h) = hunks.last_mut() else {
            continue; // file headers
        };
        if body == NO_NEWLINE {
            if let Some((_, l)) = h.lines.last_mut() {
                if l.ends_with('\n') {
                    l.pop();
                }
            }
            continue;
        }
        let mut chars = line.chars();
        match chars.next() {
            Some(tag @ (' ' | '-' | '+')) => h.lines.push((tag, chars.as_str().to_string())),
            _ => return Err(Error::Format(format!("unexpected diff line `{body}`"))),
        }
    }
    Ok(hunks)
}

/// Applies a unified diff produced by [`unified_diff`] to `original`.
/// Every context and removed line must match exactly.
pub fn apply_unified(original: &str, diff: &str) -> Result<String> {
    let a = lines(original);
    let mut out = String::with_capacity(original.len());
    let mut pos = 0;
    for h in parse_hunks(diff)? {
        let start = if h.old_len == 0 { h.old_start } else { h.old_start - 1 };
        if start < pos || start > a.len() {
            return Err(Error::Format(format!("hunk at line {} out of order", h.old_start)));
        }
        out.extend(a[pos..start].iter().copied());
        pos = start;
        for (tag, text) in &h.lines {
            match tag {
                '+' => out.push_str(text),
                _ => {
                    if a.get(pos) != Some(&text.as_str()) {
                        return Err(Error::Format(format!("diff does not match original at line {}", pos + 1)));
                    }
                    if *tag == ' ' {
                        out.push_str(text);
                    }
                    pos += 1;
                }
            }
        }
    }
    out.extend(a[pos..].iter().copied());
    Ok(out)
}
