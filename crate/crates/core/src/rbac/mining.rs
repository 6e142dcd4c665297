use super::normalize::{normalize_pair, SynonymMap};
use super::{Pattern, RolePermissionPair, Taxonomy};
use crate::error::{Error, Result};
use crate::solidity::{
    flatten_statements, is_elementary_type, parse_source, tokenize, ContractDef, FunctionDef, SourceUnit,
    StatementKind, Token, TokenKind,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::OnceLock;

pub const DEFAULT_TOP_K: usize = 1000;
/// Role recorded when `msg.sender` is compared against a literal.
pub const HARDCODED_ADDRESS: &str = "hardcoded-address";

const OWNABLE: &[&str] = &["Ownable", "Ownable2Step", "OwnableUpgradeable", "Ownable2StepUpgradeable"];
const ACCESS_CONTROL: &[&str] = &[
    "AccessControl",
    "AccessControlEnumerable",
    "AccessControlUpgradeable",
    "AccessControlEnumerableUpgradeable",
    "Access",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiningStats {
    pub total_pairs: u64,
    pub unique_pairs: usize,
    pub top_k_coverage: f64,
    pub k: usize,
}

fn shipped_synonyms() -> &'static SynonymMap {
    static SYN: OnceLock<SynonymMap> = OnceLock::new();
    SYN.get_or_init(|| Taxonomy::shipped().synonyms)
}

/// Names of the contracts `c` inherits from, transitively, resolving bases
/// declared in the same unit.
fn ancestry(unit: &SourceUnit, c: &ContractDef) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut todo: Vec<String> = c.inherits.clone();
    while let Some(b) = todo.pop() {
        if out.insert(b.clone()) {
            if let Some(def) = unit.contract(&b) {
                todo.extend(def.inherits.iter().cloned());
            }
        }
    }
    out
}

fn is_sender(text: &str) -> bool {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    t == "msg.sender" || t == "_msgSender()"
}

struct Raw {
    role: String,
    pattern: Pattern,
}

/// End (exclusive) of the primary expression starting at `i`.
fn primary_end(src: &str, toks: &[Token], mut i: usize) -> usize {
    let mut expect_atom = true;
    while i < toks.len() {
        let t = toks[i].text(src);
        match (expect_atom, toks[i].kind) {
            (true, TokenKind::Ident | TokenKind::Number | TokenKind::Str) => {
                expect_atom = false;
                i += 1;
            }
            (false, TokenKind::Punct) if t == "." => {
                expect_atom = true;
                i += 1;
            }
            (_, TokenKind::Punct) if t == "(" || t == "[" => {
                i = close_of(src, toks, i) + 1;
                expect_atom = false;
            }
            _ => break,
        }
    }
    i
}

/// Start of the primary expression ending just before `end`.
fn primary_start(src: &str, toks: &[Token], end: usize) -> usize {
    let mut i = end;
    while i > 0 {
        let t = toks[i - 1].text(src);
        match toks[i - 1].kind {
            TokenKind::Ident | TokenKind::Number | TokenKind::Str => i -= 1,
            TokenKind::Punct if t == "." => i -= 1,
            TokenKind::Punct if t == ")" || t == "]" => i = open_of(src, toks, i - 1),
            _ => break,
        }
    }
    i
}

fn close_of(src: &str, toks: &[Token], open: usize) -> usize {
    let mut depth = 0usize;
    for (k, t) in toks.iter().enumerate().skip(open) {
        match t.text(src) {
            "(" | "[" => depth += 1,
            ")" | "]" => {
                depth -= 1;
                if depth == 0 {
                    return k;
                }
            }
            _ => {}
        }
    }
    toks.len().saturating_sub(1)
}

fn open_of(src: &str, toks: &[Token], close: usize) -> usize {
    let mut depth = 0usize;
    for k in (0..=close).rev() {
        match toks[k].text(src) {
            ")" | "]" => depth += 1,
            "(" | "[" => {
                depth -= 1;
                if depth == 0 {
                    return k;
                }
            }
            _ => {}
        }
    }
    0
}

fn span_text<'a>(src: &'a str, toks: &[Token], a: usize, b: usize) -> &'a str {
    if a >= b {
        return "";
    }
    &src[toks[a].span.start..toks[b - 1].span.end]
}

/// Role named by the non-sender side of a comparison: its base identifier
/// under any elementary-type casts, or the hardcoded-address marker for a
/// literal.
fn operand_role(src: &str, toks: &[Token]) -> Option<(String, bool)> {
    let mut toks = toks;
    loop {
        let first = toks.first()?;
        match first.kind {
            TokenKind::Number | TokenKind::Str => return Some((first.text(src).to_string(), true)),
            TokenKind::Ident => {
                let name = first.text(src);
                if is_elementary_type(name) && toks.get(1).is_some_and(|t| t.text(src) == "(") {
                    let close = close_of(src, toks, 1);
                    toks = &toks[2..close];
                    continue;
                }
                return Some((name.to_string(), false));
            }
            _ => return None,
        }
    }
}

/// Roles compared against `msg.sender` with `==`/`!=` in one condition.
fn sender_comparisons(text: &str) -> Vec<(String, bool)> {
    let toks: Vec<Token> = tokenize(text, 0).into_iter().filter(|t| !t.is_comment()).collect();
    let mut out = Vec::new();
    for k in 0..toks.len() {
        let op = toks[k].text(text);
        if op != "==" && op != "!=" {
            continue;
        }
        let ls = primary_start(text, &toks, k);
        let re = primary_end(text, &toks, k + 1);
        let (lhs, rhs) = (span_text(text, &toks, ls, k), span_text(text, &toks, k + 1, re));
        let other = if is_sender(lhs) && !is_sender(rhs) {
            &toks[k + 1..re]
        } else if is_sender(rhs) && !is_sender(lhs) {
            &toks[ls..k]
        } else {
            continue;
        };
        out.extend(operand_role(text, other));
    }
    out
}

fn function_pairs(unit: &SourceUnit, c: &ContractDef, f: &FunctionDef, out: &mut Vec<(Raw, String)>) {
    let bases = ancestry(unit, c);
    let ownable = OWNABLE.iter().any(|t| bases.contains(*t));
    let access_control = ACCESS_CONTROL.iter().any(|t| bases.contains(*t));
    let perm = f.name.clone();
    let mut emit = |role: String, pattern: Pattern| out.push((Raw { role, pattern }, perm.clone()));

    for m in &f.modifiers {
        if m.name.eq_ignore_ascii_case("onlyRole") {
            if let Some(arg) = m.args.first() {
                emit(arg.trim().to_string(), Pattern::Ozac);
                emit(arg.trim().to_string(), Pattern::Modifier);
            }
            continue;
        }
        let lower = m.name.to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("only") {
            if rest.is_empty() {
                continue;
            }
            if ownable && m.name == "onlyOwner" {
                emit(m.name.clone(), Pattern::Ozac);
            }
            emit(m.name.clone(), Pattern::Modifier);
        }
    }

    for s in flatten_statements(&f.body) {
        for op in &s.operations {
            for call in &op.calls {
                if call.base.is_some() {
                    continue;
                }
                match call.name.as_str() {
                    "hasRole" if call.args.len() >= 2 && is_sender(&call.args[1]) => {
                        emit(call.args[0].trim().to_string(), Pattern::Ozac)
                    }
                    "_checkRole" if !call.args.is_empty() => emit(call.args[0].trim().to_string(), Pattern::Ozac),
                    "_checkOwner" if ownable || access_control => emit("owner".into(), Pattern::Ozac),
                    _ => {}
                }
            }
        }
        if matches!(s.kind, StatementKind::Require | StatementKind::IfRevert) {
            for g in s.guard_ops() {
                for (role, literal) in sender_comparisons(&g.text) {
                    let role = if literal { format!("{HARDCODED_ADDRESS}:{role}") } else { role };
                    emit(role, Pattern::Trs);
                }
            }
        }
    }
}

/// Merges pairs with the same normalized (role, permission), summing
/// counts. The surviving record carries the highest-precedence pattern and
/// the smallest raw spelling, so the result does not depend on input order.
pub fn merge_pairs(pairs: impl IntoIterator<Item = RolePermissionPair>) -> Vec<RolePermissionPair> {
    let mut map: BTreeMap<(String, String), RolePermissionPair> = BTreeMap::new();
    for p in pairs {
        let key = (p.role.clone(), p.permission.clone());
        match map.get_mut(&key) {
            None => {
                map.insert(key, p);
            }
            Some(cur) => {
                let count = cur.count + p.count;
                if (p.pattern, &p.raw_role, &p.raw_permission) < (cur.pattern, &cur.raw_role, &cur.raw_permission) {
                    *cur = p;
                }
                cur.count = count;
            }
        }
    }
    map.into_values().collect()
}

/// Role-permission pairs of one unit, normalized with the shipped synonyms.
pub fn extract_pairs(unit: &SourceUnit) -> Vec<RolePermissionPair> {
    extract_pairs_with(unit, shipped_synonyms())
}

pub fn extract_pairs_with(unit: &SourceUnit, synonyms: &SynonymMap) -> Vec<RolePermissionPair> {
    let mut raw = Vec::new();
    for c in &unit.contracts {
        for f in &c.functions {
            function_pairs(unit, c, f, &mut raw);
        }
    }
    let pairs = raw.into_iter().filter_map(|(r, perm)| {
        let (role, permission, raw_role) = match r.role.strip_prefix(&format!("{HARDCODED_ADDRESS}:")) {
            Some(lit) => {
                let (_, p) = normalize_pair("x", &perm, synonyms);
                (HARDCODED_ADDRESS.to_string(), p, lit.to_string())
            }
            None => {
                let (role, p) = normalize_pair(&r.role, &perm, synonyms);
                (role, p, r.role)
            }
        };
        if role.is_empty() || permission.is_empty() {
            return None;
        }
        Some(RolePermissionPair {
            role,
            permission,
            raw_role,
            raw_permission: perm,
            pattern: r.pattern,
            count: 1,
        })
    });
    merge_pairs(pairs)
}

/// Sorts by count descending, then (role, permission) ascending.
pub fn rank_pairs(mut pairs: Vec<RolePermissionPair>) -> Vec<RolePermissionPair> {
    pairs.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key().cmp(&b.key())));
    pairs
}

fn stats(ranked: &[RolePermissionPair], k: usize) -> MiningStats {
    let total: u64 = ranked.iter().map(|p| p.count).sum();
    let top: u64 = ranked.iter().take(k).map(|p| p.count).sum();
    MiningStats {
        total_pairs: total,
        unique_pairs: ranked.len(),
        top_k_coverage: if total == 0 { 0.0 } else { top as f64 / total as f64 },
        k,
    }
}

/// Mines every `.sol` file under `root`, in parallel per file.
pub fn mine_corpus(root: &Path, k: usize) -> Result<(Vec<RolePermissionPair>, MiningStats)> {
    let unreadable = |reason: String| Error::CorpusUnreadable {
        path: root.display().to_string(),
        reason,
    };
    let meta = std::fs::metadata(root).map_err(|e| unreadable(e.to_string()))?;
    if !meta.is_dir() {
        return Err(unreadable("not a directory".into()));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| unreadable(e.to_string()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "sol") {
            files.push(entry.into_path());
        }
    }
    let per_file: Vec<Result<Vec<RolePermissionPair>>> = files
        .par_iter()
        .map(|path| {
            let bytes = std::fs::read(path).map_err(|e| Error::CorpusUnreadable {
                path: path.display().to_string(),
                reason: e.to_string(),
            })?;
            let text = String::from_utf8_lossy(&bytes);
            let rel = path.strip_prefix(root).unwrap_or(path).display().to_string();
            Ok(extract_pairs(&parse_source(&rel, &text)))
        })
        .collect();
    let mut all = Vec::new();
    for r in per_file {
        all.extend(r?);
    }
    let ranked = rank_pairs(merge_pairs(all));
    let s = stats(&ranked, k);
    Ok((ranked, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparisons() {
        assert_eq!(sender_comparisons("msg.sender == owner"), vec![("owner".to_string(), false)]);
        assert_eq!(sender_comparisons("bank != msg.sender"), vec![("bank".to_string(), false)]);
        assert_eq!(sender_comparisons("owner() == _msgSender()"), vec![("owner".to_string(), false)]);
        assert_eq!(sender_comparisons("msg.sender == address(0x1234)"), vec![("0x1234".to_string(), true)]);
        assert_eq!(sender_comparisons("roles[msg.sender] == true"), vec![]);
        assert_eq!(sender_comparisons("msg.value == 1"), vec![]);
        assert_eq!(sender_comparisons("!(msg.sender == s.admin)"), vec![("s".to_string(), false)]);
    }

    #[test]
    fn stats_arithmetic() {
        let p = |r: &str, c| RolePermissionPair {
            role: r.into(),
            permission: "f".into(),
            raw_role: r.into(),
            raw_permission: "f".into(),
            pattern: Pattern::Trs,
            count: c,
        };
        let ranked = rank_pairs(vec![p("a", 1), p("b", 3), p("c", 1)]);
        let s = stats(&ranked, 2);
        assert_eq!(s.total_pairs, 5);
        assert_eq!(s.unique_pairs, 3);
        assert!((s.top_k_coverage - 4.0 / 5.0).abs() < 1e-12);
        assert_eq!(stats(&[], 10).top_k_coverage, 0.0);
    }
}
