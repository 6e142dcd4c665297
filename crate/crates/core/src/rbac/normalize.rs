use std::collections::{BTreeMap, BTreeSet};

/// Alias → canonical name, keyed by normalized (lowercase alphanumeric) text.
pub type SynonymMap = BTreeMap<String, String>;

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s.is_char_boundary(prefix.len()) && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

fn strip_suffix_ci<'a>(s: &'a str, suffix: &str) -> Option<&'a str> {
    let cut = s.len().checked_sub(suffix.len())?;
    if s.is_char_boundary(cut) && s[cut..].eq_ignore_ascii_case(suffix) {
        Some(&s[..cut])
    } else {
        None
    }
}

fn alnum_count(s: &str) -> usize {
    s.chars().filter(|c| c.is_alphanumeric()).count()
}

/// `is`/`get` count as prefixes only before a word boundary: an uppercase
/// letter (`isOwner`) or an underscore (`get_admin`).
fn at_boundary(rest: &str) -> bool {
    rest.chars().next().is_some_and(|c| c.is_uppercase() || c == '_')
}

fn pass(s: &str, synonyms: &SynonymMap) -> String {
    let mut t = s.trim();
    if let Some(rest) = strip_prefix_ci(t, "only") {
        if alnum_count(rest) > 0 {
            t = rest;
        }
    }
    if let Some(rest) = strip_prefix_ci(t, "set_") {
        if alnum_count(rest) > 0 {
            t = rest;
        }
    }
    for p in ["is", "Is", "get", "Get"] {
        if let Some(rest) = t.strip_prefix(p) {
            if at_boundary(rest) && alnum_count(rest) > 0 {
                t = rest;
                break;
            }
        }
    }
    for suffix in ["address", "addr", "role"] {
        if let Some(rest) = strip_suffix_ci(t, suffix) {
            if alnum_count(rest) >= 2 {
                t = rest;
                break;
            }
        }
    }
    let flat: String = t
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect();
    match synonyms.get(&flat) {
        Some(canon) => canon.clone(),
        None => flat,
    }
}

/// Normalizes one role or permission name: strips `only`/`is`/`get`/`set_`
/// prefixes and `role`/`addr`/`address` suffixes, lowercases, drops
/// non-alphanumerics and applies the synonym map, repeating until nothing
/// changes. If the rewrite cycles, the smallest member of the cycle wins.
pub fn normalize_term(s: &str, synonyms: &SynonymMap) -> String {
    let mut seen: Vec<String> = Vec::new();
    let mut cur = pass(s, synonyms);
    loop {
        let next = pass(&cur, synonyms);
        if next == cur {
            return cur;
        }
        if let Some(at) = seen.iter().position(|x| *x == next) {
            let cycle: BTreeSet<&String> = seen[at..].iter().chain(std::iter::once(&cur)).collect();
            return cycle.into_iter().next().cloned().unwrap_or_default();
        }
        seen.push(cur);
        cur = next;
    }
}

pub fn normalize_pair(role: &str, permission: &str, synonyms: &SynonymMap) -> (String, String) {
    (normalize_term(role, synonyms), normalize_term(permission, synonyms))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syn() -> SynonymMap {
        [("administrator", "admin"), ("ownerofthecontract", "owner")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn prefixes_and_suffixes() {
        let s = syn();
        assert_eq!(normalize_pair("OnlyOwner", "TransferOwnership", &s), ("owner".into(), "transferownership".into()));
        assert_eq!(normalize_term("administrator", &s), "admin");
        assert_eq!(normalize_term("MINTER_ROLE", &s), "minter");
        assert_eq!(normalize_term("bankAddress", &s), "bank");
        assert_eq!(normalize_term("isOwner", &s), "owner");
        assert_eq!(normalize_term("issue", &s), "issue");
        assert_eq!(normalize_term("getter", &s), "getter");
        assert_eq!(normalize_term("set_admin", &s), "admin");
        assert_eq!(normalize_term("only", &s), "only");
        assert_eq!(normalize_term("Owner of the contract", &s), "owner");
        assert_eq!(normalize_term("role", &s), "role");
    }

    #[test]
    fn cycles_resolve_to_minimum() {
        let s: SynonymMap = [("a", "b"), ("b", "a")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(normalize_term("a", &s), "a");
        assert_eq!(normalize_term("b", &s), "a");
    }
}
