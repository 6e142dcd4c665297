use crate::solidity::SourceUnit;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CandidateKind {
    Function,
    StateVar,
    Modifier,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub name: String,
    pub kind: CandidateKind,
    pub contract: String,
}

const ROLE_NOUNS: &[&str] = &["owner", "admin", "role", "auth", "bank", "minter", "guardian", "governor"];
const ROLE_VERBS: &[&str] = &["set", "add", "remove", "grant", "revoke", "transfer"];

fn role_like_name(name: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    ROLE_NOUNS.iter().any(|n| lower.contains(n))
}

fn role_like_type(type_name: &str) -> bool {
    let t: String = type_name.chars().filter(|c| !c.is_whitespace()).collect();
    t == "address"
        || t == "addresspayable"
        || t == "mapping(address=>bool)"
        || t.to_ascii_lowercase().contains("role")
}

fn role_management_function(name: &str) -> bool {
    let lower = name.trim_start_matches('_').to_ascii_lowercase();
    ROLE_VERBS.iter().any(|v| lower.starts_with(v)) && role_like_name(&lower)
}

/// Names of code elements that may belong to an RBAC mechanism: every
/// modifier, address/`mapping(address => bool)`/role-typed or role-named
/// state variables, and functions pairing a role-management verb with a
/// role noun (`setBank`, `transferOwnership`, `grantRole`).
pub fn candidate_rbac_elements(units: &[SourceUnit]) -> Vec<Candidate> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |c: Candidate| {
        if seen.insert(c.clone()) {
            out.push(c);
        }
    };
    for u in units {
        for c in &u.contracts {
            let contract = c.display_name().to_string();
            for m in &c.modifiers {
                push(Candidate {
                    name: m.name.clone(),
                    kind: CandidateKind::Modifier,
                    contract: contract.clone(),
                });
            }
            for v in &c.state_vars {
                if role_like_type(&v.type_name) || role_like_name(&v.name) {
                    push(Candidate {
                        name: v.name.clone(),
                        kind: CandidateKind::StateVar,
                        contract: contract.clone(),
                    });
                }
            }
            for f in &c.functions {
                if role_management_function(&f.name) {
                    push(Candidate {
                        name: f.name.clone(),
                        kind: CandidateKind::Function,
                        contract: contract.clone(),
                    });
                }
            }
        }
    }
    out
}
