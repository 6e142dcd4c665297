//! Role-permission mining, the curated RBAC taxonomy and candidate RBAC
//! element extraction.

mod candidates;
mod mining;
mod normalize;
mod taxonomy;

pub use candidates::{candidate_rbac_elements, Candidate, CandidateKind};
pub use mining::{
    extract_pairs, extract_pairs_with, merge_pairs, mine_corpus, rank_pairs, MiningStats,
    DEFAULT_TOP_K, HARDCODED_ADDRESS,
};
pub use normalize::{normalize_pair, normalize_term, SynonymMap};
pub use taxonomy::{
    propose_taxonomy_entry, sanitize_taxonomy, ProposeOutcome, Provenance, ReviewVerdict, Taxonomy,
    TaxonomyEntry, TaxonomyStore, SCHEMA_VERSION, UNCATEGORIZED,
};

use serde::{Deserialize, Serialize};

/// Which mining pattern produced a pair. Ordered by precedence when one
/// guard is seen by several patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pattern {
    #[serde(rename = "OZAC")]
    Ozac,
    Modifier,
    #[serde(rename = "TRS")]
    Trs,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolePermissionPair {
    pub role: String,
    pub permission: String,
    pub raw_role: String,
    pub raw_permission: String,
    pub pattern: Pattern,
    pub count: u64,
}

impl RolePermissionPair {
    pub fn key(&self) -> (&str, &str) {
        (&self.role, &self.permission)
    }
}
