//! Access-control context graph: an inter-procedural slice around the
//! vulnerable function and the RBAC elements tied to it.

mod build;
mod serialize;

pub use build::{build_acg, resolve_seeds, slice_operations, SeedSet, SliceResult};
pub use serialize::{estimate_tokens, serialize_acg, DEFAULT_TOKEN_BUDGET, TRUNCATED_MARKER};

use serde::{Deserialize, Serialize};
use std::fmt::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcgNodeKind {
    Function,
    Modifier,
    StateVar,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcgNode {
    pub kind: AcgNodeKind,
    pub name: String,
    pub contract: String,
    pub signature: String,
    /// Verbatim source lines retained by the slice.
    pub body: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcgEdgeKind {
    Invocation,
    Modifying,
    ReadWrite,
    Comment,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Access {
    Reads,
    Writes,
    ReadsWrites,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AcgEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: AcgEdgeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub access: Option<Access>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcContextGraph {
    pub nodes: Vec<AcgNode>,
    pub edges: Vec<AcgEdge>,
    pub root: usize,
}

impl AcContextGraph {
    pub fn root_node(&self) -> &AcgNode {
        &self.nodes[self.root]
    }

    pub fn find(&self, kind: AcgNodeKind, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.kind == kind && n.name == name)
    }

    pub fn names(&self, kind: AcgNodeKind) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.kind == kind)
            .map(|n| n.name.as_str())
            .collect()
    }

    pub fn has_edge(&self, src: &str, dst: &str, kind: AcgEdgeKind) -> bool {
        self.edges.iter().any(|e| {
            e.kind == kind && self.nodes[e.src].name == src && self.nodes[e.dst].name == dst
        })
    }

    /// Nodes reachable from `starts` ignoring edge direction.
    pub fn reachable_from(&self, starts: &[usize]) -> std::collections::BTreeSet<usize> {
        let mut seen: std::collections::BTreeSet<usize> = starts.iter().copied().collect();
        let mut stack: Vec<usize> = starts.to_vec();
        while let Some(n) = stack.pop() {
            for e in &self.edges {
                let other = if e.src == n {
                    e.dst
                } else if e.dst == n {
                    e.src
                } else {
                    continue;
                };
                if seen.insert(other) {
                    stack.push(other);
                }
            }
        }
        seen
    }

    /// One record per node and edge, for golden tests.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "node {i} {:?} {}.{} lines={}", n.kind, n.contract, n.name, n.body.len());
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "edge {:?} {} {}",
                e.kind, self.nodes[e.src].name, self.nodes[e.dst].name
            );
        }
        out
    }
}
