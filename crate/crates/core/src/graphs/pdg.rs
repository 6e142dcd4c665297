use super::{CallableId, Program};
use crate::solidity::{Operation, OpRole, Span, Statement, StatementKind};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PdgNodeKind {
    /// Pseudo-definition of a parameter at function entry.
    Param,
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PdgNode {
    pub kind: PdgNodeKind,
    pub text: String,
    pub span: Span,
    pub role: OpRole,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    /// Indices into the owning callable's `operations()`; `None` for params.
    pub op_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DataEdge {
    pub def: usize,
    #[serde(rename = "use")]
    pub use_: usize,
    pub var: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pdg {
    pub nodes: Vec<PdgNode>,
    pub data_edges: Vec<DataEdge>,
    /// (guard, dependent)
    pub control_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefUseChain {
    pub variable: String,
    pub defs: BTreeSet<usize>,
    pub uses: BTreeSet<usize>,
}

impl Pdg {
    pub fn data_preds(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.data_edges.iter().filter(move |e| e.use_ == n).map(|e| e.def)
    }

    pub fn data_succs(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.data_edges.iter().filter(move |e| e.def == n).map(|e| e.use_)
    }

    pub fn control_preds(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.control_edges.iter().filter(move |e| e.1 == n).map(|e| e.0)
    }

    pub fn control_succs(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        self.control_edges.iter().filter(move |e| e.0 == n).map(|e| e.1)
    }

    pub fn param_node(&self, name: &str) -> Option<usize> {
        self.nodes
            .iter()
            .position(|n| n.kind == PdgNodeKind::Param && n.writes.contains(name))
    }

    /// Operation nodes whose span contains `span`.
    pub fn nodes_containing(&self, span: Span) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.kind == PdgNodeKind::Op && n.span.contains(span))
            .map(|(i, _)| i)
    }
}

/// Builds the dependency graph of one function or modifier. Parameters come
/// first as pseudo-definitions, then operations in control order.
pub fn build_pdg(program: &Program<'_>, id: CallableId) -> Pdg {
    let callable = program.callable(id);
    let mut pdg = Pdg::default();
    for p in callable.params().iter().filter(|p| !p.name.is_empty()) {
        pdg.nodes.push(PdgNode {
            kind: PdgNodeKind::Param,
            text: p.name.clone(),
            span: p.span,
            role: OpRole::Plain,
            reads: BTreeSet::new(),
            writes: [p.name.clone()].into(),
            op_index: None,
        });
    }
    let first_op = pdg.nodes.len();
    for (i, op) in callable.operations().into_iter().enumerate() {
        pdg.nodes.push(op_node(op, i));
    }

    // reaching definitions, accumulated in control order
    let mut defs: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    let mut edges = Vec::new();
    for j in 0..pdg.nodes.len() {
        let node = &pdg.nodes[j];
        for v in &node.reads {
            if let Some(ds) = defs.get(v.as_str()) {
                for &d in ds {
                    edges.push(DataEdge {
                        def: d,
                        use_: j,
                        var: v.clone(),
                    });
                }
            }
        }
        for v in &node.writes {
            defs.entry(v.as_str()).or_default().push(j);
        }
    }
    edges.sort();
    pdg.data_edges = edges;

    let mut control = BTreeSet::new();
    let mut counter = first_op;
    let mut open_guards: Vec<usize> = Vec::new();
    control_walk(callable.body(), &mut counter, &mut Vec::new(), &mut open_guards, &mut control);
    pdg.control_edges = control.into_iter().collect();
    pdg
}

fn op_node(op: &Operation, index: usize) -> PdgNode {
    PdgNode {
        kind: PdgNodeKind::Op,
        text: op.text.clone(),
        span: op.span,
        role: op.role,
        reads: op.reads.clone(),
        writes: op.writes.clone(),
        op_index: Some(index),
    }
}

/// Assigns node indices in the same pre-order as `flatten_ops` and records
/// guard edges. `enclosing` holds guards of surrounding control statements;
/// `sticky` holds `require`/if-revert guards, which dominate everything
/// after them in the function.
fn control_walk(
    stmts: &[Statement],
    counter: &mut usize,
    enclosing: &mut Vec<usize>,
    sticky: &mut Vec<usize>,
    out: &mut BTreeSet<(usize, usize)>,
) {
    for s in stmts {
        let base = *counter;
        let mut own_guards = Vec::new();
        let mut post_ops = Vec::new();
        for (k, op) in s.operations.iter().enumerate() {
            let n = base + k;
            for &g in enclosing.iter().chain(sticky.iter()) {
                out.insert((g, n));
            }
            match op.role {
                OpRole::Guard => own_guards.push(n),
                OpRole::LoopPost => post_ops.push(n),
                _ => {}
            }
        }
        *counter += s.operations.len();
        let is_control = s.kind == StatementKind::Control || s.kind == StatementKind::IfRevert;
        if is_control {
            for &p in &post_ops {
                for &g in &own_guards {
                    out.insert((g, p));
                }
            }
            let depth = enclosing.len();
            enclosing.extend(own_guards.iter().copied());
            control_walk(&s.children, counter, enclosing, sticky, out);
            control_walk(&s.alt, counter, enclosing, sticky, out);
            enclosing.truncate(depth);
        } else {
            control_walk(&s.children, counter, enclosing, sticky, out);
            control_walk(&s.alt, counter, enclosing, sticky, out);
        }
        if s.kind == StatementKind::Require || s.kind == StatementKind::IfRevert {
            sticky.extend(own_guards);
        }
    }
}

pub fn def_use_chains(pdg: &Pdg) -> Vec<DefUseChain> {
    let mut map: BTreeMap<&str, (BTreeSet<usize>, BTreeSet<usize>)> = BTreeMap::new();
    for (i, n) in pdg.nodes.iter().enumerate() {
        for v in &n.writes {
            map.entry(v).or_default().0.insert(i);
        }
        for v in &n.reads {
            map.entry(v).or_default().1.insert(i);
        }
    }
    map.into_iter()
        .map(|(v, (defs, uses))| DefUseChain {
            variable: v.to_string(),
            defs,
            uses,
        })
        .collect()
}
