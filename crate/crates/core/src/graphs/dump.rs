//! Line-oriented text dumps used by golden and oracle tests.
//!
//! ```text
//! node <index> <kind> <text>
//! edge data <def> <use> <var>
//! edge control <guard> <dependent> -
//! ```

use super::{CallGraph, Pdg, PdgNodeKind, Program};
use std::fmt::Write;

pub fn dump_pdg(pdg: &Pdg) -> String {
    let mut out = String::new();
    for (i, n) in pdg.nodes.iter().enumerate() {
        let kind = match n.kind {
            PdgNodeKind::Param => "param",
            PdgNodeKind::Op => "op",
        };
        let _ = writeln!(out, "node {i} {kind} {}", one_line(&n.text));
    }
    for e in &pdg.data_edges {
        let _ = writeln!(out, "edge data {} {} {}", e.def, e.use_, e.var);
    }
    for (g, d) in &pdg.control_edges {
        let _ = writeln!(out, "edge control {g} {d} -");
    }
    out
}

pub fn dump_call_graph(program: &Program<'_>, cg: &CallGraph) -> String {
    let mut out = String::new();
    for n in &cg.nodes {
        let _ = writeln!(out, "node {}", program.qualified_name(*n));
    }
    for e in &cg.edges {
        let _ = writeln!(
            out,
            "edge call {} {} -",
            program.qualified_name(e.caller),
            program.qualified_name(e.callee)
        );
    }
    for m in &cg.modifier_uses {
        let _ = writeln!(
            out,
            "edge modifier {} {} -",
            program.qualified_name(m.function),
            program.qualified_name(m.modifier)
        );
    }
    for x in &cg.external {
        let _ = writeln!(out, "sink {} {}", program.qualified_name(x.caller), x.target);
    }
    out
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}
