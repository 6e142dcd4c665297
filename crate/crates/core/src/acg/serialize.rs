use super::{AcContextGraph, AcgEdgeKind, AcgNode, AcgNodeKind, Access};
use crate::solidity::SNIPPET_CONTRACT;
use std::fmt::Write;

pub const DEFAULT_TOKEN_BUDGET: usize = 6000;
pub const TRUNCATED_MARKER: &str = "[truncated]";

/// Rough token count: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

fn display(n: &AcgNode) -> String {
    if n.contract == SNIPPET_CONTRACT || n.contract.is_empty() {
        n.name.clone()
    } else {
        format!("{}.{}", n.contract, n.name)
    }
}

/// What the current truncation tier still shows.
struct View {
    comments: Vec<bool>,
    bodies: Vec<bool>,
}

fn render(g: &AcContextGraph, view: &View) -> String {
    let mut out = String::new();
    let root = g.root_node();
    let _ = writeln!(out, "AC context graph for {}", display(root));
    for (i, n) in g.nodes.iter().enumerate() {
        if n.kind == AcgNodeKind::Comment {
            if !view.comments[i] {
                continue;
            }
            let _ = writeln!(out, "\n[Comment] {}", display(n));
            for line in &n.body {
                let _ = writeln!(out, "    {}", line.trim());
            }
            continue;
        }
        let kind = match n.kind {
            AcgNodeKind::Function => "Function",
            AcgNodeKind::Modifier => "Modifier",
            _ => "StateVar",
        };
        let _ = writeln!(out, "\n[{kind}] {}", display(n));
        let _ = writeln!(out, "Signature: {}", n.signature.split_whitespace().collect::<Vec<_>>().join(" "));
        if view.bodies[i] && !n.body.is_empty() {
            let _ = writeln!(out, "Body:");
            for line in &n.body {
                let _ = writeln!(out, "{line}");
            }
        }
    }
    let mut rel = String::new();
    for e in &g.edges {
        let (s, d) = (&g.nodes[e.src], &g.nodes[e.dst]);
        match e.kind {
            AcgEdgeKind::Invocation => {
                let _ = writeln!(rel, "{} invokes {}", s.name, d.name);
            }
            AcgEdgeKind::Modifying => {
                let _ = writeln!(rel, "{} is modified by {}", s.name, d.name);
            }
            AcgEdgeKind::ReadWrite => {
                let verb = match e.access {
                    Some(Access::Writes) => "writes",
                    Some(Access::ReadsWrites) => "reads and writes",
                    _ => "reads",
                };
                let _ = writeln!(rel, "{} {verb} {}", s.name, d.name);
            }
            AcgEdgeKind::Comment => {
                if view.comments[e.src] {
                    let text = s.signature.split_whitespace().collect::<Vec<_>>().join(" ");
                    let _ = writeln!(rel, "comment on {}: {text}", d.name);
                }
            }
        }
    }
    if !rel.is_empty() {
        out.push_str("\nRelationships:\n");
        out.push_str(&rel);
    }
    out
}

/// Renders the graph as prompt text within `token_budget` estimated tokens.
/// Over budget, comments go first, then state-variable bodies, then the
/// bodies of functions other than the root; as a last resort the text is
/// cut at a line boundary. Any truncation appends a `[truncated]` line.
pub fn serialize_acg(g: &AcContextGraph, token_budget: usize) -> String {
    let mut view = View {
        comments: vec![true; g.nodes.len()],
        bodies: vec![true; g.nodes.len()],
    };
    let full = render(g, &view);
    if estimate_tokens(&full) <= token_budget {
        return full;
    }
    let fits = |text: &str| estimate_tokens(text) + estimate_tokens(TRUNCATED_MARKER) + 1 <= token_budget;
    let tiers: Vec<Box<dyn Fn(usize, &AcgNode) -> bool>> = vec![
        Box::new(|_, n: &AcgNode| n.kind == AcgNodeKind::Comment),
        Box::new(|_, n: &AcgNode| n.kind == AcgNodeKind::StateVar),
        Box::new(move |i, n: &AcgNode| n.kind == AcgNodeKind::Function && i != g.root),
    ];
    for (t, tier) in tiers.iter().enumerate() {
        for i in (0..g.nodes.len()).rev() {
            if !tier(i, &g.nodes[i]) {
                continue;
            }
            if t == 0 {
                view.comments[i] = false;
            } else {
                view.bodies[i] = false;
            }
            let text = render(g, &view);
            if fits(&text) {
                return format!("{text}{TRUNCATED_MARKER}\n");
            }
        }
    }
    let text = render(g, &view);
    let mut kept = String::new();
    for line in text.lines() {
        let candidate = format!("{kept}{line}\n");
        if !fits(&candidate) {
            break;
        }
        kept = candidate;
    }
    format!("{kept}{TRUNCATED_MARKER}\n")
}
