mod common;

use acrepair_core::acg::{
    build_acg, estimate_tokens, serialize_acg, slice_operations, AcgEdgeKind, AcgNodeKind,
    DEFAULT_TOKEN_BUDGET, TRUNCATED_MARKER,
};
use acrepair_core::graphs::{state_vars_touched, Analysis};
use acrepair_core::solidity::parse_source;
use acrepair_core::Error;
use common::*;
use std::collections::BTreeSet;

fn seeds(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn motivating_graph_contents() {
    let u = [load("motivating/DepositPool.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("depositFromOtherContract", None).unwrap();
    let g = build_acg(&a, f, &seeds(&["onlyBank", "onlyOwner"])).unwrap();
    let fns = g.names(AcgNodeKind::Function);
    assert!(fns.contains(&"depositFromOtherContract"));
    assert!(fns.contains(&"_autoDeposit"));
    let mods = g.names(AcgNodeKind::Modifier);
    assert!(mods.contains(&"onlyBank") && mods.contains(&"onlyOwner"));
    assert!(g.names(AcgNodeKind::StateVar).contains(&"isPoolActive"));
    assert!(g.has_edge("depositFromOtherContract", "_autoDeposit", AcgEdgeKind::Invocation));
    assert!(g.has_edge("depositFromOtherContract", "isPoolActive", AcgEdgeKind::ReadWrite));
    assert_eq!(g.root_node().name, "depositFromOtherContract");
    let root = g.root_node();
    assert_eq!(root.body.len(), 2);
    assert!(root.body[0].contains("require(isPoolActive"));
    let text = serialize_acg(&g, DEFAULT_TOKEN_BUDGET);
    assert!(text.contains("depositFromOtherContract invokes _autoDeposit"), "{text}");
    assert!(text.contains("comment on depositFromOtherContract: // callable by anyone"));
    assert!(text.contains("setBankAddress is modified by onlyOwner"));
}

#[test]
fn empty_body_gives_root_only() {
    let u = [load("slicing/12_empty.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("noop", None).unwrap();
    let g = build_acg(&a, f, &[]).unwrap();
    assert_eq!(g.nodes.len(), 1);
    assert!(g.edges.is_empty());
    let text = serialize_acg(&g, DEFAULT_TOKEN_BUDGET);
    assert!(!text.contains("Relationships"));
    assert!(text.contains("[Function] Empty.noop"));
}

#[test]
fn declaration_only_target_is_rejected() {
    let u = [parse_source("i.sol", "interface I { function f() external; }")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("f", None).unwrap();
    assert!(matches!(build_acg(&a, f, &[]), Err(Error::EmptyTarget(_))));
}

#[test]
fn unrelated_function_is_absent() {
    let u = [load("slicing/08_unrelated.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("a", None).unwrap();
    let g = build_acg(&a, f, &[]).unwrap();
    assert!(g.find(AcgNodeKind::Function, "b").is_none());
    assert!(g.find(AcgNodeKind::StateVar, "y").is_none());
}

#[test]
fn slices_match_brute_force_closure() {
    let mut cross = 0;
    for entry in std::fs::read_dir(fixtures().join("slicing")).unwrap() {
        let path = entry.unwrap().path();
        let rel = format!("slicing/{}", path.file_name().unwrap().to_string_lossy());
        let u = [load(&rel)];
        let a = Analysis::new(&u);
        let target = header(&u[0], "target").unwrap();
        let f = a.program.find_function(&target, None).unwrap();
        let vars = state_vars_touched(&a.program, &a.cg, f);
        let names: BTreeSet<String> = vars.iter().map(|v| a.program.state_var(*v).name.clone()).collect();
        let got = slice_operations(&a, &vars).retained;
        let want = oracle_slice(&a.program, &names);
        assert_eq!(got, want, "{rel}");
        if got.iter().map(|(c, _)| *c).collect::<BTreeSet<_>>().len() > 1 {
            cross += 1;
        }
    }
    assert!(cross >= 3);
}

#[test]
fn cross_function_param_and_return_links() {
    let u = [load("slicing/03_crossfn_param.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("deposit", None).unwrap();
    let g = build_acg(&a, f, &[]).unwrap();
    let root = g.root_node();
    // backward through _credit's parameters reaches the scaling line
    assert!(root.body.iter().any(|l| l.contains("uint256 scaled = amount * 2;")));
    assert!(g.find(AcgNodeKind::Function, "unrelated").is_none());

    let u = [load("slicing/04_crossfn_return.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("update", None).unwrap();
    let g = build_acg(&a, f, &[]).unwrap();
    let cur = &g.nodes[g.find(AcgNodeKind::Function, "current").unwrap()];
    assert_eq!(cur.body, vec!["        return price;"]);
    assert!(g.root_node().body.iter().any(|l| l.contains("uint256 old = current();")));
}

#[test]
fn shadowed_locals_are_not_state() {
    let u = [load("slicing/07_shadow.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("set", None).unwrap();
    let g = build_acg(&a, f, &[]).unwrap();
    assert!(g.find(AcgNodeKind::StateVar, "other").is_none());
    assert!(g.find(AcgNodeKind::Function, "touchOther").is_none());
}

#[test]
fn inherited_modifier_seed() {
    let u = [load("slicing/10_inherit.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("pause", None).unwrap();
    let g = build_acg(&a, f, &seeds(&["onlyAdmin"])).unwrap();
    let m = &g.nodes[g.find(AcgNodeKind::Modifier, "onlyAdmin").unwrap()];
    assert_eq!(m.contract, "Base");
    assert!(m.body.iter().any(|l| l.contains("require(msg.sender == admin")));
    assert!(g.find(AcgNodeKind::StateVar, "admin").is_some());
    let text = serialize_acg(&g, DEFAULT_TOKEN_BUDGET);
    assert!(text.contains("[Modifier] Base.onlyAdmin"));
}

#[test]
fn body_lines_are_verbatim_and_graph_is_reachable() {
    for entry in std::fs::read_dir(fixtures().join("slicing")).unwrap() {
        let path = entry.unwrap().path();
        let rel = format!("slicing/{}", path.file_name().unwrap().to_string_lossy());
        let u = [load(&rel)];
        let a = Analysis::new(&u);
        let target = header(&u[0], "target").unwrap();
        let seed_list: Vec<String> = header(&u[0], "seeds")
            .map(|s| s.split(',').map(|x| x.trim().to_string()).collect())
            .unwrap_or_default();
        let f = a.program.find_function(&target, None).unwrap();
        let g = build_acg(&a, f, &seed_list).unwrap();
        let lines: BTreeSet<&str> = u[0].raw.lines().collect();
        for n in &g.nodes {
            for l in &n.body {
                assert!(lines.contains(l.as_str()), "{rel}: {l:?}");
            }
        }
        let mut starts = vec![g.root];
        for s in &seed_list {
            starts.extend(g.nodes.iter().position(|n| &n.name == s));
        }
        assert_eq!(g.reachable_from(&starts).len(), g.nodes.len(), "{rel}\n{}", g.debug_dump());
        let mut seen = BTreeSet::new();
        for e in &g.edges {
            assert!(seen.insert((e.src, e.dst, e.kind)), "{rel}: duplicate edge");
        }
        // determinism and idempotence
        assert_eq!(build_acg(&a, f, &seed_list).unwrap(), g);
        assert_eq!(serialize_acg(&g, 6000), serialize_acg(&g, 6000));
    }
}

#[test]
fn adding_a_seed_never_removes_nodes() {
    let u = [load("motivating/DepositPool.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("depositFromOtherContract", None).unwrap();
    let key = |g: &acrepair_core::acg::AcContextGraph| {
        g.nodes
            .iter()
            .map(|n| (n.kind, n.contract.clone(), n.name.clone()))
            .collect::<BTreeSet<_>>()
    };
    let base = key(&build_acg(&a, f, &[]).unwrap());
    let one = key(&build_acg(&a, f, &seeds(&["onlyBank"])).unwrap());
    let two = key(&build_acg(&a, f, &seeds(&["onlyBank", "onlyOwner"])).unwrap());
    assert!(base.is_subset(&one) && one.is_subset(&two));
}

#[test]
fn truncation_drops_comments_then_bodies() {
    let u = [load("motivating/DepositPool.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("depositFromOtherContract", None).unwrap();
    let g = build_acg(&a, f, &seeds(&["onlyBank", "onlyOwner"])).unwrap();
    let full = serialize_acg(&g, 100_000);
    assert!(!full.contains(TRUNCATED_MARKER));
    let budget = estimate_tokens(&full) - 5;
    let cut = serialize_acg(&g, budget);
    assert!(cut.ends_with("[truncated]\n"));
    assert!(!cut.contains("[Comment]"));
    assert!(cut.contains("require(isPoolActive"));
    assert!(estimate_tokens(&cut) <= budget);
    let tiny = serialize_acg(&g, 60);
    assert!(estimate_tokens(&tiny) <= 60);
    assert!(tiny.ends_with("[truncated]\n"));
}
