mod common;

use acrepair_core::graphs::{
    build_pdg, def_use_chains, dump_call_graph, dump_pdg, state_vars_touched, Analysis, Program,
};
use acrepair_core::solidity::parse_source;
use common::*;
use std::collections::BTreeSet;

const SLICING: &[&str] = &[
    "slicing/01_straight.sol",
    "slicing/02_guarded.sol",
    "slicing/03_crossfn_param.sol",
    "slicing/04_crossfn_return.sol",
    "slicing/05_crossfn_chain.sol",
    "slicing/06_loop.sol",
    "slicing/07_shadow.sol",
    "slicing/08_unrelated.sol",
    "slicing/09_ifrevert.sol",
    "slicing/10_inherit.sol",
    "slicing/11_multi_ops.sol",
    "slicing/12_empty.sol",
];

#[test]
fn direct_call_edge() {
    let u = [parse_source("a.sol", "contract A { function f() public { g(); } function g() internal {} }")];
    let a = Analysis::new(&u);
    let dump = dump_call_graph(&a.program, &a.cg);
    assert!(dump.contains("edge call A.f A.g -"), "{dump}");
    assert!(a.cg.external.is_empty());
}

#[test]
fn undeclared_call_is_external_sink() {
    let u = [parse_source("a.sol", "contract A { function f() public { h(); } }")];
    let a = Analysis::new(&u);
    assert!(a.cg.edges.is_empty());
    assert_eq!(a.cg.external.len(), 1);
    assert_eq!(a.cg.external[0].target, "h");
}

#[test]
fn motivating_call_edge_and_bindings() {
    let u = [load("motivating/DepositPool.sol")];
    let a = Analysis::new(&u);
    let f = a.program.find_function("depositFromOtherContract", None).unwrap();
    let g = a.program.find_function("_autoDeposit", None).unwrap();
    let e = a.cg.edges_from(f).find(|e| e.callee == g).expect("edge to _autoDeposit");
    assert_eq!(e.arg_bindings.len(), 4);
    assert_eq!(e.arg_bindings[0], ("_depositAmount".to_string(), "_amount".to_string()));
    assert!(u[0].text(e.call_site).starts_with("_autoDeposit("));
}

#[test]
fn call_sites_yield_one_record_each() {
    for rel in SLICING {
        let u = [load(rel)];
        let a = Analysis::new(&u);
        for id in a.program.callables() {
            let edges = a.cg.edges_from(id).count();
            let sinks = a.cg.external.iter().filter(|x| x.caller == id).count();
            let sites: usize = a.program.callable(id).operations().iter().map(|o| o.calls.len()).sum();
            assert!(edges + sinks <= sites, "{rel}");
            let spans: BTreeSet<_> = a
                .cg
                .edges_from(id)
                .map(|e| e.call_site)
                .chain(a.cg.external.iter().filter(|x| x.caller == id).map(|x| x.call_site))
                .collect();
            assert_eq!(spans.len(), edges + sinks, "{rel}: a call site produced two records");
        }
    }
}

#[test]
fn straight_line_def_use() {
    let u = [parse_source("a.sol", "contract A { uint x; uint y; function f() public { x = 1; y = x; } }")];
    let p = Program::new(&u);
    let id = p.find_function("f", None).unwrap();
    let pdg = build_pdg(&p, id);
    assert_eq!(pdg.data_edges.len(), 1);
    assert_eq!((pdg.data_edges[0].def, pdg.data_edges[0].use_), (0, 1));
    assert_eq!(pdg.data_edges[0].var, "x");
    let chains = def_use_chains(&pdg);
    let x = chains.iter().find(|c| c.variable == "x").unwrap();
    assert_eq!(x.defs, [0].into());
    assert_eq!(x.uses, [1].into());
    assert!(dump_pdg(&pdg).contains("edge data 0 1 x"));
}

#[test]
fn single_guard_control_edge() {
    let u = [parse_source("a.sol", "contract A { bool c; uint x; uint y; function f() public { if (c) { y = x; } } }")];
    let p = Program::new(&u);
    let pdg = build_pdg(&p, p.find_function("f", None).unwrap());
    assert_eq!(pdg.control_edges, vec![(0, 1)]);
}

#[test]
fn motivating_require_guards_call() {
    let u = [load("motivating/DepositPool.sol")];
    let p = Program::new(&u);
    let pdg = build_pdg(&p, p.find_function("depositFromOtherContract", None).unwrap());
    // 4 params, then require (4) and the call (5)
    assert_eq!(pdg.nodes[4].text, "isPoolActive");
    assert!(pdg.nodes[5].text.starts_with("_autoDeposit"));
    assert!(pdg.control_edges.contains(&(4, 5)));
}

#[test]
fn pdg_matches_brute_force_oracle() {
    let mut checked = 0;
    for rel in SLICING.iter().chain(["motivating/DepositPool.sol"].iter()) {
        let u = [load(rel)];
        let p = Program::new(&u);
        for id in p.callables() {
            let c = p.callable(id);
            let pdg = build_pdg(&p, id);
            let nodes = oracle_nodes(c);
            assert_eq!(pdg.nodes.len(), nodes.len());
            let got: BTreeSet<_> = pdg.data_edges.iter().map(|e| (e.def, e.use_, e.var.clone())).collect();
            assert_eq!(got, oracle_data_pairs(&nodes), "{rel} {}", c.name());
            let got: BTreeSet<_> = pdg.control_edges.iter().copied().collect();
            assert_eq!(got, oracle_control_pairs(c.body(), param_count(c)), "{rel} {}", c.name());
            for e in &pdg.data_edges {
                assert!(e.def < e.use_);
            }
            checked += 1;
        }
    }
    assert!(checked > 30);
}

#[test]
fn state_vars_touched_examples() {
    let src = "contract A { address owner; uint balance; function f() public { owner = msg.sender; } function g() internal { balance = 1; } function h() public { g(); } function p(uint a) public pure returns (uint) { return a; } }";
    let u = [parse_source("a.sol", src)];
    let a = Analysis::new(&u);
    let name = |id| {
        state_vars_touched(&a.program, &a.cg, id)
            .into_iter()
            .map(|v| a.program.state_var(v).name.clone())
            .collect::<Vec<_>>()
    };
    assert_eq!(name(a.program.find_function("f", None).unwrap()), vec!["owner"]);
    assert_eq!(name(a.program.find_function("h", None).unwrap()), vec!["balance"]);
    assert!(name(a.program.find_function("p", None).unwrap()).is_empty());
}

#[test]
fn state_vars_touched_matches_closure_oracle() {
    for rel in SLICING.iter().chain(["motivating/DepositPool.sol"].iter()) {
        let u = [load(rel)];
        let a = Analysis::new(&u);
        let oracle = oracle_state_vars(&a.program);
        for id in a.program.callables() {
            let got: BTreeSet<String> = state_vars_touched(&a.program, &a.cg, id)
                .into_iter()
                .map(|v| a.program.state_var(v).name.clone())
                .collect();
            assert_eq!(got, oracle[&id], "{rel} {}", a.program.qualified_name(id));
        }
    }
}

#[test]
fn state_vars_touched_is_monotone_in_callees() {
    let before = "contract A { uint x; uint y; function f() public { x = 1; } function g() internal { y = 2; } }";
    let after = "contract A { uint x; uint y; function f() public { x = 1; g(); } function g() internal { y = 2; } }";
    let get = |src: &str| {
        let u = [parse_source("a.sol", src)];
        let a = Analysis::new(&u);
        let f = a.program.find_function("f", None).unwrap();
        state_vars_touched(&a.program, &a.cg, f)
            .into_iter()
            .map(|v| a.program.state_var(v).name.clone())
            .collect::<BTreeSet<_>>()
    };
    let b = get(before);
    let c = get(after);
    assert!(b.is_subset(&c));
    assert!(c.contains("y"));
}

#[test]
fn recursion_terminates() {
    let src = "contract A { uint x; function f(uint n) public { if (n > 0) { g(n - 1); } } function g(uint n) internal { x = n; f(n); } }";
    let u = [parse_source("a.sol", src)];
    let a = Analysis::new(&u);
    let f = a.program.find_function("f", None).unwrap();
    assert_eq!(state_vars_touched(&a.program, &a.cg, f).len(), 1);
}
