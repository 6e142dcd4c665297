//! Brute-force oracles shared by the graph, slicing and acceptance tests.
//! They recompute dependencies by exhaustive pair enumeration and fixpoint
//! iteration, independently of the library's worklist implementations.
#![allow(dead_code)]

use acrepair_core::graphs::{Callable, CallableId, Program};
use acrepair_core::solidity::{
    flatten_ops, parse_source, OpRole, SourceUnit, Statement, StatementKind,
};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn load(rel: &str) -> SourceUnit {
    let path = fixtures().join(rel);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_source(rel, &text)
}

/// `// key: value` header lines of a fixture.
pub fn header(unit: &SourceUnit, key: &str) -> Option<String> {
    let prefix = format!("// {key}:");
    unit.raw
        .lines()
        .find_map(|l| l.trim().strip_prefix(&prefix).map(|v| v.trim().to_string()))
}

#[derive(Debug, Clone)]
pub struct ONode {
    pub is_param: bool,
    pub reads: BTreeSet<String>,
    pub writes: BTreeSet<String>,
    pub declares: BTreeSet<String>,
    pub role: OpRole,
    pub calls: Vec<(String, usize)>,
}

/// Parameters first, then operations in pre-order.
pub fn oracle_nodes(c: Callable<'_>) -> Vec<ONode> {
    let mut out: Vec<ONode> = c
        .params()
        .iter()
        .filter(|p| !p.name.is_empty())
        .map(|p| ONode {
            is_param: true,
            reads: BTreeSet::new(),
            writes: [p.name.clone()].into(),
            declares: BTreeSet::new(),
            role: OpRole::Plain,
            calls: Vec::new(),
        })
        .collect();
    for op in flatten_ops(c.body()) {
        out.push(ONode {
            is_param: false,
            reads: op.reads.clone(),
            writes: op.writes.clone(),
            declares: op.declares.clone(),
            role: op.role,
            calls: op
                .calls
                .iter()
                .filter(|k| k.base.is_none() || k.base.as_deref() == Some("this"))
                .map(|k| (k.name.clone(), k.args.len()))
                .collect(),
        });
    }
    out
}

/// Every (write i, read j, v) with i before j.
pub fn oracle_data_pairs(nodes: &[ONode]) -> BTreeSet<(usize, usize, String)> {
    let mut out = BTreeSet::new();
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            if i >= j {
                continue;
            }
            for v in nodes[i].writes.intersection(&nodes[j].reads) {
                out.insert((i, j, v.clone()));
            }
        }
    }
    out
}

struct Placed {
    first: usize,
    /// one past the last op index in this statement's subtree
    end: usize,
    guards: Vec<usize>,
    posts: Vec<usize>,
    own_end: usize,
    kind: StatementKind,
    ancestors: Vec<usize>,
}

fn place(stmts: &[Statement], counter: &mut usize, ancestors: &mut Vec<usize>, out: &mut Vec<Placed>) {
    for s in stmts {
        let first = *counter;
        let guards: Vec<usize> = s
            .operations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.role == OpRole::Guard)
            .map(|(k, _)| first + k)
            .collect();
        let posts: Vec<usize> = s
            .operations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.role == OpRole::LoopPost)
            .map(|(k, _)| first + k)
            .collect();
        *counter += s.operations.len();
        let own_end = *counter;
        let me = out.len();
        out.push(Placed {
            first,
            end: 0,
            guards,
            posts,
            own_end,
            kind: s.kind,
            ancestors: ancestors.clone(),
        });
        ancestors.push(me);
        place(&s.children, counter, ancestors, out);
        place(&s.alt, counter, ancestors, out);
        ancestors.pop();
        out[me].end = *counter;
    }
}

/// (guard, dependent) pairs: guards of enclosing control statements over
/// nested operations (and loop post-clauses), plus `require`/if-revert
/// guards over every later operation of the function.
pub fn oracle_control_pairs(body: &[Statement], offset: usize) -> BTreeSet<(usize, usize)> {
    let mut placed = Vec::new();
    place(body, &mut 0, &mut Vec::new(), &mut placed);
    let mut out = BTreeSet::new();
    for (si, s) in placed.iter().enumerate() {
        let is_control = matches!(s.kind, StatementKind::Control | StatementKind::IfRevert);
        if is_control {
            for other in &placed {
                if other.ancestors.contains(&si) {
                    for op in other.first..other.own_end {
                        for &g in &s.guards {
                            out.insert((g + offset, op + offset));
                        }
                    }
                }
            }
            for &p in &s.posts {
                for &g in &s.guards {
                    out.insert((g + offset, p + offset));
                }
            }
        }
        if matches!(s.kind, StatementKind::Require | StatementKind::IfRevert) {
            let total = placed.iter().map(|p| p.end).max().unwrap_or(0);
            for op in s.end..total {
                for &g in &s.guards {
                    out.insert((g + offset, op + offset));
                }
            }
        }
    }
    out
}

pub fn param_count(c: Callable<'_>) -> usize {
    c.params().iter().filter(|p| !p.name.is_empty()).count()
}

/// Locals of a callable recomputed from its nodes.
fn oracle_locals(c: Callable<'_>, nodes: &[ONode]) -> BTreeSet<String> {
    let mut l: BTreeSet<String> = nodes.iter().flat_map(|n| n.declares.iter().cloned()).collect();
    l.extend(c.params().iter().map(|p| p.name.clone()));
    if let Callable::Function(f) = c {
        l.extend(f.returns.iter().map(|p| p.name.clone()));
    }
    l
}

/// Names of state variables visible from each contract (own + ancestors by
/// name, recursively).
fn oracle_visible(program: &Program<'_>, c: usize) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut todo = vec![c];
    let mut seen = BTreeSet::new();
    while let Some(x) = todo.pop() {
        if !seen.insert(x) {
            continue;
        }
        let def = program.contract(x);
        out.extend(def.state_vars.iter().map(|v| v.name.clone()));
        for b in &def.inherits {
            for y in 0..program.contract_count() {
                if &program.contract(y).name == b {
                    todo.push(y);
                }
            }
        }
    }
    out
}

/// Callable named `name` anywhere in the program (fixtures use unique names).
pub fn by_name(program: &Program<'_>, name: &str) -> Option<CallableId> {
    program.callables().into_iter().find(|id| program.callable(*id).name() == name)
}

/// State-variable names touched by each callable, closed over calls and
/// applied modifiers by fixpoint iteration.
pub fn oracle_state_vars(program: &Program<'_>) -> BTreeMap<CallableId, BTreeSet<String>> {
    let ids = program.callables();
    let mut touched: BTreeMap<CallableId, BTreeSet<String>> = BTreeMap::new();
    let mut succ: BTreeMap<CallableId, Vec<CallableId>> = BTreeMap::new();
    for id in &ids {
        let c = program.callable(*id);
        let nodes = oracle_nodes(c);
        let locals = oracle_locals(c, &nodes);
        let visible = oracle_visible(program, id.contract);
        let mut direct = BTreeSet::new();
        let mut next = Vec::new();
        for n in &nodes {
            if n.is_param {
                continue;
            }
            for v in n.reads.iter().chain(n.writes.iter()) {
                if visible.contains(v) && !locals.contains(v) {
                    direct.insert(v.clone());
                }
            }
            for (name, _) in &n.calls {
                if let Some(g) = by_name(program, name) {
                    next.push(g);
                }
            }
        }
        if let Callable::Function(f) = c {
            for m in &f.modifiers {
                if let Some(g) = program
                    .callables()
                    .into_iter()
                    .find(|x| program.callable(*x).name() == m.name && matches!(program.callable(*x), Callable::Modifier(_)))
                {
                    next.push(g);
                }
            }
        }
        touched.insert(*id, direct);
        succ.insert(*id, next);
    }
    loop {
        let mut changed = false;
        for id in &ids {
            let mut acc = touched[id].clone();
            for g in &succ[id] {
                acc.extend(touched[g].iter().cloned());
            }
            if acc.len() != touched[id].len() {
                touched.insert(*id, acc);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    touched
}

/// Retained (callable, node) pairs: closure of the operations touching
/// `vars` under backward and forward dependency, with parameter and return
/// links across call sites. Computed by repeated passes over all pairs.
pub fn oracle_slice(program: &Program<'_>, vars: &BTreeSet<String>) -> BTreeSet<(CallableId, usize)> {
    type N = (CallableId, usize);
    let ids = program.callables();
    let mut deps: BTreeSet<(N, N)> = BTreeSet::new(); // (pred, succ)
    let mut param_links: BTreeSet<(N, N)> = BTreeSet::new(); // (call-site, param)
    let mut return_links: BTreeSet<(N, N)> = BTreeSet::new(); // (return op, call-site)
    let mut seeds = BTreeSet::new();
    let mut all_nodes: BTreeMap<CallableId, Vec<ONode>> = BTreeMap::new();
    for id in &ids {
        let c = program.callable(*id);
        let nodes = oracle_nodes(c);
        for (i, j, _) in oracle_data_pairs(&nodes) {
            deps.insert(((*id, i), (*id, j)));
        }
        for (g, d) in oracle_control_pairs(c.body(), param_count(c)) {
            deps.insert(((*id, g), (*id, d)));
        }
        let locals = oracle_locals(c, &nodes);
        let visible = oracle_visible(program, id.contract);
        for (i, n) in nodes.iter().enumerate() {
            if n.is_param {
                continue;
            }
            if n.reads.iter().chain(n.writes.iter()).any(|v| vars.contains(v) && visible.contains(v) && !locals.contains(v)) {
                seeds.insert((*id, i));
            }
        }
        all_nodes.insert(*id, nodes);
    }
    for id in &ids {
        for (i, n) in all_nodes[id].iter().enumerate() {
            for (name, argc) in &n.calls {
                let Some(g) = by_name(program, name) else { continue };
                let gc = program.callable(g);
                for k in 0..param_count(gc).min(*argc) {
                    param_links.insert(((*id, i), (g, k)));
                }
                for (r, rn) in all_nodes[&g].iter().enumerate() {
                    if rn.role == OpRole::Return {
                        return_links.insert(((g, r), (*id, i)));
                    }
                }
            }
        }
    }
    let mut back = seeds.clone();
    loop {
        let before = back.len();
        for (a, b) in &deps {
            if back.contains(b) {
                back.insert(*a);
            }
        }
        for (site, param) in &param_links {
            if back.contains(param) {
                back.insert(*site);
            }
        }
        if back.len() == before {
            break;
        }
    }
    let mut fwd = seeds;
    loop {
        let before = fwd.len();
        for (a, b) in &deps {
            if fwd.contains(a) {
                fwd.insert(*b);
            }
        }
        for (ret, site) in &return_links {
            if fwd.contains(ret) {
                fwd.insert(*site);
            }
        }
        if fwd.len() == before {
            break;
        }
    }
    back.extend(fwd);
    back.retain(|(id, n)| !all_nodes[id][*n].is_param);
    back
}

pub struct GateCase {
    pub name: String,
    pub original: SourceUnit,
    pub patched: SourceUnit,
    pub target: acrepair_core::gate::Target,
    /// `None` when every rule must pass.
    pub fails: Option<acrepair_core::gate::Rule>,
    pub warns: Option<acrepair_core::gate::Rule>,
}

/// Gate fixtures: each case file is a patched copy of a base contract with
/// `// original:`, `// target:`, `// expect:` and optional `// warn:` headers.
pub fn gate_cases() -> Vec<GateCase> {
    use acrepair_core::gate::{Rule, Target};
    let dir = fixtures().join("gate/cases");
    let mut names: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".sol"))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|n| {
            let patched_text = std::fs::read_to_string(dir.join(&n)).unwrap();
            let probe = parse_source(&n, &patched_text);
            let base = header(&probe, "original").unwrap();
            let original_text = std::fs::read_to_string(fixtures().join("gate/base").join(&base)).unwrap();
            let expect = header(&probe, "expect").unwrap();
            let fails = match expect.strip_prefix("fail ") {
                Some(r) => Some(Rule::parse(r.trim()).unwrap_or_else(|| panic!("{n}: rule {r}"))),
                None => {
                    assert_eq!(expect, "pass", "{n}");
                    None
                }
            };
            let warns = header(&probe, "warn").map(|r| Rule::parse(&r).unwrap());
            GateCase {
                name: n.trim_end_matches(".sol").to_string(),
                original: parse_source(&base, &original_text),
                patched: parse_source(&base, &patched_text),
                target: Target::parse(&header(&probe, "target").unwrap()),
                fails,
                warns,
            }
        })
        .collect()
}

pub mod cases {
    //! Authored case directories. `replies.json` holds the model replies in
    //! call order; blessing runs the case against them and records the
    //! exchange as `transcript.jsonl`. `expected/` holds the hand-written
    //! patched sources from which `golden.diff` is produced with GNU diff.

    use acrepair_core::bench::{load_case_dir, CaseDir, GOLDEN_FILE};
    use acrepair_core::llm::{LlmSession, PriceProfile, ScriptedProvider};
    use acrepair_core::rbac::{Taxonomy, TaxonomyStore};
    use acrepair_core::repair::{run_case, CaseReport, FollowVerdict, Pipeline, RepairSettings};
    use serde_json::Value;
    use std::path::{Path, PathBuf};
    use std::sync::Arc;

    pub fn root(kind: &str) -> PathBuf {
        super::fixtures().join(kind)
    }

    pub fn replies(dir: &Path) -> Vec<String> {
        let text = std::fs::read_to_string(dir.join("replies.json")).unwrap();
        let v: Vec<Value> = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", dir.display()));
        v.into_iter()
            .map(|r| match r {
                Value::String(s) => s,
                other => other.to_string(),
            })
            .collect()
    }

    /// Runs a case against its scripted replies.
    pub fn run_scripted(cd: &CaseDir, q0_only: bool) -> (CaseReport, LlmSession, Arc<ScriptedProvider>) {
        let provider = Arc::new(ScriptedProvider::new(replies(&cd.dir)));
        let mut session = LlmSession::new(provider.clone(), &cd.case.id, PriceProfile::shipped());
        let store = TaxonomyStore::new(Taxonomy::shipped(), None);
        let settings = RepairSettings::default();
        let report = if q0_only {
            let mut p = Pipeline::new(&cd.case, &mut session, &store, &settings).unwrap();
            p.run_q0().unwrap();
            p.report
        } else {
            run_case(&cd.case, &mut session, &store, &mut FollowVerdict, &settings)
        };
        (report, session, provider)
    }

    fn gnu_diff(dir: &Path, file: &str) -> String {
        let out = std::process::Command::new("diff")
            .arg("-u")
            .arg("--label")
            .arg(format!("a/{file}"))
            .arg("--label")
            .arg(format!("b/{file}"))
            .arg(dir.join(file))
            .arg(dir.join("expected").join(file))
            .output()
            .expect("GNU diff on PATH");
        String::from_utf8(out.stdout).unwrap()
    }

    /// Rewrites `transcript.jsonl` and `golden.diff` of one case directory.
    pub fn bless(dir: &Path, q0_only: bool) {
        let cd = load_case_dir(dir).unwrap();
        let (report, session, provider) = run_scripted(&cd, q0_only);
        assert_eq!(provider.remaining(), 0, "{}: unused replies", cd.name);
        session.transcript.save(&dir.join("transcript.jsonl")).unwrap();
        let expected = dir.join("expected");
        if expected.is_dir() {
            let file = std::fs::read_dir(&expected).unwrap().next().unwrap().unwrap().file_name();
            let golden = gnu_diff(dir, &file.to_string_lossy());
            std::fs::write(dir.join(GOLDEN_FILE), golden).unwrap();
        }
        match &report.q0 {
            Some(q0) if q0_only => eprintln!("{}: {:?}", cd.name, q0.verdict),
            _ => eprintln!("{}: {:?}", cd.name, report.outcome),
        }
    }
}
