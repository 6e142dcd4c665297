use super::{AcContextGraph, AcgEdge, AcgEdgeKind, AcgNode, AcgNodeKind, Access};
use crate::error::{Error, Result};
use crate::graphs::{
    state_vars_touched, Analysis, Callable, CallableId, CallableKind, PdgNodeKind, StateVarId,
};
use crate::solidity::{DeclKind, OpRole, SourceUnit};
use std::collections::{BTreeMap, BTreeSet, VecDeque};

/// RBAC elements named by the caller, resolved against the program.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SeedSet {
    pub modifiers: BTreeSet<CallableId>,
    pub functions: BTreeSet<CallableId>,
    pub state_vars: BTreeSet<StateVarId>,
}

/// Resolves element names (`onlyOwner`, `owner`, `onlyRole(MINTER_ROLE)`)
/// from the point of view of `fvul`'s contract, falling back to any
/// contract in the program. Unknown names are ignored.
pub fn resolve_seeds(analysis: &Analysis<'_>, fvul: CallableId, names: &[String]) -> SeedSet {
    let p = &analysis.program;
    let mut seeds = SeedSet::default();
    for raw in names {
        let name = raw.split('(').next().unwrap_or(raw).trim();
        let name = name.rsplit('.').next().unwrap_or(name);
        if name.is_empty() {
            continue;
        }
        if let Some(m) = p.resolve_modifier(fvul.contract, name) {
            seeds.modifiers.insert(m);
            continue;
        }
        if let Some(v) = p.resolve_state_var(fvul.contract, name) {
            seeds.state_vars.insert(v);
            continue;
        }
        if let Some(f) = p.resolve_function(fvul.contract, name, None) {
            seeds.functions.insert(f);
            continue;
        }
        for c in 0..p.contract_count() {
            let def = p.contract(c);
            if let Some(index) = def.modifiers.iter().position(|m| m.name == name) {
                seeds.modifiers.insert(CallableId {
                    contract: c,
                    kind: CallableKind::Modifier,
                    index,
                });
                break;
            }
            if let Some(index) = def.state_vars.iter().position(|v| v.name == name) {
                seeds.state_vars.insert(StateVarId { contract: c, index });
                break;
            }
            if let Some(index) = def.functions.iter().position(|f| f.name == name) {
                seeds.functions.insert(CallableId {
                    contract: c,
                    kind: CallableKind::Function,
                    index,
                });
                break;
            }
        }
    }
    seeds
}

/// Retained PDG nodes per callable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SliceResult {
    pub retained: BTreeSet<(CallableId, usize)>,
}

impl SliceResult {
    pub fn callables(&self) -> BTreeSet<CallableId> {
        self.retained.iter().map(|(c, _)| *c).collect()
    }
}

/// State variables accessed by PDG node `n` of `id`, split into reads and
/// writes, ignoring names shadowed by locals.
fn node_state_access(
    analysis: &Analysis<'_>,
    id: CallableId,
    n: usize,
    locals: &BTreeSet<String>,
    visible: &BTreeMap<&str, StateVarId>,
) -> (BTreeSet<StateVarId>, BTreeSet<StateVarId>) {
    let node = &analysis.pdg(id).nodes[n];
    let pick = |names: &BTreeSet<String>| {
        names
            .iter()
            .filter(|v| !locals.contains(*v))
            .filter_map(|v| visible.get(v.as_str()).copied())
            .collect::<BTreeSet<_>>()
    };
    if node.kind == PdgNodeKind::Param {
        return Default::default();
    }
    (pick(&node.reads), pick(&node.writes))
}

/// Innermost operation node of `caller` containing the call site.
fn call_site_node(analysis: &Analysis<'_>, caller: CallableId, site: crate::solidity::Span) -> Option<usize> {
    let pdg = analysis.pdg(caller);
    pdg.nodes_containing(site).min_by_key(|&n| pdg.nodes[n].span.len())
}

/// Backward and forward dependency closure, over every callable, of the
/// operations touching `vars`. Backward steps follow data and control
/// predecessors and jump from a parameter to the operations at its call
/// sites; forward steps follow successors and jump from a `return` to the
/// operations receiving the value.
pub fn slice_operations(analysis: &Analysis<'_>, vars: &BTreeSet<StateVarId>) -> SliceResult {
    let p = &analysis.program;
    let mut seeds = Vec::new();
    for id in p.callables() {
        let locals = p.callable(id).locals();
        let visible = p.visible_state_vars(id.contract);
        for n in 0..analysis.pdg(id).nodes.len() {
            let (r, w) = node_state_access(analysis, id, n, &locals, &visible);
            if r.iter().chain(w.iter()).any(|v| vars.contains(v)) {
                seeds.push((id, n));
            }
        }
    }

    let mut backward: BTreeSet<(CallableId, usize)> = seeds.iter().copied().collect();
    let mut queue: VecDeque<(CallableId, usize)> = seeds.iter().copied().collect();
    while let Some((id, n)) = queue.pop_front() {
        let pdg = analysis.pdg(id);
        let mut next: Vec<(CallableId, usize)> = pdg
            .data_preds(n)
            .chain(pdg.control_preds(n))
            .map(|m| (id, m))
            .collect();
        let node = &pdg.nodes[n];
        if node.kind == PdgNodeKind::Param {
            for e in analysis.cg.callers(id) {
                if e.arg_bindings.iter().any(|(_, param)| node.writes.contains(param)) {
                    if let Some(site) = call_site_node(analysis, e.caller, e.call_site) {
                        next.push((e.caller, site));
                    }
                }
            }
        }
        for x in next {
            if backward.insert(x) {
                queue.push_back(x);
            }
        }
    }

    let mut forward: BTreeSet<(CallableId, usize)> = seeds.iter().copied().collect();
    let mut queue: VecDeque<(CallableId, usize)> = seeds.into_iter().collect();
    while let Some((id, n)) = queue.pop_front() {
        let pdg = analysis.pdg(id);
        let mut next: Vec<(CallableId, usize)> = pdg
            .data_succs(n)
            .chain(pdg.control_succs(n))
            .map(|m| (id, m))
            .collect();
        if pdg.nodes[n].role == OpRole::Return {
            for e in analysis.cg.callers(id) {
                if let Some(site) = call_site_node(analysis, e.caller, e.call_site) {
                    next.push((e.caller, site));
                }
            }
        }
        for x in next {
            if forward.insert(x) {
                queue.push_back(x);
            }
        }
    }

    let mut retained: BTreeSet<(CallableId, usize)> = backward;
    retained.extend(forward);
    retained.retain(|(id, n)| analysis.pdg(*id).nodes[*n].kind == PdgNodeKind::Op);
    SliceResult { retained }
}

fn lines_text(unit: &SourceUnit, lines: &BTreeSet<usize>) -> Vec<String> {
    lines.iter().map(|l| unit.line_text(*l).to_string()).collect()
}

/// Builds the graph rooted at `fvul`. `seed_names` are RBAC element names
/// (modifiers, state variables, functions) to include with their bodies.
pub fn build_acg(analysis: &Analysis<'_>, fvul: CallableId, seed_names: &[String]) -> Result<AcContextGraph> {
    let p = &analysis.program;
    let cg = &analysis.cg;
    let root_callable = p.callable(fvul);
    match root_callable {
        Callable::Function(f) if f.has_body => {}
        _ => return Err(Error::EmptyTarget(root_callable.name().to_string())),
    }
    let seeds = resolve_seeds(analysis, fvul, seed_names);

    // F_callee: everything fvul reaches through calls and applied modifiers
    let mut reach = BTreeSet::new();
    let mut stack = vec![fvul];
    while let Some(x) = stack.pop() {
        if reach.insert(x) {
            stack.extend(cg.callees(x));
            stack.extend(cg.modifiers_of(x));
        }
    }

    let mut v_state = state_vars_touched(p, cg, fvul);
    v_state.extend(seeds.state_vars.iter().copied());
    for s in seeds.modifiers.iter().chain(seeds.functions.iter()) {
        v_state.extend(state_vars_touched(p, cg, *s));
    }

    let slice = slice_operations(analysis, &v_state);

    let mut functions: BTreeSet<CallableId> = BTreeSet::new();
    let mut modifiers: BTreeSet<CallableId> = BTreeSet::new();
    let add = |id: CallableId, functions: &mut BTreeSet<CallableId>, modifiers: &mut BTreeSet<CallableId>| match id.kind {
        CallableKind::Function => functions.insert(id),
        CallableKind::Modifier => modifiers.insert(id),
    };
    for id in reach.iter().chain(seeds.modifiers.iter()).chain(seeds.functions.iter()) {
        add(*id, &mut functions, &mut modifiers);
    }
    for id in slice.callables() {
        add(id, &mut functions, &mut modifiers);
    }
    // modifiers applied to in-graph functions, and what seed modifiers call
    for f in functions.clone() {
        for m in cg.modifiers_of(f) {
            modifiers.insert(m);
        }
    }
    for m in modifiers.clone() {
        for c in cg.transitive_callees(m) {
            add(c, &mut functions, &mut modifiers);
        }
    }

    // retained lines per callable
    let mut retained_lines: BTreeMap<CallableId, BTreeSet<usize>> = BTreeMap::new();
    let mut var_lines: BTreeMap<StateVarId, BTreeMap<usize, BTreeSet<usize>>> = BTreeMap::new();
    for (id, n) in &slice.retained {
        let unit = p.unit_of(id.contract);
        let node = &analysis.pdg(*id).nodes[*n];
        let lines: Vec<usize> = unit.lines_of(node.span).collect();
        retained_lines.entry(*id).or_default().extend(lines.iter().copied());
        let locals = p.callable(*id).locals();
        let visible = p.visible_state_vars(id.contract);
        let (r, w) = node_state_access(analysis, *id, *n, &locals, &visible);
        for v in r.union(&w) {
            if v_state.contains(v) {
                var_lines
                    .entry(*v)
                    .or_default()
                    .entry(p.unit_index(id.contract))
                    .or_default()
                    .extend(lines.iter().copied());
            }
        }
    }

    let mut nodes: Vec<AcgNode> = Vec::new();
    let mut callable_node: BTreeMap<CallableId, usize> = BTreeMap::new();
    let mut var_node: BTreeMap<StateVarId, usize> = BTreeMap::new();
    for id in functions.iter() {
        let unit = p.unit_of(id.contract);
        let c = p.callable(*id);
        let body = retained_lines
            .get(id)
            .map(|l| lines_text(unit, l))
            .unwrap_or_default();
        callable_node.insert(*id, nodes.len());
        nodes.push(AcgNode {
            kind: AcgNodeKind::Function,
            name: c.name().to_string(),
            contract: p.contract(id.contract).name.clone(),
            signature: c.signature_text().to_string(),
            body,
        });
    }
    for id in modifiers.iter() {
        let unit = p.unit_of(id.contract);
        let c = p.callable(*id);
        let Callable::Modifier(m) = c else { continue };
        let sig_last = unit.line_of(m.signature_span.end.saturating_sub(1).max(m.signature_span.start));
        let all: BTreeSet<usize> = unit.lines_of(m.span).collect();
        let after: BTreeSet<usize> = all.iter().copied().filter(|l| *l > sig_last).collect();
        let lines = if after.is_empty() { all } else { after };
        callable_node.insert(*id, nodes.len());
        nodes.push(AcgNode {
            kind: AcgNodeKind::Modifier,
            name: m.name.clone(),
            contract: p.contract(id.contract).name.clone(),
            signature: m.signature_text.clone(),
            body: lines_text(unit, &lines),
        });
    }
    for v in v_state.iter() {
        let def = p.state_var(*v);
        let unit = p.unit_of(v.contract);
        let mut body = Vec::new();
        if let Some(per_unit) = var_lines.get(v) {
            for (u, lines) in per_unit {
                body.extend(lines_text(&p.units[*u], lines));
            }
        }
        var_node.insert(*v, nodes.len());
        nodes.push(AcgNode {
            kind: AcgNodeKind::StateVar,
            name: def.name.clone(),
            contract: p.contract(v.contract).name.clone(),
            signature: unit.text(def.span).to_string(),
            body,
        });
    }

    let mut edges: BTreeSet<AcgEdge> = BTreeSet::new();
    for e in &cg.edges {
        if let (Some(&a), Some(&b)) = (callable_node.get(&e.caller), callable_node.get(&e.callee)) {
            if a != b {
                edges.insert(AcgEdge {
                    src: a,
                    dst: b,
                    kind: AcgEdgeKind::Invocation,
                    access: None,
                });
            }
        }
    }
    for u in &cg.modifier_uses {
        if let (Some(&a), Some(&b)) = (callable_node.get(&u.function), callable_node.get(&u.modifier)) {
            edges.insert(AcgEdge {
                src: a,
                dst: b,
                kind: AcgEdgeKind::Modifying,
                access: None,
            });
        }
    }
    for (id, &node) in &callable_node {
        let locals = p.callable(*id).locals();
        let visible = p.visible_state_vars(id.contract);
        let mut reads = BTreeSet::new();
        let mut writes = BTreeSet::new();
        for n in 0..analysis.pdg(*id).nodes.len() {
            let (r, w) = node_state_access(analysis, *id, n, &locals, &visible);
            reads.extend(r);
            writes.extend(w);
        }
        for (v, &vn) in &var_node {
            let access = match (reads.contains(v), writes.contains(v)) {
                (true, true) => Access::ReadsWrites,
                (true, false) => Access::Reads,
                (false, true) => Access::Writes,
                (false, false) => continue,
            };
            edges.insert(AcgEdge {
                src: node,
                dst: vn,
                kind: AcgEdgeKind::ReadWrite,
                access: Some(access),
            });
        }
    }

    // comments on declarations already in the graph
    for c in 0..p.contract_count() {
        let def = p.contract(c);
        let unit = p.unit_of(c);
        for cm in &def.comments {
            let Some(target) = &cm.attached_to else { continue };
            let kind = match target.kind {
                DeclKind::Function => AcgNodeKind::Function,
                DeclKind::Modifier => AcgNodeKind::Modifier,
                DeclKind::StateVar => AcgNodeKind::StateVar,
                _ => continue,
            };
            let Some(dst) = nodes
                .iter()
                .position(|n| n.kind == kind && n.name == target.name && n.contract == def.name)
            else {
                continue;
            };
            let line = unit.line_of(cm.span.start);
            let lines: BTreeSet<usize> = unit.lines_of(cm.span).collect();
            let idx = nodes.len();
            nodes.push(AcgNode {
                kind: AcgNodeKind::Comment,
                name: format!("{}@{}", target.name, line + 1),
                contract: def.name.clone(),
                signature: cm.text.clone(),
                body: lines_text(unit, &lines),
            });
            edges.insert(AcgEdge {
                src: idx,
                dst,
                kind: AcgEdgeKind::Comment,
                access: None,
            });
        }
    }

    let root = callable_node[&fvul];
    Ok(canonicalize(nodes, edges.into_iter().collect(), root))
}

/// Sorts nodes by (kind, contract, name) and remaps edges.
fn canonicalize(nodes: Vec<AcgNode>, edges: Vec<AcgEdge>, root: usize) -> AcContextGraph {
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&nodes[a], &nodes[b]);
        (x.kind, &x.contract, &x.name, &x.signature).cmp(&(y.kind, &y.contract, &y.name, &y.signature))
    });
    let mut remap = vec![0; nodes.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let mut slots: Vec<Option<AcgNode>> = nodes.into_iter().map(Some).collect();
    let nodes: Vec<AcgNode> = order.iter().map(|&o| slots[o].take().expect("each node moved once")).collect();
    let mut edges: Vec<AcgEdge> = edges
        .into_iter()
        .map(|e| AcgEdge {
            src: remap[e.src],
            dst: remap[e.dst],
            ..e
        })
        .collect();
    edges.sort();
    edges.dedup_by(|a, b| a.src == b.src && a.dst == b.dst && a.kind == b.kind);
    AcContextGraph {
        nodes,
        edges,
        root: remap[root],
    }
}
