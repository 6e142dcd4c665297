//! Call graph, per-function program dependency graphs and def-use chains
//! over parsed source units. Resolution is purely name-based.

mod callgraph;
mod dump;
mod pdg;

pub use callgraph::{build_call_graph, CallEdge, CallGraph, ExternalCall, ModifierUse};
pub use dump::{dump_call_graph, dump_pdg};
pub use pdg::{build_pdg, def_use_chains, DataEdge, DefUseChain, Pdg, PdgNode, PdgNodeKind};

use crate::solidity::{
    flatten_ops, ContractDef, FunctionDef, ModifierDef, Operation, Param, SourceUnit, Statement,
    SNIPPET_CONTRACT,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallableKind {
    Function,
    Modifier,
}

/// A function or modifier, addressed by program-wide contract index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CallableId {
    pub contract: usize,
    pub kind: CallableKind,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StateVarId {
    pub contract: usize,
    pub index: usize,
}

#[derive(Debug, Clone, Copy)]
pub enum Callable<'a> {
    Function(&'a FunctionDef),
    Modifier(&'a ModifierDef),
}

impl<'a> Callable<'a> {
    pub fn name(&self) -> &'a str {
        match self {
            Callable::Function(f) => &f.name,
            Callable::Modifier(m) => &m.name,
        }
    }

    pub fn params(&self) -> &'a [Param] {
        match self {
            Callable::Function(f) => &f.params,
            Callable::Modifier(m) => &m.params,
        }
    }

    pub fn body(&self) -> &'a [Statement] {
        match self {
            Callable::Function(f) => &f.body,
            Callable::Modifier(m) => &m.body,
        }
    }

    pub fn operations(&self) -> Vec<&'a Operation> {
        flatten_ops(self.body())
    }

    pub fn signature_text(&self) -> &'a str {
        match self {
            Callable::Function(f) => &f.signature_text,
            Callable::Modifier(m) => &m.signature_text,
        }
    }

    pub fn span(&self) -> crate::solidity::Span {
        match self {
            Callable::Function(f) => f.span,
            Callable::Modifier(m) => m.span,
        }
    }

    /// Parameters, named returns and declared locals.
    pub fn locals(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self
            .params()
            .iter()
            .filter(|p| !p.name.is_empty())
            .map(|p| p.name.clone())
            .collect();
        if let Callable::Function(f) = self {
            out.extend(f.returns.iter().filter(|p| !p.name.is_empty()).map(|p| p.name.clone()));
        }
        for op in self.operations() {
            out.extend(op.declares.iter().cloned());
        }
        out
    }
}

/// Program-wide index over every contract in a set of units.
#[derive(Debug)]
pub struct Program<'a> {
    pub units: &'a [SourceUnit],
    /// (unit, contract index within unit)
    contracts: Vec<(usize, usize)>,
    by_name: HashMap<&'a str, Vec<usize>>,
    linearizations: Vec<Vec<usize>>,
}

impl<'a> Program<'a> {
    pub fn new(units: &'a [SourceUnit]) -> Self {
        let mut contracts = Vec::new();
        let mut by_name: HashMap<&str, Vec<usize>> = HashMap::new();
        for (u, unit) in units.iter().enumerate() {
            for (c, def) in unit.contracts.iter().enumerate() {
                by_name.entry(def.name.as_str()).or_default().push(contracts.len());
                contracts.push((u, c));
            }
        }
        let mut p = Program {
            units,
            contracts,
            by_name,
            linearizations: Vec::new(),
        };
        p.linearizations = (0..p.contracts.len()).map(|c| p.compute_linearization(c)).collect();
        p
    }

    pub fn contract_count(&self) -> usize {
        self.contracts.len()
    }

    pub fn contract(&self, c: usize) -> &'a ContractDef {
        let (u, i) = self.contracts[c];
        &self.units[u].contracts[i]
    }

    pub fn unit_of(&self, c: usize) -> &'a SourceUnit {
        &self.units[self.contracts[c].0]
    }

    pub fn unit_index(&self, c: usize) -> usize {
        self.contracts[c].0
    }

    /// Contract named `name`, preferring one in the same unit as `near`.
    pub fn find_contract(&self, name: &str, near: Option<usize>) -> Option<usize> {
        let cands = self.by_name.get(name)?;
        if let Some(n) = near {
            let unit = self.unit_index(n);
            if let Some(c) = cands.iter().find(|c| self.unit_index(**c) == unit) {
                return Some(*c);
            }
        }
        cands.first().copied()
    }

    pub fn is_contract_name(&self, name: &str) -> bool {
        self.by_name.contains_key(name)
    }

    /// Names of user-defined types (contracts, structs, enums, events,
    /// errors) anywhere in the program.
    pub fn type_names(&self) -> BTreeSet<&'a str> {
        let mut out = BTreeSet::new();
        for c in 0..self.contracts.len() {
            let def = self.contract(c);
            if !def.synthetic {
                out.insert(def.name.as_str());
            }
            out.extend(def.other_decls.iter().map(|o| o.name.as_str()));
        }
        out
    }

    /// `c` followed by its ancestors, most derived first.
    pub fn linearization(&self, c: usize) -> &[usize] {
        &self.linearizations[c]
    }

    fn compute_linearization(&self, c: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut stack = vec![c];
        // depth-first, later bases first so they override earlier ones
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            out.push(x);
            let def = self.contract(x);
            for base in def.inherits.iter() {
                let short = base.rsplit('.').next().unwrap_or(base);
                if let Some(b) = self.find_contract(short, Some(x)) {
                    if !seen.contains(&b) {
                        stack.push(b);
                    }
                }
            }
        }
        // snippet declarations see the contracts of their own unit
        if self.contract(c).synthetic {
            let unit = self.unit_index(c);
            for other in 0..self.contracts.len() {
                if self.unit_index(other) == unit && !out.contains(&other) {
                    out.push(other);
                }
            }
        }
        out
    }

    pub fn callable(&self, id: CallableId) -> Callable<'a> {
        let c = self.contract(id.contract);
        match id.kind {
            CallableKind::Function => Callable::Function(&c.functions[id.index]),
            CallableKind::Modifier => Callable::Modifier(&c.modifiers[id.index]),
        }
    }

    pub fn state_var(&self, id: StateVarId) -> &'a crate::solidity::StateVarDef {
        &self.contract(id.contract).state_vars[id.index]
    }

    pub fn qualified_name(&self, id: CallableId) -> String {
        format!("{}.{}", self.contract(id.contract).name, self.callable(id).name())
    }

    pub fn state_var_name(&self, id: StateVarId) -> String {
        format!("{}.{}", self.contract(id.contract).name, self.state_var(id).name)
    }

    pub fn callables(&self) -> Vec<CallableId> {
        let mut out = Vec::new();
        for c in 0..self.contracts.len() {
            let def = self.contract(c);
            for index in 0..def.functions.len() {
                out.push(CallableId {
                    contract: c,
                    kind: CallableKind::Function,
                    index,
                });
            }
            for index in 0..def.modifiers.len() {
                out.push(CallableId {
                    contract: c,
                    kind: CallableKind::Modifier,
                    index,
                });
            }
        }
        out
    }

    /// Finds a function by name, optionally inside a named contract. The
    /// synthetic snippet holder is addressed by its `<snippet>` name.
    pub fn find_function(&self, name: &str, contract: Option<&str>) -> Option<CallableId> {
        let name = match name.rsplit_once('.') {
            Some((c, n)) if contract.is_none() => return self.find_function(n, Some(c)),
            _ => name,
        };
        for c in 0..self.contracts.len() {
            let def = self.contract(c);
            if contract.is_some_and(|want| want != def.name) {
                continue;
            }
            if let Some(index) = def.functions.iter().position(|f| f.name == name) {
                return Some(CallableId {
                    contract: c,
                    kind: CallableKind::Function,
                    index,
                });
            }
        }
        None
    }

    /// Resolves a function name visible from contract `from`, preferring a
    /// matching arity among overloads.
    pub fn resolve_function(&self, from: usize, name: &str, arity: Option<usize>) -> Option<CallableId> {
        self.resolve_in(self.linearization(from), name, arity)
    }

    pub(crate) fn resolve_in(&self, order: &[usize], name: &str, arity: Option<usize>) -> Option<CallableId> {
        let mut first = None;
        for &c in order {
            for (index, f) in self.contract(c).functions.iter().enumerate() {
                if f.name != name {
                    continue;
                }
                let id = CallableId {
                    contract: c,
                    kind: CallableKind::Function,
                    index,
                };
                if arity.is_none_or(|a| a == f.params.len()) {
                    return Some(id);
                }
                first.get_or_insert(id);
            }
        }
        first
    }

    pub fn resolve_modifier(&self, from: usize, name: &str) -> Option<CallableId> {
        for &c in self.linearization(from) {
            if let Some(index) = self.contract(c).modifiers.iter().position(|m| m.name == name) {
                return Some(CallableId {
                    contract: c,
                    kind: CallableKind::Modifier,
                    index,
                });
            }
        }
        None
    }

    /// State variables visible from contract `from`, keyed by name; the most
    /// derived declaration wins.
    pub fn visible_state_vars(&self, from: usize) -> BTreeMap<&'a str, StateVarId> {
        let mut out = BTreeMap::new();
        for &c in self.linearization(from) {
            for (index, v) in self.contract(c).state_vars.iter().enumerate() {
                out.entry(v.name.as_str()).or_insert(StateVarId { contract: c, index });
            }
        }
        out
    }

    pub fn resolve_state_var(&self, from: usize, name: &str) -> Option<StateVarId> {
        self.visible_state_vars(from).get(name).copied()
    }

    pub fn is_snippet(&self, c: usize) -> bool {
        self.contract(c).name == SNIPPET_CONTRACT
    }
}

/// State variables read or written by `id`, directly, through applied
/// modifiers, or transitively through resolved callees.
pub fn state_vars_touched(program: &Program<'_>, cg: &CallGraph, id: CallableId) -> BTreeSet<StateVarId> {
    let mut out = BTreeSet::new();
    let mut seen = BTreeSet::new();
    let mut stack = vec![id];
    while let Some(x) = stack.pop() {
        if !seen.insert(x) {
            continue;
        }
        out.extend(direct_state_vars(program, x));
        stack.extend(cg.callees(x));
        stack.extend(cg.modifiers_of(x));
    }
    out
}

/// State variables touched by the operations of `id` itself.
pub fn direct_state_vars(program: &Program<'_>, id: CallableId) -> BTreeSet<StateVarId> {
    let callable = program.callable(id);
    let locals = callable.locals();
    let visible = program.visible_state_vars(id.contract);
    let mut out = BTreeSet::new();
    for op in callable.operations() {
        for name in op.reads.iter().chain(op.writes.iter()) {
            if locals.contains(name) {
                continue;
            }
            if let Some(v) = visible.get(name.as_str()) {
                out.insert(*v);
            }
        }
    }
    out
}

/// Call graph plus one PDG per callable.
#[derive(Debug)]
pub struct Analysis<'a> {
    pub program: Program<'a>,
    pub cg: CallGraph,
    pub pdgs: BTreeMap<CallableId, Pdg>,
}

impl<'a> Analysis<'a> {
    pub fn new(units: &'a [SourceUnit]) -> Self {
        let program = Program::new(units);
        let cg = build_call_graph(&program);
        let pdgs = program
            .callables()
            .into_iter()
            .map(|id| (id, build_pdg(&program, id)))
            .collect();
        Analysis { program, cg, pdgs }
    }

    pub fn pdg(&self, id: CallableId) -> &Pdg {
        &self.pdgs[&id]
    }
}
