use super::GateMessage;
use crate::graphs::{CallableId, CallableKind, Program, StateVarId};
use crate::solidity::{DeclKind, SourceUnit, Span, SNIPPET_CONTRACT};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Contract and function a patch is meant to fix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Target {
    pub contract: String,
    pub function: String,
}

impl Target {
    pub fn new(contract: &str, function: &str) -> Self {
        Target {
            contract: contract.to_string(),
            function: function.to_string(),
        }
    }

    /// `Contract.function`, or a bare function name for snippets.
    pub fn parse(s: &str) -> Target {
        match s.rsplit_once('.') {
            Some((c, f)) => Target::new(c, f),
            None => Target::new(SNIPPET_CONTRACT, s),
        }
    }
}

/// Original and patched programs with the facts every rule shares.
pub struct GateContext<'a> {
    pub original: Program<'a>,
    pub patched: Program<'a>,
    pub target: Target,
    pub orig_contract: Option<usize>,
    pub patched_contract: Option<usize>,
    pub orig_fn: Option<CallableId>,
    pub patched_fn: Option<CallableId>,
    /// Functions and modifiers of the patched program that are new or whose
    /// text differs from the original.
    pub changed: Vec<CallableId>,
    pub new_state_vars: Vec<StateVarId>,
    pub changed_state_vars: Vec<StateVarId>,
    /// Names the patch declares that the original contract did not.
    pub new_names: BTreeSet<String>,
    /// (original unit, patched unit) pairs whose text differs.
    pub changed_units: Vec<(Option<usize>, usize)>,
}

fn resolve_target_contract(p: &Program<'_>, name: &str) -> Option<usize> {
    p.find_contract(name, None).or_else(|| {
        // a snippet target may have been wrapped in a contract by the patch
        (name == SNIPPET_CONTRACT && p.contract_count() > 0).then_some(0)
    })
}

fn function_named(p: &Program<'_>, c: usize, name: &str) -> Option<CallableId> {
    p.contract(c).functions.iter().position(|f| f.name == name).map(|index| CallableId {
        contract: c,
        kind: CallableKind::Function,
        index,
    })
}

impl<'a> GateContext<'a> {
    pub fn new(original: &'a [SourceUnit], patched: &'a [SourceUnit], target: &Target) -> Self {
        let orig = Program::new(original);
        let pat = Program::new(patched);
        let orig_contract = resolve_target_contract(&orig, &target.contract);
        let patched_contract = pat.find_contract(&target.contract, None);
        let orig_fn = orig_contract.and_then(|c| function_named(&orig, c, &target.function));

        let mut changed_units = Vec::new();
        for (pi, pu) in patched.iter().enumerate() {
            let oi = original.iter().position(|o| o.path == pu.path);
            if oi.is_none_or(|oi| original[oi].raw != pu.raw) {
                changed_units.push((oi, pi));
            }
        }

        let mut changed = Vec::new();
        let mut new_state_vars = Vec::new();
        let mut changed_state_vars = Vec::new();
        let mut new_names = BTreeSet::new();
        for c in 0..pat.contract_count() {
            let pu = pat.unit_index(c);
            let Some(&(ou, _)) = changed_units.iter().find(|(_, p)| *p == pu) else {
                continue;
            };
            let pdef = pat.contract(c);
            let punit = pat.unit_of(c);
            let odef = ou.and_then(|ou| original[ou].contract(&pdef.name));
            let ounit = ou.map(|ou| &original[ou]);
            let old_text = |span: Span| ounit.map(|u| u.text(span)).unwrap_or("");
            for (index, f) in pdef.functions.iter().enumerate() {
                let id = CallableId {
                    contract: c,
                    kind: CallableKind::Function,
                    index,
                };
                let same = odef.and_then(|o| {
                    o.functions
                        .iter()
                        .find(|g| g.name == f.name && g.param_types() == f.param_types())
                });
                match same {
                    Some(g) if old_text(g.span) == punit.text(f.span) => {}
                    Some(_) => changed.push(id),
                    None => {
                        if odef.is_none_or(|o| o.function(&f.name).is_none()) {
                            new_names.insert(f.name.clone());
                        }
                        changed.push(id);
                    }
                }
            }
            for (index, m) in pdef.modifiers.iter().enumerate() {
                let id = CallableId {
                    contract: c,
                    kind: CallableKind::Modifier,
                    index,
                };
                match odef.and_then(|o| o.modifier(&m.name)) {
                    Some(g) if old_text(g.span) == punit.text(m.span) => {}
                    Some(_) => changed.push(id),
                    None => {
                        new_names.insert(m.name.clone());
                        changed.push(id);
                    }
                }
            }
            for (index, v) in pdef.state_vars.iter().enumerate() {
                let id = StateVarId { contract: c, index };
                match odef.and_then(|o| o.state_var(&v.name)) {
                    Some(g) if old_text(g.span) == punit.text(v.span) => {}
                    Some(_) => changed_state_vars.push(id),
                    None => {
                        new_names.insert(v.name.clone());
                        new_state_vars.push(id);
                        changed_state_vars.push(id);
                    }
                }
            }
            for d in &pdef.other_decls {
                let existed = odef.is_some_and(|o| o.other_decls.iter().any(|x| x.name == d.name && x.kind == d.kind));
                if !existed {
                    new_names.insert(d.name.clone());
                }
            }
        }

        let patched_fn = patched_contract.and_then(|c| {
            function_named(&pat, c, &target.function).or_else(|| {
                // renamed: the first new function of the target contract
                changed.iter().copied().find(|id| {
                    id.contract == c
                        && id.kind == CallableKind::Function
                        && new_names.contains(pat.callable(*id).name())
                })
            })
        });

        GateContext {
            original: orig,
            patched: pat,
            target: target.clone(),
            orig_contract,
            patched_contract,
            orig_fn,
            patched_fn,
            changed,
            new_state_vars,
            changed_state_vars,
            new_names,
            changed_units,
        }
    }

    /// Callables whose code the patch introduces or modifies, plus the
    /// patched target function.
    pub fn scope(&self) -> Vec<CallableId> {
        let mut out = self.changed.clone();
        if let Some(f) = self.patched_fn {
            if !out.contains(&f) {
                out.insert(0, f);
            }
        }
        out
    }

    /// True when some ancestor of `c` is named but absent from the program
    /// (an import outside the analysed sources), so lookups cannot be
    /// conclusive.
    pub fn open_world(&self, c: usize) -> bool {
        let p = &self.patched;
        p.linearization(c).iter().any(|&x| {
            p.contract(x).inherits.iter().any(|b| {
                let short = b.rsplit('.').next().unwrap_or(b);
                !p.is_contract_name(short)
            })
        })
    }

    /// Names of all ancestors of `c` in the patched program, resolved or not.
    pub fn ancestor_names(&self, c: usize) -> BTreeSet<String> {
        let p = &self.patched;
        let mut out = BTreeSet::new();
        for &x in p.linearization(c) {
            for b in &p.contract(x).inherits {
                out.insert(b.rsplit('.').next().unwrap_or(b).to_string());
            }
        }
        out
    }

    pub fn message(&self, contract: usize, span: Option<Span>, text: String) -> GateMessage {
        let unit = self.patched.unit_of(contract);
        let line = span.filter(|s| s.start <= unit.raw.len()).map(|s| unit.position(s.start).0);
        GateMessage { text, line }
    }

    /// Declared names of the given kinds anywhere in the patched program.
    pub fn declared(&self, kinds: &[DeclKind]) -> BTreeSet<&'a str> {
        let mut out = BTreeSet::new();
        for c in 0..self.patched.contract_count() {
            let def = self.patched.contract(c);
            if kinds.contains(&DeclKind::Contract) && !def.synthetic {
                out.insert(def.name.as_str());
            }
            for d in &def.other_decls {
                if kinds.contains(&d.kind) {
                    out.insert(d.name.as_str());
                }
            }
        }
        out
    }

    pub fn is_type_name(&self, name: &str) -> bool {
        self.declared(&[DeclKind::Contract, DeclKind::Struct, DeclKind::Enum, DeclKind::UserType])
            .contains(name)
    }
}
