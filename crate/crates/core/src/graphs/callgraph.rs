use super::{CallableId, CallableKind, Program};
use crate::solidity::{is_builtin_function, is_elementary_type, CallExpr, CallKind, Span};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallEdge {
    pub caller: CallableId,
    pub callee: CallableId,
    pub call_site: Span,
    /// (argument expression, callee parameter name)
    pub arg_bindings: Vec<(String, String)>,
}

/// A call that does not resolve to any function in the program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCall {
    pub caller: CallableId,
    pub target: String,
    pub call_site: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierUse {
    pub function: CallableId,
    pub modifier: CallableId,
    pub site: Span,
    pub arg_bindings: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CallGraph {
    pub nodes: Vec<CallableId>,
    pub edges: Vec<CallEdge>,
    pub external: Vec<ExternalCall>,
    pub modifier_uses: Vec<ModifierUse>,
}

impl CallGraph {
    pub fn callees(&self, id: CallableId) -> impl Iterator<Item = CallableId> + '_ {
        self.edges.iter().filter(move |e| e.caller == id).map(|e| e.callee)
    }

    pub fn callers(&self, id: CallableId) -> impl Iterator<Item = &CallEdge> + '_ {
        self.edges.iter().filter(move |e| e.callee == id)
    }

    pub fn edges_from(&self, id: CallableId) -> impl Iterator<Item = &CallEdge> + '_ {
        self.edges.iter().filter(move |e| e.caller == id)
    }

    pub fn modifiers_of(&self, id: CallableId) -> impl Iterator<Item = CallableId> + '_ {
        self.modifier_uses
            .iter()
            .filter(move |m| m.function == id)
            .map(|m| m.modifier)
    }

    pub fn functions_using(&self, modifier: CallableId) -> impl Iterator<Item = CallableId> + '_ {
        self.modifier_uses
            .iter()
            .filter(move |m| m.modifier == modifier)
            .map(|m| m.function)
    }

    /// Every callable reachable from `id` through call edges, excluding `id`
    /// unless it is recursive.
    pub fn transitive_callees(&self, id: CallableId) -> BTreeSet<CallableId> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<CallableId> = self.callees(id).collect();
        while let Some(x) = stack.pop() {
            if out.insert(x) {
                stack.extend(self.callees(x));
            }
        }
        out
    }
}

fn bindings(program: &Program<'_>, callee: CallableId, args: &[String]) -> Vec<(String, String)> {
    program
        .callable(callee)
        .params()
        .iter()
        .zip(args)
        .filter(|(p, _)| !p.name.is_empty())
        .map(|(p, a)| (a.clone(), p.name.clone()))
        .collect()
}

enum Resolution {
    Internal(CallableId, Vec<String>),
    External,
    NotACall,
}

fn resolve(
    program: &Program<'_>,
    types: &BTreeSet<&str>,
    from: usize,
    call: &CallExpr,
    locals: &BTreeSet<String>,
) -> Resolution {
    if call.kind != CallKind::Normal {
        return Resolution::NotACall;
    }
    let arity = Some(call.args.len());
    match call.base.as_deref() {
        None => {
            if is_builtin_function(&call.name) || types.contains(call.name.as_str()) {
                return Resolution::NotACall;
            }
            match program.resolve_function(from, &call.name, arity) {
                Some(id) => Resolution::Internal(id, call.args.clone()),
                None => Resolution::External,
            }
        }
        Some(base) => {
            let member_of_root = call.path.matches('.').count() == 1;
            if base == "abi" || is_elementary_type(base) {
                return Resolution::NotACall;
            }
            if member_of_root && base == "super" {
                let lin = program.linearization(from);
                return match program.resolve_in(&lin[1.min(lin.len())..], &call.name, arity) {
                    Some(id) => Resolution::Internal(id, call.args.clone()),
                    None => Resolution::External,
                };
            }
            if member_of_root && base == "this" {
                return match program.resolve_function(from, &call.name, arity) {
                    Some(id) => Resolution::Internal(id, call.args.clone()),
                    None => Resolution::External,
                };
            }
            if member_of_root && !locals.contains(base) {
                if let Some(c) = program.find_contract(base, Some(from)) {
                    return match program.resolve_function(c, &call.name, arity) {
                        Some(id) => Resolution::Internal(id, call.args.clone()),
                        None => Resolution::External,
                    };
                }
            }
            if matches!(call.name.as_str(), "push" | "pop") {
                return Resolution::NotACall;
            }
            // `using L for T`: x.f(a) binds to L.f(x, a)
            let mut args = vec![call.path[..call.path.len() - call.name.len() - 1].to_string()];
            args.extend(call.args.iter().cloned());
            for c in 0..program.contract_count() {
                if program.contract(c).kind != crate::solidity::ContractKind::Library {
                    continue;
                }
                if let Some(id) = program.resolve_in(&[c], &call.name, Some(args.len())) {
                    if program.callable(id).params().len() == args.len() {
                        return Resolution::Internal(id, args);
                    }
                }
            }
            Resolution::External
        }
    }
}

pub fn build_call_graph(program: &Program<'_>) -> CallGraph {
    let mut cg = CallGraph {
        nodes: program.callables(),
        ..CallGraph::default()
    };
    let types = program.type_names();
    for id in program.callables() {
        let callable = program.callable(id);
        let locals = callable.locals();
        for op in callable.operations() {
            for call in &op.calls {
                match resolve(program, &types, id.contract, call, &locals) {
                    Resolution::Internal(callee, args) => cg.edges.push(CallEdge {
                        caller: id,
                        callee,
                        call_site: call.span,
                        arg_bindings: bindings(program, callee, &args),
                    }),
                    Resolution::External => cg.external.push(ExternalCall {
                        caller: id,
                        target: call.path.clone(),
                        call_site: call.span,
                    }),
                    Resolution::NotACall => {}
                }
            }
        }
        if let (CallableKind::Function, crate::graphs::Callable::Function(f)) = (id.kind, callable) {
            for inv in &f.modifiers {
                if let Some(m) = program.resolve_modifier(id.contract, &inv.name) {
                    cg.modifier_uses.push(ModifierUse {
                        function: id,
                        modifier: m,
                        site: inv.span,
                        arg_bindings: bindings(program, m, &inv.args),
                    });
                }
            }
        }
    }
    cg
}
