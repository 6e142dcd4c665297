use super::context::GateContext;
use super::features::{count_feature, version_features};
use super::{GateMessage, Rule, RuleVerdict};
use crate::graphs::{Callable, CallableId, CallableKind};
use crate::solidity::{
    idents_in, is_ambient, is_builtin_function, is_elementary_type, is_keyword, tokenize, CallKind,
    DeclKind, DiagnosticCode, OpRole, Operation, SemVer, Severity, Span, TokenKind,
};
use regex::Regex;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

#[derive(Default)]
struct Findings {
    messages: Vec<GateMessage>,
    warnings: Vec<GateMessage>,
}

impl Findings {
    fn push(&mut self, soft: bool, m: GateMessage) {
        if soft {
            self.warnings.push(m);
        } else {
            self.messages.push(m);
        }
    }

    fn verdict(self, rule: Rule) -> RuleVerdict {
        RuleVerdict::from_findings(rule, self.messages, self.warnings)
    }
}

fn normalize_type(t: &str) -> String {
    t.split_whitespace().collect::<Vec<_>>().join(" ").replace(" =>", "=>").replace("=> ", "=>")
}

/// Every identifier token in the original sources, comments excluded.
fn original_idents(ctx: &GateContext<'_>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for u in ctx.original.units {
        for t in tokenize(&u.raw, 0) {
            if t.kind == TokenKind::Ident {
                out.insert(t.text(&u.raw).to_string());
            }
        }
    }
    out
}

fn type_idents(type_name: &str) -> Vec<String> {
    idents_in(type_name)
        .into_iter()
        .filter(|s| !is_elementary_type(s) && !is_keyword(s))
        .collect()
}

/// Modifiers, events, errors and user types referenced by patch code must
/// be declared in the contract, its ancestors, the patch itself, or already
/// be referenced by the original sources.
pub fn check_undefined_tokens(ctx: &GateContext<'_>) -> RuleVerdict {
    let p = &ctx.patched;
    let known = original_idents(ctx);
    let events = ctx.declared(&[DeclKind::Event]);
    let errors = ctx.declared(&[DeclKind::Error]);
    let mut f = Findings::default();
    let type_ok = |name: &str| ctx.is_type_name(name) || known.contains(name);

    for id in ctx.scope() {
        let c = id.contract;
        let soft = ctx.open_world(c);
        let callable = p.callable(id);
        let mut types: Vec<(String, Span)> = Vec::new();
        for prm in callable.params() {
            types.extend(type_idents(&prm.type_name).into_iter().map(|t| (t, prm.span)));
        }
        if let Callable::Function(func) = callable {
            for prm in &func.returns {
                types.extend(type_idents(&prm.type_name).into_iter().map(|t| (t, prm.span)));
            }
            for m in &func.modifiers {
                if p.resolve_modifier(c, &m.name).is_some()
                    || ctx.is_type_name(&m.name)
                    || ctx.ancestor_names(c).contains(&m.name)
                {
                    continue;
                }
                f.push(soft, ctx.message(c, Some(m.span), format!("modifier `{}` is not defined", m.name)));
            }
        }
        for t in types {
            if !type_ok(&t.0) {
                f.push(soft, ctx.message(c, Some(t.1), format!("type `{}` is not defined", t.0)));
            }
        }
        for op in callable.operations() {
            for call in &op.calls {
                if call.base.is_some() {
                    continue;
                }
                let (missing, what) = match call.kind {
                    CallKind::Emit => (!events.contains(call.name.as_str()) && !known.contains(&call.name), "event"),
                    CallKind::RevertError => {
                        (!errors.contains(call.name.as_str()) && !known.contains(&call.name), "error")
                    }
                    CallKind::New => (!is_elementary_type(&call.name) && !type_ok(&call.name), "type"),
                    CallKind::Normal => (false, ""),
                };
                if missing {
                    f.push(soft, ctx.message(c, Some(call.span), format!("{what} `{}` is not declared", call.name)));
                }
            }
        }
    }
    for &v in &ctx.changed_state_vars {
        let def = p.state_var(v);
        for t in type_idents(&def.type_name) {
            if !type_ok(&t) {
                f.push(
                    ctx.open_world(v.contract),
                    ctx.message(v.contract, Some(def.span), format!("type `{t}` is not defined")),
                );
            }
        }
    }
    f.verdict(Rule::UndefinedTokens)
}

/// Plain calls in the patched function and in modifiers the patch adds or
/// edits must hit a built-in, a type conversion, or a visible function of
/// matching arity.
pub fn check_infeasible_invocations(ctx: &GateContext<'_>) -> RuleVerdict {
    let p = &ctx.patched;
    let known = original_idents(ctx);
    let events = ctx.declared(&[DeclKind::Event]);
    let mut f = Findings::default();
    let mut scope: Vec<CallableId> = ctx.patched_fn.into_iter().collect();
    scope.extend(ctx.changed.iter().filter(|id| id.kind == CallableKind::Modifier));
    for id in scope {
        let c = id.contract;
        let soft = ctx.open_world(c);
        for op in p.callable(id).operations() {
            for call in &op.calls {
                if call.kind != CallKind::Normal {
                    continue;
                }
                let order: Vec<usize> = match call.base.as_deref() {
                    None | Some("this") => p.linearization(c).to_vec(),
                    Some("super") => p.linearization(c).iter().skip(1).copied().collect(),
                    Some(_) => continue,
                };
                let name = call.name.as_str();
                if call.base.is_none()
                    && (is_builtin_function(name)
                        || ctx.is_type_name(name)
                        || events.contains(name)
                        || (name.starts_with(|ch: char| ch.is_ascii_uppercase()) && known.contains(name)))
                {
                    continue;
                }
                let arities: Vec<usize> = order
                    .iter()
                    .flat_map(|&k| p.contract(k).functions.iter())
                    .filter(|g| g.name == name)
                    .map(|g| g.params.len())
                    .collect();
                let argc = call.args.len();
                if arities.contains(&argc) {
                    continue;
                }
                let msg = if arities.is_empty() {
                    format!("function `{name}` does not exist")
                } else {
                    let mut a = arities.clone();
                    a.sort();
                    a.dedup();
                    let want: Vec<String> = a.iter().map(|n| n.to_string()).collect();
                    format!(
                        "function `{name}` takes {} argument(s) but is called with {argc}",
                        want.join(" or ")
                    )
                };
                f.push(soft && arities.is_empty(), ctx.message(c, Some(call.span), msg));
            }
        }
    }
    f.verdict(Rule::InfeasibleInvocation)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TypeClass {
    Address,
    Other(String),
}

fn classify(type_name: &str) -> Option<TypeClass> {
    let t = normalize_type(type_name);
    if t == "address" || t == "address payable" {
        return Some(TypeClass::Address);
    }
    let base = t.split_whitespace().next().unwrap_or("");
    (is_elementary_type(base) && base != "var" && !t.contains('[')).then(|| TypeClass::Other(t.clone()))
}

/// Value type of `mapping(K => V)` or element type of `T[]`.
fn element_type(type_name: &str) -> Option<String> {
    let t = normalize_type(type_name);
    if let Some(inner) = t.strip_prefix("mapping(").and_then(|s| s.strip_suffix(')')) {
        let (_, v) = inner.split_once("=>")?;
        return Some(v.trim().to_string());
    }
    t.strip_suffix("[]").map(|s| s.trim().to_string())
}

fn local_type(callable: Callable<'_>, name: &str) -> Option<String> {
    let mut params: Vec<&crate::solidity::Param> = callable.params().iter().collect();
    if let Callable::Function(f) = callable {
        params.extend(f.returns.iter());
    }
    if let Some(p) = params.iter().find(|p| p.name == name) {
        return Some(p.type_name.clone());
    }
    for op in callable.operations() {
        if op.declares.contains(name) {
            let head = op.text.split('=').next().unwrap_or("");
            let head = head.trim();
            let ty = head.strip_suffix(name)?.trim();
            let ty = ty
                .trim_end_matches("memory")
                .trim_end_matches("storage")
                .trim_end_matches("calldata")
                .trim();
            return Some(ty.to_string());
        }
    }
    None
}

fn infer(ctx: &GateContext<'_>, id: CallableId, expr: &str) -> Option<TypeClass> {
    let e = expr.trim();
    let e = e.strip_prefix('!').unwrap_or(e).trim();
    if matches!(e, "msg.sender" | "tx.origin" | "_msgSender()" | "address(this)")
        || e.starts_with("address(")
        || e.starts_with("payable(")
    {
        return Some(TypeClass::Address);
    }
    if let Some(hex) = e.strip_prefix("0x") {
        if hex.len() == 40 && hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return Some(TypeClass::Address);
        }
        return Some(TypeClass::Other("uint256".into()));
    }
    if e.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return Some(TypeClass::Other("uint256".into()));
    }
    if e == "true" || e == "false" {
        return Some(TypeClass::Other("bool".into()));
    }
    if e.starts_with('"') || e.starts_with('\'') {
        return Some(TypeClass::Other("string".into()));
    }
    static IDENT: OnceLock<Regex> = OnceLock::new();
    let re = IDENT.get_or_init(|| Regex::new(r"^([A-Za-z_][A-Za-z0-9_]*)((?:\[[^\[\]]*\])*)$").unwrap());
    let caps = re.captures(e)?;
    let name = &caps[1];
    let depth = caps[2].matches('[').count();
    let callable = ctx.patched.callable(id);
    let mut ty = local_type(callable, name).or_else(|| {
        ctx.patched
            .resolve_state_var(id.contract, name)
            .map(|v| ctx.patched.state_var(v).type_name.clone())
    })?;
    for _ in 0..depth {
        ty = element_type(&ty)?;
    }
    classify(&ty)
}

fn comparisons(text: &str) -> Vec<(String, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"([!A-Za-z0-9_.\[\]()]+)\s*(?:==|!=)\s*([A-Za-z0-9_.\[\]()]+)").unwrap()
    });
    re.captures_iter(text)
        .map(|c| (balance(&c[1]), balance(&c[2])))
        .collect()
}

/// Drops unmatched leading `(` and trailing `)` picked up by the operand
/// pattern.
fn balance(s: &str) -> String {
    let mut s = s.to_string();
    loop {
        let open = s.matches('(').count();
        let close = s.matches(')').count();
        if open > close && s.starts_with('(') {
            s.remove(0);
        } else if close > open && s.ends_with(')') {
            s.pop();
        } else {
            return s;
        }
    }
}

fn assignment(text: &str) -> Option<(String, String)> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"^\s*([A-Za-z_][A-Za-z0-9_]*(?:\[[^\]]*\])*)\s*=\s*([^=].*?)\s*;?\s*$").unwrap()
    });
    let c = re.captures(text)?;
    Some((c[1].to_string(), c[2].to_string()))
}

fn describe(t: &TypeClass) -> String {
    match t {
        TypeClass::Address => "address".into(),
        TypeClass::Other(s) => s.clone(),
    }
}

fn mismatch(a: &Option<TypeClass>, b: &Option<TypeClass>) -> bool {
    matches!(
        (a, b),
        (Some(TypeClass::Address), Some(TypeClass::Other(_))) | (Some(TypeClass::Other(_)), Some(TypeClass::Address))
    )
}

/// Variables present in both versions keep their declared type, and patch
/// code never compares or assigns an address against a non-address value.
pub fn check_misused_types(ctx: &GateContext<'_>) -> RuleVerdict {
    let p = &ctx.patched;
    let mut f = Findings::default();
    for &v in &ctx.changed_state_vars {
        let def = p.state_var(v);
        let cname = &p.contract(v.contract).name;
        let Some(oc) = ctx.original.find_contract(cname, None) else { continue };
        let Some(ov) = ctx.original.resolve_state_var(oc, &def.name) else { continue };
        let old = normalize_type(&ctx.original.state_var(ov).type_name);
        let new = normalize_type(&def.type_name);
        if old != new {
            f.messages.push(ctx.message(
                v.contract,
                Some(def.span),
                format!("`{}` changes type from `{old}` to `{new}`", def.name),
            ));
        }
    }
    for id in ctx.scope() {
        for op in p.callable(id).operations() {
            for (l, r) in comparisons(&op.text) {
                let (tl, tr) = (infer(ctx, id, &l), infer(ctx, id, &r));
                if mismatch(&tl, &tr) {
                    f.messages.push(ctx.message(
                        id.contract,
                        Some(op.span),
                        format!(
                            "`{l}` ({}) is compared with `{r}` ({})",
                            describe(tl.as_ref().unwrap()),
                            describe(tr.as_ref().unwrap())
                        ),
                    ));
                }
            }
            if op.declares.is_empty() && !op.writes.is_empty() {
                if let Some((l, r)) = assignment(&op.text) {
                    let (tl, tr) = (infer(ctx, id, &l), infer(ctx, id, &r));
                    if mismatch(&tl, &tr) {
                        f.messages.push(ctx.message(
                            id.contract,
                            Some(op.span),
                            format!(
                                "`{r}` ({}) is assigned to `{l}` ({})",
                                describe(tr.as_ref().unwrap()),
                                describe(tl.as_ref().unwrap())
                            ),
                        ));
                    }
                }
            }
        }
    }
    f.verdict(Rule::MisusedTypes)
}

/// Version-gated constructs the patch introduces must be accepted by every
/// compiler the target pragma admits.
pub fn check_solidity_version(ctx: &GateContext<'_>) -> RuleVerdict {
    let mut f = Findings::default();
    let pragma_unit = ctx
        .orig_contract
        .map(|c| ctx.original.unit_of(c))
        .or_else(|| ctx.original.units.first());
    let pragma = pragma_unit.and_then(|u| u.pragma.clone());
    let Some(pragma) = pragma.filter(|p| !p.is_unconstrained()) else {
        f.warnings.push(GateMessage {
            text: "no usable `pragma solidity`; compiler version unconstrained".into(),
            line: None,
        });
        return f.verdict(Rule::SolidityVersion);
    };
    for &(ou, pu) in &ctx.changed_units {
        let new_src = &ctx.patched.units[pu].raw;
        let old_src = ou.map(|o| ctx.original.units[o].raw.as_str()).unwrap_or("");
        for feat in version_features() {
            let added = count_feature(&feat.name, new_src).unwrap_or(0)
                > count_feature(&feat.name, old_src).unwrap_or(0);
            if !added {
                continue;
            }
            if let Some(since) = feat.since {
                if !pragma.only_admits_within(since, None) {
                    f.messages.push(GateMessage {
                        text: format!(
                            "{} needs solidity >= {since} but `pragma solidity {}` admits older compilers",
                            feat.description, pragma.raw_pragma
                        ),
                        line: None,
                    });
                }
            }
            if let Some(until) = feat.until {
                if !pragma.only_admits_within(SemVer::new(0, 0, 0), Some(until)) {
                    f.messages.push(GateMessage {
                        text: format!(
                            "{} was removed in solidity {until} but `pragma solidity {}` admits newer compilers",
                            feat.description, pragma.raw_pragma
                        ),
                        line: None,
                    });
                }
            }
        }
    }
    f.verdict(Rule::SolidityVersion)
}

fn mentions_sender(op: &Operation) -> bool {
    op.reads.contains("msg.sender") || op.calls.iter().any(|c| c.name == "_msgSender")
}

/// A condition relating the caller to a role: `msg.sender == x`, a role
/// lookup `m[msg.sender]`, or a call taking the caller (`hasRole(R,
/// msg.sender)`).
fn sender_check(op: &Operation) -> bool {
    if !mentions_sender(op) {
        return false;
    }
    let t = op.text.replace(' ', "");
    t.contains("==")
        || t.contains("!=")
        || t.contains("[msg.sender]")
        || t.contains("[_msgSender()]")
        || op.calls.iter().any(|c| {
            c.kind == CallKind::Normal
                && c.name != "_msgSender"
                && c.args.iter().any(|a| a.contains("msg.sender") || a.contains("_msgSender()"))
        })
}

const OZ_CHECKS: &[&str] = &["_checkOwner", "_checkRole", "hasRole"];

fn callable_checks_sender(
    ctx: &GateContext<'_>,
    id: CallableId,
    depth: usize,
    seen: &mut BTreeSet<CallableId>,
    assumed: &mut Vec<String>,
) -> bool {
    let p = &ctx.patched;
    let callable = p.callable(id);
    for op in callable.operations() {
        if matches!(op.role, OpRole::Guard | OpRole::Return) && sender_check(op) {
            return true;
        }
        for call in &op.calls {
            if call.kind != CallKind::Normal || call.base.as_deref().is_some_and(|b| b != "this" && b != "super") {
                continue;
            }
            match p.resolve_function(id.contract, &call.name, Some(call.args.len())) {
                Some(g) if depth < 4 && seen.insert(g) => {
                    if callable_checks_sender(ctx, g, depth + 1, seen, assumed) {
                        return true;
                    }
                }
                Some(_) => {}
                None if OZ_CHECKS.contains(&call.name.as_str()) && ctx.open_world(id.contract) => {
                    assumed.push(call.name.clone());
                    return true;
                }
                None => {}
            }
        }
    }
    if let Callable::Function(f) = callable {
        for m in &f.modifiers {
            match p.resolve_modifier(id.contract, &m.name) {
                Some(mid) => {
                    if seen.insert(mid) && callable_checks_sender(ctx, mid, depth + 1, seen, assumed) {
                        return true;
                    }
                }
                None if m.name.to_ascii_lowercase().starts_with("only") && ctx.open_world(id.contract) => {
                    assumed.push(m.name.clone());
                    return true;
                }
                None => {}
            }
        }
    }
    false
}

/// The patched function, together with the modifiers it applies and the
/// functions it calls, must compare the caller against a role holder.
pub fn check_msg_sender(ctx: &GateContext<'_>) -> RuleVerdict {
    let mut f = Findings::default();
    let Some(id) = ctx.patched_fn else {
        return f.verdict(Rule::MsgSenderCheck);
    };
    let mut seen = BTreeSet::from([id]);
    let mut assumed = Vec::new();
    if callable_checks_sender(ctx, id, 0, &mut seen, &mut assumed) {
        for a in assumed {
            f.warnings.push(GateMessage {
                text: format!("`{a}` is defined outside the analysed sources; assumed to check the caller"),
                line: None,
            });
        }
    } else {
        let func = ctx.patched.callable(id);
        f.messages.push(ctx.message(
            id.contract,
            Some(func.span()),
            format!(
                "`{}` never compares msg.sender with a role holder, directly or through its modifiers",
                func.name()
            ),
        ));
    }
    f.verdict(Rule::MsgSenderCheck)
}

/// Every variable patch code uses is a local declared before the use, a
/// parameter, or a state variable visible in the patched program; state
/// variables the patch introduces must be assigned somewhere.
pub fn check_def_use(ctx: &GateContext<'_>) -> RuleVerdict {
    let p = &ctx.patched;
    let known = original_idents(ctx);
    let events = ctx.declared(&[DeclKind::Event, DeclKind::Error]);
    let mut f = Findings::default();
    let new_vars: BTreeMap<&str, _> = ctx
        .new_state_vars
        .iter()
        .map(|&v| (p.state_var(v).name.as_str(), v))
        .collect();
    let mut used_new: BTreeSet<&str> = BTreeSet::new();

    for id in ctx.scope() {
        let c = id.contract;
        let soft = ctx.open_world(c);
        let callable = p.callable(id);
        let visible = p.visible_state_vars(c);
        let locals = callable.locals();
        let mut declared: BTreeSet<String> = callable
            .params()
            .iter()
            .filter(|x| !x.name.is_empty())
            .map(|x| x.name.clone())
            .collect();
        if let Callable::Function(func) = callable {
            declared.extend(func.returns.iter().filter(|x| !x.name.is_empty()).map(|x| x.name.clone()));
        }
        for name in &declared {
            if visible.contains_key(name.as_str()) {
                f.warnings.push(ctx.message(c, Some(callable.span()), format!("parameter `{name}` shadows a state variable")));
            }
        }
        let function_names: BTreeSet<&str> = p
            .linearization(c)
            .iter()
            .flat_map(|&k| {
                let d = p.contract(k);
                d.functions.iter().map(|g| g.name.as_str()).chain(d.modifiers.iter().map(|m| m.name.as_str()))
            })
            .collect();
        let skip = |name: &str| {
            is_ambient(name)
                || is_keyword(name)
                || is_elementary_type(name)
                || matches!(name, "this" | "super" | "abi" | "msg" | "block" | "tx" | "now")
                || function_names.contains(name)
                || ctx.is_type_name(name)
                || events.contains(name)
                || (name.starts_with(|ch: char| ch.is_ascii_uppercase()) && known.contains(name))
        };
        let mut uses: Vec<(String, Span)> = Vec::new();
        if let Callable::Function(func) = callable {
            for m in &func.modifiers {
                for arg in &m.args {
                    uses.extend(idents_in(arg).into_iter().map(|n| (n, m.span)));
                }
            }
        }
        let mut check = |name: &str, span: Span, declared: &BTreeSet<String>, f: &mut Findings| {
            if skip(name) || declared.contains(name) {
                return;
            }
            if locals.contains(name) && !visible.contains_key(name) {
                f.messages.push(ctx.message(c, Some(span), format!("`{name}` is used before its declaration")));
                return;
            }
            if visible.contains_key(name) {
                if let Some((k, _)) = new_vars.get_key_value(name) {
                    used_new.insert(k);
                }
                return;
            }
            f.push(soft, ctx.message(c, Some(span), format!("`{name}` is used but never defined")));
        };
        for (name, span) in uses {
            check(&name, span, &declared, &mut f);
        }
        for op in callable.operations() {
            for name in op.reads.iter().chain(op.writes.difference(&op.declares)) {
                check(name, op.span, &declared, &mut f);
            }
            for d in &op.declares {
                if visible.contains_key(d.as_str()) {
                    f.warnings.push(ctx.message(c, Some(op.span), format!("local `{d}` shadows a state variable")));
                }
                declared.insert(d.clone());
            }
        }
    }

    for name in used_new {
        let v = new_vars[name];
        if p.state_var(v).initializer.is_some() {
            continue;
        }
        let assigned = p.callables().into_iter().any(|id| {
            let callable = p.callable(id);
            let locals = callable.locals();
            !locals.contains(name) && callable.operations().iter().any(|op| op.writes.contains(name))
        });
        if !assigned {
            f.messages.push(ctx.message(
                v.contract,
                Some(p.state_var(v).span),
                format!("state variable `{name}` is added by the patch but never assigned"),
            ));
        }
    }
    f.verdict(Rule::DefUse)
}

/// The patched function keeps its name, parameter and return types and its
/// contract, and the patch introduces no declarations in illegal positions.
pub fn check_structural_compat(ctx: &GateContext<'_>) -> RuleVerdict {
    let mut f = Findings::default();
    let t = &ctx.target;
    if ctx.patched_contract.is_none() {
        f.messages.push(GateMessage {
            text: format!("contract `{}` is missing from the patched source", t.contract),
            line: None,
        });
        return f.verdict(Rule::StructuralCompat);
    }
    let orig = ctx.orig_fn.map(|id| match ctx.original.callable(id) {
        Callable::Function(g) => g,
        Callable::Modifier(_) => unreachable!("target resolves to a function"),
    });
    match ctx.patched_fn.map(|id| (id, ctx.patched.callable(id))) {
        None => f.messages.push(GateMessage {
            text: format!("function `{}` is missing from contract `{}`", t.function, t.contract),
            line: None,
        }),
        Some((id, Callable::Function(g))) => {
            if g.name != t.function {
                f.messages.push(ctx.message(
                    id.contract,
                    Some(g.signature_span),
                    format!("function `{}` was renamed to `{}`", t.function, g.name),
                ));
            }
            if let Some(o) = orig {
                let types = |ps: &[crate::solidity::Param]| -> Vec<String> {
                    ps.iter().map(|x| normalize_type(&x.type_name)).collect()
                };
                if types(&o.params) != types(&g.params) {
                    f.messages.push(ctx.message(
                        id.contract,
                        Some(g.signature_span),
                        format!(
                            "parameter types changed from ({}) to ({})",
                            types(&o.params).join(", "),
                            types(&g.params).join(", ")
                        ),
                    ));
                }
                if types(&o.returns) != types(&g.returns) {
                    f.messages.push(ctx.message(
                        id.contract,
                        Some(g.signature_span),
                        format!(
                            "return types changed from ({}) to ({})",
                            types(&o.returns).join(", "),
                            types(&g.returns).join(", ")
                        ),
                    ));
                }
                if o.kind != g.kind {
                    f.messages.push(ctx.message(id.contract, Some(g.signature_span), "function kind changed".into()));
                }
            }
        }
        Some((_, Callable::Modifier(_))) => unreachable!("patched target resolves to a function"),
    }
    for &(ou, pu) in &ctx.changed_units {
        let old: Vec<(DiagnosticCode, &str)> = ou
            .map(|o| {
                ctx.original.units[o]
                    .diagnostics
                    .iter()
                    .map(|d| (d.code, d.message.as_str()))
                    .collect()
            })
            .unwrap_or_default();
        let unit = &ctx.patched.units[pu];
        let mut budget = old.clone();
        for d in &unit.diagnostics {
            let serious = d.code == DiagnosticCode::MisplacedDeclaration || d.severity == Severity::Error;
            if let Some(i) = budget.iter().position(|x| *x == (d.code, d.message.as_str())) {
                budget.remove(i);
                continue;
            }
            if serious {
                f.messages.push(GateMessage {
                    text: d.message.clone(),
                    line: Some(unit.position(d.span.start).0),
                });
            }
        }
    }
    f.verdict(Rule::StructuralCompat)
}
