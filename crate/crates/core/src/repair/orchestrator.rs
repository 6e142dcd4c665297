use super::prompts::{self, Q0Input, Q1Input, Q3Input, Q4Input, FORMAT_REMINDER};
use super::report::{AcgSummary, CaseOutcome, CaseReport};
use super::splice::{splice, PatchParts};
use super::{
    unified_diff, Attempt, DebateOutcome, DebateState, Feedback, FeedbackCategory, Mechanism, PairChoice, PairUsed,
    Patch, Q0Result, Q0Verdict, RepairCase, Review, Stage, TaxonomyChange,
};
use crate::acg::{build_acg, serialize_acg, AcgNodeKind, DEFAULT_TOKEN_BUDGET, TRUNCATED_MARKER};
use crate::error::{Error, Result};
use crate::gate::{validate, ValidationReport};
use crate::graphs::{Analysis, CallableId, CallableKind};
use crate::llm::{estimate_message_tokens, estimate_text_tokens, parse_structured, ChatMessage, LlmSession, ModelConfig};
use crate::rbac::{candidate_rbac_elements, propose_taxonomy_entry, CandidateKind, ProposeOutcome, TaxonomyStore};
use crate::solidity::{parse_source, CallKind, FunctionDef, SourceUnit, SNIPPET_CONTRACT};
use serde_json::Value;
use std::collections::BTreeSet;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct RepairSettings {
    pub model: ModelConfig,
    /// Token budget for the serialized context graph; `None` disables
    /// truncation.
    pub token_budget: Option<usize>,
    pub max_rounds: u8,
    /// Static-check re-prompts per generation before the failure costs a
    /// debate round.
    pub static_loops: usize,
}

impl Default for RepairSettings {
    fn default() -> Self {
        RepairSettings {
            model: ModelConfig::default(),
            token_budget: Some(DEFAULT_TOKEN_BUDGET),
            max_rounds: 3,
            static_loops: 2,
        }
    }
}

/// Confirms a copilot-mode Q0 verdict before the repair proceeds.
pub trait Operator {
    /// Returns true to continue with the repair.
    fn confirm(&mut self, case: &RepairCase, q0: &Q0Result) -> bool;
}

/// Accepts the model's verdict as is.
pub struct FollowVerdict;

impl Operator for FollowVerdict {
    fn confirm(&mut self, _: &RepairCase, q0: &Q0Result) -> bool {
        q0.verdict == Q0Verdict::Vulnerable
    }
}

/// Repairs whatever the verdict.
pub struct AlwaysProceed;

impl Operator for AlwaysProceed {
    fn confirm(&mut self, _: &RepairCase, _: &Q0Result) -> bool {
        true
    }
}

const MIN_ACG_BUDGET: usize = 256;

/// One case's sequential session. Stage methods may be driven one by one;
/// [`run_case`] runs them all in order.
pub struct Pipeline<'a> {
    case: &'a RepairCase,
    analysis: Analysis<'a>,
    fvul: CallableId,
    session: &'a mut LlmSession,
    taxonomy: &'a TaxonomyStore,
    settings: &'a RepairSettings,
    /// Generator session memory.
    history: Vec<ChatMessage>,
    /// History the Q3 prompt was built on, and the prompt itself.
    q3_base: Option<Vec<ChatMessage>>,
    last_reply: Option<String>,
    validator_history: Vec<ChatMessage>,
    acg_text: Option<String>,
    stage: Stage,
    pub report: CaseReport,
}

fn lookup_fvul(case: &RepairCase, analysis: &Analysis<'_>) -> Result<CallableId> {
    let p = &analysis.program;
    let qualified = format!("{}.{}", case.target.contract, case.target.function);
    let contracts: Vec<usize> = (0..p.contract_count())
        .filter(|&c| {
            let def = p.contract(c);
            def.name == case.target.contract || (case.target.contract == SNIPPET_CONTRACT && def.synthetic)
        })
        .collect();
    let mut hits = Vec::new();
    for c in contracts {
        for (index, f) in p.contract(c).functions.iter().enumerate() {
            if f.name == case.target.function {
                hits.push(CallableId {
                    contract: c,
                    kind: CallableKind::Function,
                    index,
                });
            }
        }
    }
    match hits.len() {
        0 => Err(Error::TargetNotFound(qualified)),
        1 => {
            let f = &p.contract(hits[0].contract).functions[hits[0].index];
            if f.has_body {
                Ok(hits[0])
            } else {
                Err(Error::EmptyTarget(qualified))
            }
        }
        _ => Err(Error::Usage(format!("`{qualified}` names {} functions", hits.len()))),
    }
}

fn value_str<'v>(v: &'v Value, keys: &[&str]) -> Option<&'v str> {
    keys.iter().find_map(|k| v.get(*k).and_then(Value::as_str)).map(str::trim)
}

fn value_bool(v: &Value, keys: &[&str]) -> Option<bool> {
    keys.iter().find_map(|k| match v.get(*k)? {
        Value::Bool(b) => Some(*b),
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" | "y" | "vulnerable" => Some(true),
            "false" | "no" | "n" | "not vulnerable" | "safe" => Some(false),
            _ => None,
        },
        _ => None,
    })
}

fn value_list(v: &Value, keys: &[&str]) -> Option<Vec<String>> {
    keys.iter().find_map(|k| match v.get(*k)? {
        Value::Array(items) => Some(
            items
                .iter()
                .filter_map(|i| i.as_str().map(|s| s.trim().to_string()))
                .filter(|s| !s.is_empty())
                .collect(),
        ),
        Value::String(s) => Some(
            s.split(',')
                .map(|p| p.trim().to_string())
                .filter(|p| !p.is_empty() && p != "none")
                .collect(),
        ),
        _ => None,
    })
}

fn value_text(v: &Value, keys: &[&str]) -> String {
    keys.iter()
        .find_map(|k| match v.get(*k)? {
            Value::String(s) => Some(s.clone()),
            Value::Array(items) => Some(
                items
                    .iter()
                    .filter_map(|i| i.as_str())
                    .collect::<Vec<_>>()
                    .join("\n\n"),
            ),
            _ => None,
        })
        .unwrap_or_default()
}

fn parse_q0(text: &str) -> Option<(Q0Verdict, String)> {
    let v = parse_structured(text).ok()?;
    let vulnerable = value_bool(&v, &["vulnerable", "is_vulnerable", "verdict", "answer"])?;
    let verdict = if vulnerable { Q0Verdict::Vulnerable } else { Q0Verdict::NotVulnerable };
    Some((verdict, value_str(&v, &["reason", "explanation"]).unwrap_or("").to_string()))
}

fn parse_review(text: &str) -> Option<Review> {
    let v = parse_structured(text).ok()?;
    let accepted = match value_str(&v, &["verdict", "decision", "result"]) {
        Some(s) => match s.to_ascii_lowercase().as_str() {
            "accept" | "accepted" | "approve" | "approved" | "pass" | "yes" => true,
            "reject" | "rejected" | "fail" | "no" => false,
            _ => return None,
        },
        None => value_bool(&v, &["accepted", "accept", "valid"])?,
    };
    let reason = value_str(&v, &["reason", "feedback", "explanation"]).unwrap_or("").to_string();
    let category = (!accepted).then(|| FeedbackCategory::parse(value_str(&v, &["category"]).unwrap_or("other")));
    Some(Review {
        accepted,
        reason,
        category,
    })
}

fn duration_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

impl<'a> Pipeline<'a> {
    pub fn new(
        case: &'a RepairCase,
        session: &'a mut LlmSession,
        taxonomy: &'a TaxonomyStore,
        settings: &'a RepairSettings,
    ) -> Result<Self> {
        let analysis = Analysis::new(&case.units);
        let fvul = lookup_fvul(case, &analysis)?;
        let report = CaseReport::new(case, session.provider_name());
        Ok(Pipeline {
            case,
            analysis,
            fvul,
            session,
            taxonomy,
            settings,
            history: Vec::new(),
            q3_base: None,
            last_reply: None,
            validator_history: Vec::new(),
            acg_text: None,
            stage: Stage::Resolve,
            report,
        })
    }

    /// Generator session memory so far.
    pub fn history(&self) -> &[ChatMessage] {
        &self.history
    }

    pub fn acg_text(&self) -> Option<&str> {
        self.acg_text.as_deref()
    }

    fn target_name(&self) -> String {
        self.analysis.program.qualified_name(self.fvul)
    }

    fn contract_index(&self) -> usize {
        self.fvul.contract
    }

    fn function(&self) -> &'a FunctionDef {
        &self.analysis.program.contract(self.fvul.contract).functions[self.fvul.index]
    }

    fn unit(&self) -> &'a SourceUnit {
        self.analysis.program.unit_of(self.fvul.contract)
    }

    fn function_text(&self) -> &'a str {
        self.unit().text(self.function().span)
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{}: {msg}", self.case.id);
        self.report.warnings.push(msg);
    }

    fn add_time(&mut self, stage: Stage, t: Instant) {
        *self.report.durations_ms.entry(stage).or_insert(0) += duration_ms(t);
    }

    fn ask(&mut self, messages: &[ChatMessage]) -> Result<String> {
        let needed = estimate_message_tokens(messages) as usize;
        let window = self.settings.model.context_window;
        if needed > window {
            return Err(Error::ContextOverflow { needed, window });
        }
        let (text, _) = self.session.complete(messages, &self.settings.model)?;
        Ok(text)
    }

    /// Copilot check that the flagged function really lacks access control.
    /// An unreadable answer after two retries counts as vulnerable.
    pub fn run_q0(&mut self) -> Result<Q0Result> {
        self.stage = Stage::Q0;
        let t = Instant::now();
        let p = &self.analysis.program;
        let applied: Vec<String> = self
            .function()
            .modifiers
            .iter()
            .filter_map(|m| p.resolve_modifier(self.contract_index(), &m.name))
            .map(|id| {
                let c = p.callable(id);
                p.unit_of(id.contract).text(c.span()).to_string()
            })
            .collect();
        let target = self.target_name();
        let env = prompts::q0(&Q0Input {
            target: &target,
            function_text: self.function_text(),
            applied_modifiers: &applied,
            description: self.case.description.as_deref(),
        });
        let mut msgs = self.history.clone();
        msgs.extend(env.messages());
        let mut result = None;
        for attempt in 0..3 {
            let reply = self.ask(&msgs)?;
            let parsed = parse_q0(&reply);
            msgs.push(ChatMessage::assistant(reply));
            if let Some((verdict, reason)) = parsed {
                result = Some(Q0Result {
                    verdict,
                    reason,
                    parsed: true,
                    confirmed: None,
                });
                break;
            }
            if attempt < 2 {
                msgs.push(ChatMessage::user(FORMAT_REMINDER));
            }
        }
        let result = result.unwrap_or_else(|| Q0Result {
            verdict: Q0Verdict::Vulnerable,
            reason: String::new(),
            parsed: false,
            confirmed: None,
        });
        if !result.parsed {
            self.warn("Q0 reply unreadable after retries; treating the function as vulnerable".into());
        }
        self.history = msgs;
        self.report.q0 = Some(result.clone());
        self.add_time(Stage::Q0, t);
        Ok(result)
    }

    /// Asks which offered candidates form the existing RBAC mechanism.
    /// Skipped when nothing is offered.
    pub fn run_q1(&mut self) -> Result<Vec<String>> {
        self.stage = Stage::Q1;
        let t = Instant::now();
        let p = &self.analysis.program;
        let c = self.contract_index();
        let visible: BTreeSet<&str> = p.linearization(c).iter().map(|&x| p.contract(x).name.as_str()).collect();
        let candidates: Vec<_> = candidate_rbac_elements(&self.case.units)
            .into_iter()
            .filter(|cand| visible.contains(cand.contract.as_str()))
            .collect();
        if candidates.is_empty() {
            self.add_time(Stage::Q1, t);
            return Ok(Vec::new());
        }
        let mut modifiers = Vec::new();
        let mut state_vars = Vec::new();
        let mut role_functions = Vec::new();
        let mut offered = BTreeSet::new();
        for cand in &candidates {
            if !offered.insert(cand.name.clone()) {
                continue;
            }
            match cand.kind {
                CandidateKind::Modifier => modifiers.push(cand.name.clone()),
                CandidateKind::Function => role_functions.push(cand.name.clone()),
                CandidateKind::StateVar => {
                    let ty = p
                        .resolve_state_var(c, &cand.name)
                        .map(|id| p.state_var(id).type_name.clone())
                        .unwrap_or_default();
                    state_vars.push(format!("{ty} {}", cand.name).trim().to_string());
                }
            }
        }
        let mut inherited: Vec<String> = Vec::new();
        for &x in p.linearization(c) {
            for b in &p.contract(x).inherits {
                let short = b.rsplit('.').next().unwrap_or(b).to_string();
                if !inherited.contains(&short) {
                    inherited.push(short);
                }
            }
        }
        let mut callees: Vec<String> = Vec::new();
        for op in self.function().operations() {
            let mut calls: Vec<_> = op.calls.iter().filter(|k| k.kind == CallKind::Normal).collect();
            calls.sort_by_key(|k| k.span.start);
            for call in calls {
                if call.base.is_none()
                    && p.resolve_function(c, &call.name, Some(call.args.len())).is_some()
                    && !callees.contains(&call.name)
                {
                    callees.push(call.name.clone());
                }
            }
        }
        let target = self.target_name();
        let env = prompts::q1(
            &Q1Input {
                target: &target,
                function_text: self.function_text(),
                modifiers: &modifiers,
                state_vars: &state_vars,
                role_functions: &role_functions,
                inherited: &inherited,
                callees: &callees,
                description: self.case.description.as_deref(),
            },
            self.history.clone(),
        );
        let mut msgs = env.messages();
        let mut chosen = None;
        for attempt in 0..2 {
            let reply = self.ask(&msgs)?;
            let names = parse_structured(&reply)
                .ok()
                .and_then(|v| value_list(&v, &["rbac_elements", "elements", "rbac"]));
            msgs.push(ChatMessage::assistant(reply));
            if names.is_some() {
                chosen = names;
                break;
            }
            if attempt == 0 {
                msgs.push(ChatMessage::user(FORMAT_REMINDER));
            }
        }
        self.history = msgs;
        let mut out = Vec::new();
        match chosen {
            None => self.warn("Q1 reply unreadable; continuing without identified RBAC elements".into()),
            Some(names) => {
                for raw in names {
                    let name = raw.rsplit('.').next().unwrap_or(&raw).trim_end_matches("()").trim().to_string();
                    if offered.contains(&name) {
                        if !out.contains(&name) {
                            out.push(name);
                        }
                    } else {
                        self.warn(format!("Q1 named `{raw}`, which was not offered; dropped"));
                    }
                }
            }
        }
        self.report.rbac_elements = out.clone();
        self.add_time(Stage::Q1, t);
        Ok(out)
    }

    /// Builds and serializes the context graph so the Q2 prompt leaves room
    /// for the later stages; the budget shrinks until it fits.
    pub fn build_context(&mut self, elements: &[String]) -> Result<String> {
        self.stage = Stage::Acg;
        let t = Instant::now();
        let g = build_acg(&self.analysis, self.fvul, elements)?;
        let window = self.settings.model.context_window;
        let reserve = 1536 + 2 * estimate_text_tokens(self.function_text()) as usize;
        let snapshot = self.taxonomy.snapshot();
        let prompt_tokens = |text: &str| {
            let env = prompts::q2(&snapshot, text, self.case.description.as_deref(), self.history.clone());
            estimate_message_tokens(&env.messages()) as usize
        };
        let text = match self.settings.token_budget {
            None => serialize_acg(&g, usize::MAX),
            Some(mut budget) => loop {
                let text = serialize_acg(&g, budget);
                if prompt_tokens(&text) + reserve <= window || budget <= MIN_ACG_BUDGET {
                    break text;
                }
                budget = (budget * 3 / 4).max(MIN_ACG_BUDGET);
            },
        };
        let kind = |k: AcgNodeKind| match k {
            AcgNodeKind::Function => "function",
            AcgNodeKind::Modifier => "modifier",
            AcgNodeKind::StateVar => "statevar",
            AcgNodeKind::Comment => "comment",
        };
        self.report.acg = Some(AcgSummary {
            nodes: g.nodes.len(),
            edges: g.edges.len(),
            estimated_tokens: crate::acg::estimate_tokens(&text),
            token_budget: self.settings.token_budget,
            truncated: text.ends_with(&format!("{TRUNCATED_MARKER}\n")),
            elements: g
                .nodes
                .iter()
                .map(|n| format!("{} {}.{}", kind(n.kind), n.contract, n.name))
                .collect(),
        });
        self.acg_text = Some(text.clone());
        self.add_time(Stage::Acg, t);
        Ok(text)
    }

    /// Selects the role-permission pair, extending the taxonomy when the
    /// model proposes a pair it does not hold yet.
    pub fn run_q2(&mut self) -> Result<PairChoice> {
        self.stage = Stage::Q2;
        let t = Instant::now();
        let acg = self
            .acg_text
            .clone()
            .ok_or_else(|| Error::Usage("context graph not built before Q2".into()))?;
        let snapshot = self.taxonomy.snapshot();
        let env = prompts::q2(&snapshot, &acg, self.case.description.as_deref(), self.history.clone());
        let mut msgs = env.messages();
        for attempt in 0..2 {
            let reply = self.ask(&msgs)?;
            let parsed = parse_structured(&reply).ok();
            msgs.push(ChatMessage::assistant(reply));
            if let Some(choice) = parsed.and_then(|v| self.resolve_pair(&v).transpose()) {
                let choice = choice?;
                self.history = msgs;
                self.report.pair = Some(choice.clone());
                self.add_time(Stage::Q2, t);
                return Ok(choice);
            }
            if attempt == 0 {
                msgs.push(ChatMessage::user(format!(
                    "{FORMAT_REMINDER} Both \"role\" and \"permission\" must be non-empty."
                )));
            }
        }
        self.history = msgs;
        self.add_time(Stage::Q2, t);
        Err(Error::PairUnresolved)
    }

    fn resolve_pair(&mut self, v: &Value) -> Result<Option<PairChoice>> {
        let role = value_str(v, &["role"]).unwrap_or("").to_string();
        let permission = value_str(v, &["permission"]).unwrap_or("").to_string();
        if role.is_empty() || permission.is_empty() {
            return Ok(None);
        }
        let is_new = value_bool(v, &["is_new", "new"]).unwrap_or(false);
        let reason = value_str(v, &["reason"]).unwrap_or("").to_string();
        let checks = value_list(v, &["checks"]).unwrap_or_default();
        if let Some(e) = self.taxonomy.snapshot().find(&role, &permission) {
            if is_new {
                self.warn(format!("proposed pair ({role}, {permission}) is already `{}`", e.label()));
            }
            return Ok(Some(PairChoice {
                role,
                permission,
                is_new,
                reason,
                taxonomy_entry: e.label(),
                taxonomy_change: if is_new { TaxonomyChange::Duplicate } else { TaxonomyChange::Existing },
            }));
        }
        if !is_new {
            self.warn(format!("pair ({role}, {permission}) is not in the taxonomy; adding it"));
        }
        let outcome = self
            .taxonomy
            .update(|t| propose_taxonomy_entry(t, &role, &permission, &checks))?;
        let (entry, change) = match outcome {
            ProposeOutcome::Added { entry } => (entry, TaxonomyChange::Added),
            ProposeOutcome::DuplicateOf { entry } => (entry, TaxonomyChange::Duplicate),
            ProposeOutcome::Rejected { .. } => return Ok(None),
        };
        Ok(Some(PairChoice {
            role,
            permission,
            is_new,
            reason,
            taxonomy_entry: entry.label(),
            taxonomy_change: change,
        }))
    }

    fn pair(&self) -> Result<&PairChoice> {
        self.report
            .pair
            .as_ref()
            .ok_or_else(|| Error::Usage("no role-permission pair resolved before Q3".into()))
    }

    /// First patch for the resolved pair.
    pub fn run_q3(&mut self) -> Result<Patch> {
        self.generate(None)
    }

    fn q3_messages(&mut self) -> Result<Vec<ChatMessage>> {
        if let Some(base) = &self.q3_base {
            return Ok(base.clone());
        }
        let pair = self.pair()?.clone();
        let snapshot = self.taxonomy.snapshot();
        let entry = snapshot.find(&pair.role, &pair.permission);
        let target = self.target_name();
        let pragma = self.unit().pragma.as_ref().map(|p| p.raw_pragma.clone());
        let env = prompts::q3(
            &Q3Input {
                target: &target,
                function_text: self.function_text(),
                pragma: pragma.as_deref(),
                role: &pair.role,
                permission: &pair.permission,
                entry,
                existing: &self.report.rbac_elements,
            },
            self.history.clone(),
        );
        let msgs = env.messages();
        self.q3_base = Some(msgs.clone());
        Ok(msgs)
    }

    /// Asks for a patch, or a revision of the last one when `followup`
    /// carries check or reviewer feedback. An unreadable reply is retried
    /// once.
    fn generate(&mut self, followup: Option<String>) -> Result<Patch> {
        self.stage = Stage::Q3;
        let t = Instant::now();
        let mut msgs = self.q3_messages()?;
        if let (Some(f), Some(last)) = (followup, &self.last_reply) {
            msgs.push(ChatMessage::assistant(last.clone()));
            msgs.push(ChatMessage::user(f));
        }
        let mut failure = String::new();
        for attempt in 0..2 {
            let reply = match self.ask(&msgs) {
                Ok(r) => r,
                Err(e) => {
                    self.add_time(Stage::Q3, t);
                    return Err(e);
                }
            };
            match self.assemble(&reply) {
                Ok(patch) => {
                    if self.last_reply.is_none() {
                        self.history = msgs.clone();
                        self.history.push(ChatMessage::assistant(reply.clone()));
                    }
                    self.last_reply = Some(reply);
                    if let Some(d) = self.report.debate.as_mut() {
                        d.candidate_patch = Some(patch.clone());
                    }
                    self.add_time(Stage::Q3, t);
                    return Ok(patch);
                }
                Err(e) => {
                    failure = e.to_string();
                    msgs.push(ChatMessage::assistant(reply));
                    if attempt == 0 {
                        msgs.push(ChatMessage::user(FORMAT_REMINDER));
                    }
                }
            }
        }
        self.add_time(Stage::Q3, t);
        Err(Error::GenerationFailed(failure))
    }

    fn assemble(&self, reply: &str) -> Result<Patch> {
        let v = parse_structured(reply)?;
        let parts = PatchParts {
            patched_function: value_text(&v, &["patched_function", "patch", "function"]),
            new_declarations: value_text(&v, &["new_declarations"]),
            replaced_declarations: value_text(&v, &["replaced_declarations"]),
        };
        let p = &self.analysis.program;
        let c = self.contract_index();
        let unit = self.unit();
        let owners: Vec<_> = p
            .linearization(c)
            .iter()
            .filter(|&&x| p.unit_index(x) == p.unit_index(c))
            .map(|&x| p.contract(x))
            .collect();
        let spliced = splice(unit, &owners, self.function(), &parts)?;
        let pair = self.pair()?;
        let patched_unit = parse_source(&unit.path, &spliced.source);
        let mechanism = self.mechanism(&patched_unit, &spliced.replaced);
        let patched_function_text = patched_unit
            .contract(&p.contract(c).name)
            .and_then(|pc| pc.function(&self.function().name))
            .map(|f| patched_unit.text(f.span).to_string())
            .unwrap_or_else(|| super::strip_fences(&parts.patched_function).to_string());
        let diff = unified_diff(
            &unit.raw,
            &spliced.source,
            &format!("a/{}", unit.path),
            &format!("b/{}", unit.path),
            3,
        );
        Ok(Patch {
            pair_used: PairUsed {
                role: pair.role.clone(),
                permission: pair.permission.clone(),
            },
            mechanism,
            path: unit.path.clone(),
            patched_function_text,
            full_patched_source: spliced.source,
            unified_diff: diff,
        })
    }

    fn mechanism(&self, patched: &SourceUnit, replaced: &[String]) -> Mechanism {
        let p = &self.analysis.program;
        let c = self.contract_index();
        let orig = self.function();
        let before: BTreeSet<&str> = orig.modifiers.iter().map(|m| m.name.as_str()).collect();
        let Some(pf) = patched
            .contract(&p.contract(c).name)
            .and_then(|pc| pc.function(&orig.name))
        else {
            return Mechanism::InlineRequire;
        };
        if let Some(m) = pf.modifiers.iter().find(|m| !before.contains(m.name.as_str())) {
            return if p.resolve_modifier(c, &m.name).is_some() {
                Mechanism::ReusedModifier { name: m.name.clone() }
            } else {
                Mechanism::NewModifier { name: m.name.clone() }
            };
        }
        if let Some(m) = pf.modifiers.iter().find(|m| replaced.contains(&m.name)) {
            return Mechanism::ReusedModifier { name: m.name.clone() };
        }
        Mechanism::InlineRequire
    }

    /// Runs the static checks on a patch against the original sources.
    pub fn check(&mut self, patch: &Patch) -> ValidationReport {
        let t = Instant::now();
        let patched: Vec<SourceUnit> = self
            .case
            .units
            .iter()
            .map(|u| {
                if u.path == patch.path {
                    parse_source(&u.path, &patch.full_patched_source)
                } else {
                    u.clone()
                }
            })
            .collect();
        let report = validate(&self.case.units, &patched, &self.case.target);
        self.add_time(Stage::Gate, t);
        report
    }

    fn record(&mut self, attempt: Attempt) {
        if let Some(d) = self.report.debate.as_mut() {
            d.attempts.push(attempt);
        }
    }

    fn debate(&mut self) -> &mut DebateState {
        self.report.debate.get_or_insert_with(DebateState::default)
    }

    /// Generator/validator loop. Every patch first passes the static checks,
    /// with up to `static_loops` re-prompts; a patch still failing costs a
    /// round. The validator then accepts or returns feedback for the next
    /// round, up to `max_rounds` revisions. On error the partial state stays
    /// in the report.
    pub fn run_mad_loop(&mut self, patch0: Patch) -> Result<DebateState> {
        let max_rounds = self.settings.max_rounds;
        let static_loops = self.settings.static_loops;
        *self.debate() = DebateState {
            candidate_patch: Some(patch0.clone()),
            ..DebateState::default()
        };
        let mut patch = patch0;
        let mut round = 0u8;
        loop {
            self.stage = Stage::Gate;
            let mut report = self.check(&patch);
            let mut loops = 0;
            while !report.overall_pass && loops < static_loops {
                self.record(Attempt {
                    round,
                    static_loop: loops,
                    unified_diff: patch.unified_diff.clone(),
                    failed_rules: report.failed_rules(),
                    review: None,
                });
                patch = self.generate(Some(prompts::q3_static_feedback(&report.feedback())))?;
                loops += 1;
                self.stage = Stage::Gate;
                report = self.check(&patch);
            }
            self.report.validation = Some(report.clone());
            if !report.overall_pass {
                self.record(Attempt {
                    round,
                    static_loop: loops,
                    unified_diff: patch.unified_diff.clone(),
                    failed_rules: report.failed_rules(),
                    review: None,
                });
                if round >= max_rounds {
                    let d = self.debate();
                    d.candidate_patch = Some(patch);
                    d.outcome = Some(DebateOutcome::StaticRejected);
                    return Ok(d.clone());
                }
                round += 1;
                self.debate().round = round;
                patch = self.generate(Some(prompts::q3_static_feedback(&report.feedback())))?;
                continue;
            }
            let review = self.run_q4(&patch)?;
            self.record(Attempt {
                round,
                static_loop: loops,
                unified_diff: patch.unified_diff.clone(),
                failed_rules: Vec::new(),
                review: Some(review.clone()),
            });
            let d = self.debate();
            d.candidate_patch = Some(patch.clone());
            if review.accepted {
                d.outcome = Some(DebateOutcome::Accepted);
                return Ok(d.clone());
            }
            let category = review.category.unwrap_or(FeedbackCategory::Other);
            d.validator_feedback.push(Feedback {
                reason: review.reason.clone(),
                category,
            });
            if round >= max_rounds {
                d.outcome = Some(DebateOutcome::ExhaustedKeptLast);
                return Ok(d.clone());
            }
            round += 1;
            d.round = round;
            patch = self.generate(Some(prompts::q3_review_feedback(category.as_str(), &review.reason)))?;
        }
    }

    /// Validator verdict on a statically valid patch. An unreadable reply is
    /// retried once, then counted as a rejection.
    pub fn run_q4(&mut self, patch: &Patch) -> Result<Review> {
        self.stage = Stage::Q4;
        let t = Instant::now();
        let target = self.target_name();
        let acg = self.acg_text.clone().unwrap_or_default();
        let env = prompts::q4(
            &Q4Input {
                target: &target,
                description: self.case.description.as_deref(),
                acg_text: &acg,
                role: &patch.pair_used.role,
                permission: &patch.pair_used.permission,
                diff: &patch.unified_diff,
            },
            self.validator_history.clone(),
        );
        let mut msgs = env.messages();
        let mut review = None;
        for attempt in 0..2 {
            let reply = match self.ask(&msgs) {
                Ok(r) => r,
                Err(e) => {
                    self.add_time(Stage::Q4, t);
                    return Err(e);
                }
            };
            let parsed = parse_review(&reply);
            msgs.push(ChatMessage::assistant(reply));
            if parsed.is_some() {
                review = parsed;
                break;
            }
            if attempt == 0 {
                msgs.push(ChatMessage::user(FORMAT_REMINDER));
            }
        }
        self.validator_history = msgs;
        let review = match review {
            Some(r) => r,
            None => {
                self.warn("validator reply unreadable; counted as a rejection".into());
                Review {
                    accepted: false,
                    reason: "validator reply unreadable".into(),
                    category: Some(FeedbackCategory::Other),
                }
            }
        };
        self.add_time(Stage::Q4, t);
        Ok(review)
    }

    fn drive(&mut self, operator: &mut dyn super::Operator) -> Result<CaseOutcome> {
        if self.case.mode == super::Mode::Copilot {
            let mut q0 = self.run_q0()?;
            let proceed = operator.confirm(self.case, &q0);
            q0.confirmed = Some(proceed);
            self.report.q0 = Some(q0.clone());
            if !proceed {
                let reason = match q0.verdict {
                    Q0Verdict::NotVulnerable => "Q0 found no access control vulnerability",
                    Q0Verdict::Vulnerable => "operator declined the repair",
                };
                return Ok(CaseOutcome::Skipped { reason: reason.into() });
            }
        }
        let elements = self.run_q1()?;
        self.build_context(&elements)?;
        self.run_q2()?;
        let patch = self.run_q3()?;
        let state = self.run_mad_loop(patch)?;
        let debate = state.outcome.expect("finished loop has an outcome");
        Ok(CaseOutcome::Repaired { debate })
    }
}

/// Runs Q0 (copilot mode only), Q1, the context graph, Q2, Q3, the static
/// checks and the debate loop in order. A report is produced whatever
/// happens; errors become a failure outcome naming the stage.
pub fn run_case(
    case: &RepairCase,
    session: &mut LlmSession,
    taxonomy: &TaxonomyStore,
    operator: &mut dyn super::Operator,
    settings: &RepairSettings,
) -> CaseReport {
    let provider = session.provider_name().to_string();
    let mut report = match Pipeline::new(case, session, taxonomy, settings) {
        Ok(mut p) => {
            let outcome = p.drive(operator);
            let stage = p.stage;
            let mut report = std::mem::replace(&mut p.report, CaseReport::new(case, &provider));
            report.outcome = match outcome {
                Ok(o) => o,
                Err(e) => CaseOutcome::Failure {
                    stage,
                    error: e.to_string(),
                    exit_code: e.exit_code(),
                },
            };
            report
        }
        Err(e) => {
            let mut report = CaseReport::new(case, &provider);
            report.outcome = CaseOutcome::Failure {
                stage: Stage::Resolve,
                error: e.to_string(),
                exit_code: e.exit_code(),
            };
            report
        }
    };
    report.usage = session.ledger.clone();
    report
}
