//! Prompt templates. Every builder is a pure function of its arguments so
//! the same case yields the same bytes on every run.

use super::Stage;
use crate::llm::ChatMessage;
use crate::rbac::{Taxonomy, TaxonomyEntry};
use serde::{Deserialize, Serialize};
use std::fmt::Write;

pub const PERSONA: &str =
    "You are a smart contract security specialist with expertise in identifying and mitigating vulnerabilities.";

pub const VALIDATOR_PERSONA: &str =
    "You are a smart contract auditor who reviews access control patches before they are merged.";

pub const FORMAT_REMINDER: &str =
    "Your previous reply could not be read. Reply with the JSON object only, using exactly the keys requested.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptEnvelope {
    pub stage: Stage,
    pub nl_part: String,
    pub cc_part: String,
    /// Earlier exchanges of the same agent.
    pub history: Vec<ChatMessage>,
}

impl PromptEnvelope {
    pub fn user_text(&self) -> String {
        format!("{}\n\n{}", self.nl_part, self.cc_part)
    }

    pub fn messages(&self) -> Vec<ChatMessage> {
        let mut out = self.history.clone();
        out.push(ChatMessage::user(self.user_text()));
        out
    }
}

fn solidity_block(out: &mut String, code: &str) {
    let _ = writeln!(out, "```solidity\n{}\n```", super::dedent(code).join("\n"));
}

fn list_or_none(items: &[String]) -> String {
    if items.is_empty() {
        "none".to_string()
    } else {
        items.join(", ")
    }
}

fn description_or_none(d: Option<&str>) -> &str {
    d.map(str::trim).filter(|d| !d.is_empty()).unwrap_or("none provided")
}

pub struct Q0Input<'a> {
    pub target: &'a str,
    pub function_text: &'a str,
    /// Full text of the modifiers the function applies.
    pub applied_modifiers: &'a [String],
    pub description: Option<&'a str>,
}

pub fn q0(input: &Q0Input<'_>) -> PromptEnvelope {
    let nl = format!(
        "{PERSONA}\nAn access control detector flagged the function below. Decide whether an arbitrary caller can \
         use it to perform an operation that should be restricted to a privileged role. Reply with JSON: \
         {{\"vulnerable\": true or false, \"reason\": \"<one sentence>\"}}."
    );
    let mut cc = String::new();
    let _ = writeln!(cc, "Function {}:", input.target);
    solidity_block(&mut cc, input.function_text);
    if input.applied_modifiers.is_empty() {
        let _ = writeln!(cc, "Applied modifiers: none");
    } else {
        let _ = writeln!(cc, "Applied modifiers:");
        for m in input.applied_modifiers {
            solidity_block(&mut cc, m);
        }
    }
    let _ = write!(cc, "Detector report: {}", description_or_none(input.description));
    PromptEnvelope {
        stage: Stage::Q0,
        nl_part: nl,
        cc_part: cc,
        history: Vec::new(),
    }
}

pub struct Q1Input<'a> {
    pub target: &'a str,
    pub function_text: &'a str,
    pub modifiers: &'a [String],
    /// `type name` of each candidate state variable.
    pub state_vars: &'a [String],
    pub role_functions: &'a [String],
    pub inherited: &'a [String],
    pub callees: &'a [String],
    pub description: Option<&'a str>,
}

pub fn q1(input: &Q1Input<'_>, history: Vec<ChatMessage>) -> PromptEnvelope {
    let nl = format!(
        "{PERSONA}\nThe contract context below lists the vulnerable function and the names of code elements that \
         may belong to role-based access control. Identify which of these elements already implement access \
         control in this contract: role holders, role checks in modifiers or conditions, and functions that manage \
         roles. Reply with JSON: {{\"rbac_elements\": [\"<name>\", ...]}} using only names that appear in the lists."
    );
    let mut cc = String::new();
    let _ = writeln!(cc, "(1) Vulnerable function {}:", input.target);
    solidity_block(&mut cc, input.function_text);
    let _ = writeln!(cc, "(2) Modifiers: {}", list_or_none(input.modifiers));
    let _ = writeln!(cc, "(3) State variables: {}", list_or_none(input.state_vars));
    let _ = writeln!(cc, "    Role management functions: {}", list_or_none(input.role_functions));
    let _ = writeln!(cc, "(4) Inherited contracts: {}", list_or_none(input.inherited));
    let _ = writeln!(cc, "(5) Functions called by the vulnerable function, in order: {}", list_or_none(input.callees));
    let _ = write!(cc, "(6) Vulnerability description: {}", description_or_none(input.description));
    PromptEnvelope {
        stage: Stage::Q1,
        nl_part: nl,
        cc_part: cc,
        history,
    }
}

/// Taxonomy as one line per role with its permissions.
pub fn taxonomy_listing(t: &Taxonomy) -> String {
    let mut out = String::new();
    for role in t.roles() {
        let perms: Vec<&str> = t
            .entries
            .iter()
            .filter(|e| e.role == role)
            .map(|e| e.permission.as_str())
            .collect();
        let _ = writeln!(out, "- {role}: {}", perms.join("; "));
    }
    out
}

pub fn q2(taxonomy: &Taxonomy, acg_text: &str, description: Option<&str>, history: Vec<ChatMessage>) -> PromptEnvelope {
    let nl = format!(
        "{PERSONA}\nUsing the access control context graph below, choose the role-permission pair from the taxonomy \
         that the vulnerable function should enforce. Pick the role whose holders legitimately perform the \
         operation in this contract, not simply the most privileged one. If no listed pair fits, propose a new \
         pair, set is_new to true and give example checks. Reply with JSON: {{\"role\": \"...\", \"permission\": \
         \"...\", \"is_new\": false, \"checks\": [], \"reason\": \"...\"}}."
    );
    let mut cc = String::new();
    let _ = writeln!(cc, "Role-permission taxonomy:");
    cc.push_str(&taxonomy_listing(taxonomy));
    let _ = writeln!(cc, "\n{}", acg_text.trim_end());
    let _ = write!(cc, "\nVulnerability description: {}", description_or_none(description));
    PromptEnvelope {
        stage: Stage::Q2,
        nl_part: nl,
        cc_part: cc,
        history,
    }
}

pub struct Q3Input<'a> {
    pub target: &'a str,
    pub function_text: &'a str,
    pub pragma: Option<&'a str>,
    pub role: &'a str,
    pub permission: &'a str,
    pub entry: Option<&'a TaxonomyEntry>,
    pub existing: &'a [String],
}

pub fn q3(input: &Q3Input<'_>, history: Vec<ChatMessage>) -> PromptEnvelope {
    let checks = input
        .entry
        .map(|e| e.checks.clone())
        .filter(|c| !c.is_empty())
        .map(|c| c.join("; "))
        .unwrap_or_else(|| "none recorded".to_string());
    let nl = format!(
        "{PERSONA}\nWrite a patch for {} that enforces the pair ({}, {}). Example permission checks for this pair: \
         {checks}. Existing access control elements: {}. Reuse or extend those elements where possible instead of \
         adding a parallel mechanism. Keep the function name, parameters, return values and behaviour unchanged \
         apart from the access control, and stay compatible with the declared compiler version. Reply with JSON: \
         {{\"patched_function\": \"<complete function source>\", \"new_declarations\": \"<modifiers, state \
         variables, events or functions to add, or empty>\", \"replaced_declarations\": \"<existing declarations \
         rewritten in full, or empty>\"}}.",
        input.target,
        input.role,
        input.permission,
        list_or_none(input.existing),
    );
    let mut cc = String::new();
    let _ = writeln!(cc, "Vulnerable function {}:", input.target);
    solidity_block(&mut cc, input.function_text);
    let _ = write!(cc, "Compiler version: {}", input.pragma.unwrap_or("not declared"));
    PromptEnvelope {
        stage: Stage::Q3,
        nl_part: nl,
        cc_part: cc,
        history,
    }
}

pub fn q3_static_feedback(feedback: &str) -> String {
    format!(
        "The patch failed these static checks:\n{}\nReturn a corrected patch in the same JSON format.",
        feedback.trim_end()
    )
}

pub fn q3_review_feedback(category: &str, reason: &str) -> String {
    format!(
        "The reviewer rejected the patch ({category}): {}\nReturn a revised patch in the same JSON format.",
        reason.trim()
    )
}

pub struct Q4Input<'a> {
    pub target: &'a str,
    pub description: Option<&'a str>,
    pub acg_text: &'a str,
    pub role: &'a str,
    pub permission: &'a str,
    pub diff: &'a str,
}

const Q4_FORMAT: &str = "Reply with JSON: {\"verdict\": \"accept\" or \"reject\", \"reason\": \"...\", \
                         \"category\": \"<incorrectRole | missingValidation | logicConflict | other>\"}.";

pub fn q4(input: &Q4Input<'_>, history: Vec<ChatMessage>) -> PromptEnvelope {
    if !history.is_empty() {
        let mut cc = String::new();
        let _ = write!(cc, "Revised patch for {}:\n```diff\n{}\n```", input.target, input.diff.trim_end());
        return PromptEnvelope {
            stage: Stage::Q4,
            nl_part: format!("The generator revised the patch after your review. Judge it by the same criteria. {Q4_FORMAT}"),
            cc_part: cc,
            history,
        };
    }
    let nl = format!(
        "{VALIDATOR_PERSONA}\nJudge whether the patch below (1) stops unauthorized callers from performing the \
         operation, (2) keeps the original behaviour for legitimate callers, and (3) introduces no new security or \
         logic flaw. Check that the enforced role matches the chosen pair and the surrounding code. {Q4_FORMAT}"
    );
    let mut cc = String::new();
    let _ = writeln!(cc, "Vulnerability description: {}", description_or_none(input.description));
    let _ = writeln!(cc, "Role-permission pair: ({}, {})", input.role, input.permission);
    let _ = writeln!(cc, "\n{}\n", input.acg_text.trim_end());
    let _ = write!(cc, "Patch for {}:\n```diff\n{}\n```", input.target, input.diff.trim_end());
    PromptEnvelope {
        stage: Stage::Q4,
        nl_part: nl,
        cc_part: cc,
        history,
    }
}
