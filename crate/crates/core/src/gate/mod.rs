//! Static validity checks applied to every generated patch before it is
//! shown to the validator agent.

mod context;
mod features;
mod rules;

pub use context::{GateContext, Target};
pub use features::{count_feature, version_features, VersionFeature};
pub use rules::{
    check_def_use, check_infeasible_invocations, check_misused_types, check_msg_sender,
    check_solidity_version, check_structural_compat, check_undefined_tokens,
};

use crate::solidity::SourceUnit;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    UndefinedTokens,
    InfeasibleInvocation,
    MisusedTypes,
    SolidityVersion,
    MsgSenderCheck,
    DefUse,
    StructuralCompat,
}

impl Rule {
    pub const ALL: [Rule; 7] = [
        Rule::UndefinedTokens,
        Rule::InfeasibleInvocation,
        Rule::MisusedTypes,
        Rule::SolidityVersion,
        Rule::MsgSenderCheck,
        Rule::DefUse,
        Rule::StructuralCompat,
    ];

    pub fn parse(s: &str) -> Option<Rule> {
        Rule::ALL.into_iter().find(|r| r.to_string() == s)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateMessage {
    pub text: String,
    /// One-based line in the patched source.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl fmt::Display for GateMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.text),
            None => f.write_str(&self.text),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleVerdict {
    pub rule: Rule,
    pub pass: bool,
    pub messages: Vec<GateMessage>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<GateMessage>,
}

impl RuleVerdict {
    pub(crate) fn from_findings(rule: Rule, messages: Vec<GateMessage>, warnings: Vec<GateMessage>) -> Self {
        let mut messages = messages;
        messages.dedup();
        let mut warnings = warnings;
        warnings.dedup();
        RuleVerdict {
            rule,
            pass: messages.is_empty(),
            messages,
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdicts: Vec<RuleVerdict>,
    pub overall_pass: bool,
}

impl ValidationReport {
    pub fn verdict(&self, rule: Rule) -> &RuleVerdict {
        self.verdicts.iter().find(|v| v.rule == rule).expect("every rule has a verdict")
    }

    pub fn failed_rules(&self) -> Vec<Rule> {
        self.verdicts.iter().filter(|v| !v.pass).map(|v| v.rule).collect()
    }

    /// Failure messages as a bullet list for re-prompting the generator.
    pub fn feedback(&self) -> String {
        let mut out = String::new();
        for v in self.verdicts.iter().filter(|v| !v.pass) {
            for m in &v.messages {
                out.push_str(&format!("- [{}] {}\n", v.rule, m));
            }
        }
        out
    }
}

/// Runs every rule on a patched program against the original.
pub fn validate(original: &[SourceUnit], patched: &[SourceUnit], target: &Target) -> ValidationReport {
    let ctx = GateContext::new(original, patched, target);
    let verdicts = vec![
        check_undefined_tokens(&ctx),
        check_infeasible_invocations(&ctx),
        check_misused_types(&ctx),
        check_solidity_version(&ctx),
        check_msg_sender(&ctx),
        check_def_use(&ctx),
        check_structural_compat(&ctx),
    ];
    let overall_pass = verdicts.iter().all(|v| v.pass);
    ValidationReport {
        verdicts,
        overall_pass,
    }
}
