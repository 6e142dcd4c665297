//! Q0-Q4 repair pipeline: vulnerability confirmation, RBAC identification,
//! pair selection, patch generation and the generator/validator debate.

mod diff;
mod orchestrator;
pub mod prompts;
mod report;
mod splice;

pub use diff::{apply_unified, unified_diff};
pub use orchestrator::{run_case, AlwaysProceed, FollowVerdict, Operator, Pipeline, RepairSettings};
pub use prompts::PromptEnvelope;
pub use report::{AcgSummary, CaseOutcome, CaseReport};
pub use splice::{dedent, splice, strip_fences, PatchParts, Spliced};

use crate::gate::{Rule, Target};
use crate::solidity::SourceUnit;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Resolve,
    Q0,
    Q1,
    Acg,
    Q2,
    Q3,
    Gate,
    Q4,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Mode {
    ConfirmedInput,
    Copilot,
}

#[derive(Debug, Clone)]
pub struct RepairCase {
    pub id: String,
    pub units: Vec<SourceUnit>,
    pub target: Target,
    pub description: Option<String>,
    pub mode: Mode,
}

impl RepairCase {
    pub fn new(id: &str, units: Vec<SourceUnit>, target: Target) -> Self {
        RepairCase {
            id: id.to_string(),
            units,
            target,
            description: None,
            mode: Mode::ConfirmedInput,
        }
    }

    pub fn with_description(mut self, d: impl Into<String>) -> Self {
        self.description = Some(d.into());
        self
    }

    pub fn copilot(mut self) -> Self {
        self.mode = Mode::Copilot;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Q0Verdict {
    Vulnerable,
    NotVulnerable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Q0Result {
    pub verdict: Q0Verdict,
    pub reason: String,
    /// False when no reply could be read and the verdict is the fallback.
    pub parsed: bool,
    pub confirmed: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TaxonomyChange {
    Existing,
    Added,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairChoice {
    pub role: String,
    pub permission: String,
    pub is_new: bool,
    pub reason: String,
    /// Matching taxonomy entry as `Role - Permission`.
    pub taxonomy_entry: String,
    pub taxonomy_change: TaxonomyChange,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairUsed {
    pub role: String,
    pub permission: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Mechanism {
    ReusedModifier { name: String },
    NewModifier { name: String },
    InlineRequire,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub pair_used: PairUsed,
    pub mechanism: Mechanism,
    /// Path of the rewritten source unit.
    pub path: String,
    pub patched_function_text: String,
    pub full_patched_source: String,
    pub unified_diff: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum FeedbackCategory {
    IncorrectRole,
    MissingValidation,
    LogicConflict,
    Other,
}

impl FeedbackCategory {
    pub fn parse(s: &str) -> FeedbackCategory {
        let k: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        match k.as_str() {
            "incorrectrole" | "wrongrole" | "role" => FeedbackCategory::IncorrectRole,
            "missingvalidation" | "missingcheck" | "validation" => FeedbackCategory::MissingValidation,
            "logicconflict" | "logic" | "conflict" => FeedbackCategory::LogicConflict,
            _ => FeedbackCategory::Other,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FeedbackCategory::IncorrectRole => "incorrectRole",
            FeedbackCategory::MissingValidation => "missingValidation",
            FeedbackCategory::LogicConflict => "logicConflict",
            FeedbackCategory::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub reason: String,
    pub category: FeedbackCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub accepted: bool,
    pub reason: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub category: Option<FeedbackCategory>,
}

/// One generated patch and what the checks and the validator made of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub round: u8,
    pub static_loop: usize,
    pub unified_diff: String,
    pub failed_rules: Vec<Rule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub review: Option<Review>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DebateOutcome {
    Accepted,
    ExhaustedKeptLast,
    StaticRejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DebateState {
    pub round: u8,
    pub candidate_patch: Option<Patch>,
    pub validator_feedback: Vec<Feedback>,
    /// `None` while the loop runs or after it was cut short by an error.
    pub outcome: Option<DebateOutcome>,
    pub attempts: Vec<Attempt>,
}
