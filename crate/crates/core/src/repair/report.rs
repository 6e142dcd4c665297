use super::{DebateOutcome, DebateState, Mode, PairChoice, Patch, Q0Result, RepairCase, Stage};
use crate::error::Result;
use crate::gate::ValidationReport;
use crate::llm::{PriceProfile, UsageLedger};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum CaseOutcome {
    Repaired { debate: DebateOutcome },
    Skipped { reason: String },
    Failure { stage: Stage, error: String, exit_code: i32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcgSummary {
    pub nodes: usize,
    pub edges: usize,
    pub estimated_tokens: usize,
    pub token_budget: Option<usize>,
    pub truncated: bool,
    /// `kind contract.name` of every node.
    pub elements: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub target: String,
    pub mode: Mode,
    pub provider: String,
    pub outcome: CaseOutcome,
    pub q0: Option<Q0Result>,
    pub rbac_elements: Vec<String>,
    pub pair: Option<PairChoice>,
    pub acg: Option<AcgSummary>,
    pub debate: Option<DebateState>,
    pub validation: Option<ValidationReport>,
    pub usage: UsageLedger,
    pub durations_ms: BTreeMap<Stage, u64>,
    pub warnings: Vec<String>,
}

impl CaseReport {
    pub fn new(case: &RepairCase, provider: &str) -> Self {
        CaseReport {
            case_id: case.id.clone(),
            target: format!("{}.{}", case.target.contract, case.target.function),
            mode: case.mode,
            provider: provider.to_string(),
            outcome: CaseOutcome::Skipped {
                reason: "not started".into(),
            },
            q0: None,
            rbac_elements: Vec::new(),
            pair: None,
            acg: None,
            debate: None,
            validation: None,
            usage: UsageLedger::new(PriceProfile::shipped()),
            durations_ms: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn patch(&self) -> Option<&Patch> {
        self.debate.as_ref().and_then(|d| d.candidate_patch.as_ref())
    }

    pub fn succeeded(&self) -> bool {
        matches!(
            self.outcome,
            CaseOutcome::Repaired {
                debate: DebateOutcome::Accepted | DebateOutcome::ExhaustedKeptLast
            }
        )
    }

    /// 0 for a repaired or skipped case, 2 when every patch failed the
    /// static checks, the error's code otherwise.
    pub fn exit_code(&self) -> i32 {
        match &self.outcome {
            CaseOutcome::Repaired {
                debate: DebateOutcome::StaticRejected,
            } => 2,
            CaseOutcome::Repaired { .. } | CaseOutcome::Skipped { .. } => 0,
            CaseOutcome::Failure { exit_code, .. } => *exit_code,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| crate::Error::Format(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}
