//! Case directories, provider selection and benchmark scoring.
//!
//! A case directory holds the contract sources (`*.sol`), a `case.toml`, the
//! recorded `transcript.jsonl` and optionally the expected `golden.diff`.

use crate::error::{Error, Result};
use crate::gate::Target;
use crate::llm::{LiveProvider, LlmSession, PriceProfile, Provider, ReplayProvider, Transcript};
use crate::rbac::{Taxonomy, TaxonomyStore};
use crate::repair::{run_case, CaseOutcome, CaseReport, FollowVerdict, RepairCase, RepairSettings};
use crate::solidity::{parse_sources, SourceUnit};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

pub const CASE_FILE: &str = "case.toml";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const GOLDEN_FILE: &str = "golden.diff";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Expectation {
    pub role: Option<String>,
    pub permission: Option<String>,
    /// Expected Q0 verdict: `vulnerable` or `not_vulnerable`.
    pub q0: Option<String>,
    /// Ground truth of a detector report: `tp` or `fp`.
    pub truth: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub target: String,
    pub description: Option<String>,
    #[serde(default)]
    pub copilot: bool,
    #[serde(default)]
    pub expect: Expectation,
}

#[derive(Debug, Clone)]
pub struct CaseDir {
    pub name: String,
    pub dir: PathBuf,
    pub spec: CaseSpec,
    pub case: RepairCase,
    pub golden: Option<String>,
}

impl CaseDir {
    pub fn transcript_path(&self) -> PathBuf {
        self.dir.join(TRANSCRIPT_FILE)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::InputNotFound(path.display().to_string()),
        _ => Error::Io(e),
    })
}

fn is_solidity(p: &Path) -> bool {
    p.extension().is_some_and(|e| e == "sol")
}

/// Parses the given files and every `.sol` file below the given
/// directories. Unit paths are shown relative to `base` when possible.
pub fn load_sources(paths: &[PathBuf], base: Option<&Path>) -> Result<Vec<SourceUnit>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = walkdir::WalkDir::new(p)
                .into_iter()
                .filter_map(|e| e.ok())
                .map(|e| e.into_path())
                .filter(|f| f.is_file() && is_solidity(f))
                .collect();
            found.sort();
            files.extend(found);
        } else if p.is_file() {
            files.push(p.clone());
        } else {
            return Err(Error::InputNotFound(p.display().to_string()));
        }
    }
    let mut texts = Vec::new();
    for f in files {
        let shown = base
            .and_then(|b| f.strip_prefix(b).ok())
            .unwrap_or(&f)
            .to_string_lossy()
            .replace('\\', "/");
        texts.push((shown, read(&f)?));
    }
    parse_sources(&texts)
}

pub fn load_case_dir(dir: &Path) -> Result<CaseDir> {
    let spec: CaseSpec =
        toml::from_str(&read(&dir.join(CASE_FILE))?).map_err(|e| Error::Format(format!("{}: {e}", dir.display())))?;
    let mut sols: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|_| Error::InputNotFound(dir.display().to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_solidity(p))
        .collect();
    sols.sort();
    let units = load_sources(&sols, Some(dir))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_else(|| "case".into());
    let mut case = RepairCase::new(&name, units, Target::parse(&spec.target));
    case.description = spec.description.clone();
    if spec.copilot {
        case = case.copilot();
    }
    let golden_path = dir.join(GOLDEN_FILE);
    let golden = golden_path.is_file().then(|| read(&golden_path)).transpose()?;
    Ok(CaseDir {
        name,
        dir: dir.to_path_buf(),
        spec,
        case,
        golden,
    })
}

/// Subdirectories of `root` holding a `case.toml`, sorted by name.
pub fn discover_cases(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(root).map_err(|_| Error::InputNotFound(root.display().to_string()))?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(CASE_FILE).is_file())
        .collect();
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Live,
    Replay,
    Mock,
}

impl FromStr for ProviderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "live" => Ok(ProviderKind::Live),
            "replay" => Ok(ProviderKind::Replay),
            "mock" => Ok(ProviderKind::Mock),
            _ => Err(Error::Usage(format!("unknown provider `{s}` (live, replay, mock)"))),
        }
    }
}

/// `replay` answers strictly from a recorded transcript, `mock` returns its
/// responses in order without comparing requests, `live` calls the
/// configured endpoint.
pub fn make_provider(kind: ProviderKind, transcript: Option<&Path>, case_id: &str) -> Result<Arc<dyn Provider>> {
    let recorded = |p: Option<&Path>| -> Result<Transcript> {
        let p = p.ok_or_else(|| Error::Usage("--transcript is required for replay and mock providers".into()))?;
        let all = Transcript::load(p)?;
        let mine = all.for_case(case_id);
        Ok(if mine.records.is_empty() { all } else { mine })
    };
    Ok(match kind {
        ProviderKind::Live => Arc::new(LiveProvider::from_env()?),
        ProviderKind::Replay => Arc::new(ReplayProvider::new(recorded(transcript)?)),
        ProviderKind::Mock => Arc::new(ReplayProvider::lenient(recorded(transcript)?)),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchCaseResult {
    pub name: String,
    pub status: String,
    pub generated: bool,
    pub pair_match: bool,
    /// `None` when the case has no golden diff.
    pub golden_match: Option<bool>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub cases: Vec<BenchCaseResult>,
    pub rate_gen: f64,
    pub rate_success: f64,
}

/// Rates over all cases: generated patches, and generated patches whose
/// pair and golden diff both match.
pub fn score(cases: Vec<BenchCaseResult>) -> BenchResult {
    let n = cases.len();
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let generated = cases.iter().filter(|c| c.generated).count();
    let success = cases.iter().filter(|c| c.success).count();
    BenchResult {
        rate_gen: rate(generated),
        rate_success: rate(success),
        cases,
    }
}

fn status(outcome: &CaseOutcome) -> String {
    match outcome {
        CaseOutcome::Repaired { debate } => format!("{debate:?}"),
        CaseOutcome::Skipped { .. } => "Skipped".into(),
        CaseOutcome::Failure { stage, .. } => format!("Failure({stage})"),
    }
}

/// Judges one report against the case's stored labels.
pub fn judge(cd: &CaseDir, report: &CaseReport, taxonomy: &Taxonomy) -> BenchCaseResult {
    let generated = report.succeeded();
    let pair_match = match (&report.pair, &cd.spec.expect.role, &cd.spec.expect.permission) {
        (Some(p), Some(r), Some(q)) => taxonomy.normalize(&p.role, &p.permission) == taxonomy.normalize(r, q),
        _ => false,
    };
    let golden_match = cd
        .golden
        .as_ref()
        .map(|g| report.patch().is_some_and(|p| &p.unified_diff == g));
    BenchCaseResult {
        name: cd.name.clone(),
        status: status(&report.outcome),
        generated,
        pair_match,
        golden_match,
        success: generated && pair_match && golden_match.unwrap_or(true),
    }
}

pub struct BenchOptions {
    pub provider: ProviderKind,
    pub jobs: usize,
    pub settings: RepairSettings,
    pub taxonomy: Taxonomy,
    pub prices: PriceProfile,
}

/// Runs every case under `root` in parallel. Each case starts from its own
/// copy of the taxonomy so recorded prompts do not depend on run order.
pub fn run_bench(root: &Path, opts: &BenchOptions) -> Result<(BenchResult, Vec<CaseReport>)> {
    let dirs = discover_cases(root)?;
    let cases: Vec<CaseDir> = dirs.iter().map(|d| load_case_dir(d)).collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(e.to_string()))?;
    let outcomes: Vec<(BenchCaseResult, CaseReport)> = pool.install(|| {
        cases
            .par_iter()
            .map(|cd| {
                let transcript = cd.transcript_path();
                let provider = make_provider(opts.provider, Some(&transcript), &cd.case.id);
                let report = match provider {
                    Ok(p) => {
                        let mut session = LlmSession::new(p, &cd.case.id, opts.prices.clone());
                        let store = TaxonomyStore::new(opts.taxonomy.clone(), None);
                        run_case(&cd.case, &mut session, &store, &mut FollowVerdict, &opts.settings)
                    }
                    Err(e) => {
                        let mut r = CaseReport::new(&cd.case, opts.provider_name());
                        r.outcome = CaseOutcome::Failure {
                            stage: crate::repair::Stage::Resolve,
                            error: e.to_string(),
                            exit_code: e.exit_code(),
                        };
                        r
                    }
                };
                (judge(cd, &report, &opts.taxonomy), report)
            })
            .collect()
    });
    let (results, reports): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    Ok((score(results), reports))
}

impl BenchOptions {
    fn provider_name(&self) -> &'static str {
        match self.provider {
            ProviderKind::Live => "live",
            ProviderKind::Replay => "replay",
            ProviderKind::Mock => "mock",
        }
    }
}
