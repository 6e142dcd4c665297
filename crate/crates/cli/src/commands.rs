use crate::{BenchArgs, MineArgs, RepairArgs, TaxonomyAction, TaxonomyArgs};
use acrepair_core::bench::{self, load_case_dir, load_sources, make_provider, BenchOptions, ProviderKind, CASE_FILE};
use acrepair_core::fsutil::write_atomic;
use acrepair_core::gate::Target;
use acrepair_core::llm::{LlmSession, PriceProfile, ENV_PRICE_PROFILE};
use acrepair_core::rbac::{mine_corpus, ProposeOutcome, Taxonomy, TaxonomyStore};
use acrepair_core::repair::{
    run_case, CaseOutcome, CaseReport, FollowVerdict, Operator, Q0Result, Q0Verdict, RepairCase, RepairSettings,
};
use acrepair_core::solidity::SourceUnit;
use acrepair_core::{Error, Result};
use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};

const OUT_ROOT: &str = "acrepair-out";

fn token_budget(s: &str) -> Result<Option<usize>> {
    match s.trim() {
        "none" => Ok(None),
        n => n
            .parse()
            .map(Some)
            .map_err(|_| Error::Usage(format!("--token-budget expects a number or `none`, got `{s}`"))),
    }
}

fn prices() -> Result<PriceProfile> {
    match std::env::var(ENV_PRICE_PROFILE) {
        Ok(p) => PriceProfile::load(Path::new(&p)),
        Err(_) => Ok(PriceProfile::shipped()),
    }
}

fn load_taxonomy(path: Option<&Path>) -> Result<Taxonomy> {
    match path {
        Some(p) if p.exists() => Taxonomy::load(p),
        _ => Ok(Taxonomy::shipped()),
    }
}

/// File-system friendly form of a case id.
fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn stdin_is_interactive() -> bool {
    std::io::stdin().is_terminal()
}

fn prompt_line(question: &str) -> Option<String> {
    eprint!("{question}");
    let _ = std::io::stderr().flush();
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line).ok()?;
    Some(line.trim().to_string())
}

/// Lets the user pick the target among the functions that have a body.
fn choose_function(units: &[SourceUnit]) -> Result<Target> {
    let mut names = Vec::new();
    for u in units {
        for c in &u.contracts {
            for f in c.functions.iter().filter(|f| f.has_body && !f.name.is_empty()) {
                names.push(format!("{}.{}", c.display_name(), f.name));
            }
        }
    }
    if names.is_empty() {
        return Err(Error::Usage("no function with a body to repair".into()));
    }
    for (i, n) in names.iter().enumerate() {
        eprintln!("{:>3}  {n}", i + 1);
    }
    let answer = prompt_line("Function to repair (number): ").unwrap_or_default();
    answer
        .parse::<usize>()
        .ok()
        .and_then(|i| names.get(i.wrapping_sub(1)))
        .map(|n| Target::parse(n))
        .ok_or_else(|| Error::Usage(format!("invalid choice `{answer}`")))
}

/// Asks the user to confirm the Q0 verdict.
struct AskOperator;

impl Operator for AskOperator {
    fn confirm(&mut self, _: &RepairCase, q0: &Q0Result) -> bool {
        let verdict = match q0.verdict {
            Q0Verdict::Vulnerable => "vulnerable",
            Q0Verdict::NotVulnerable => "not vulnerable",
        };
        eprintln!("Q0 verdict: {verdict}. {}", q0.reason);
        let default_yes = q0.verdict == Q0Verdict::Vulnerable;
        let hint = if default_yes { "[Y/n]" } else { "[y/N]" };
        match prompt_line(&format!("Repair the function? {hint} ")).as_deref() {
            Some("y" | "Y" | "yes") => true,
            Some("n" | "N" | "no") => false,
            _ => default_yes,
        }
    }
}

struct Prepared {
    case: RepairCase,
    transcript: Option<PathBuf>,
}

fn prepare(args: &RepairArgs) -> Result<Prepared> {
    let case_dir = match args.inputs.as_slice() {
        [one] if one.join(CASE_FILE).is_file() => Some(one.clone()),
        _ => None,
    };
    let (mut case, default_transcript) = match &case_dir {
        Some(dir) => {
            let cd = load_case_dir(dir)?;
            let t = cd.transcript_path();
            (cd.case, t.is_file().then_some(t))
        }
        None => {
            let base = match args.inputs.first() {
                Some(p) if p.is_dir() => Some(p.clone()),
                Some(p) => p.parent().map(Path::to_path_buf),
                None => None,
            };
            let units = load_sources(&args.inputs, base.as_deref())?;
            let target = match &args.function {
                Some(f) => Target::parse(f),
                None if stdin_is_interactive() => choose_function(&units)?,
                None => return Err(Error::Usage("--function is required when stdin is not a terminal".into())),
            };
            let id = format!("{}.{}", target.contract, target.function);
            (RepairCase::new(&id, units, target), None)
        }
    };
    if let (Some(f), Some(_)) = (&args.function, &case_dir) {
        case.target = Target::parse(f);
    }
    if let Some(d) = &args.description {
        case.description = Some(d.clone());
    }
    if let Some(id) = &args.case_id {
        case.id = id.clone();
    }
    if args.copilot {
        case = case.copilot();
    }
    Ok(Prepared {
        case,
        transcript: args.transcript.clone().or(default_transcript),
    })
}

fn write_outputs(out: &Path, report: &CaseReport, session: &LlmSession) -> Result<()> {
    write_atomic(&out.join("report.json"), report.to_json()?.as_bytes())?;
    write_atomic(&out.join("transcript.jsonl"), session.transcript.to_jsonl().as_bytes())?;
    let diff = out.join("patch.diff");
    let patched = out.join("patched");
    match report.patch() {
        Some(p) => {
            write_atomic(&diff, p.unified_diff.as_bytes())?;
            write_atomic(&patched.join(&p.path), p.full_patched_source.as_bytes())?;
        }
        None => {
            if diff.exists() {
                std::fs::remove_file(&diff)?;
            }
            if patched.exists() {
                std::fs::remove_dir_all(&patched)?;
            }
        }
    }
    Ok(())
}

fn summary(report: &CaseReport) -> String {
    let outcome = match &report.outcome {
        CaseOutcome::Repaired { debate } => format!("repaired ({debate:?})"),
        CaseOutcome::Skipped { reason } => format!("skipped: {reason}"),
        CaseOutcome::Failure { stage, error, .. } => format!("failed at {stage}: {error}"),
    };
    let mut s = format!("{}: {outcome}", report.target);
    if let Some(p) = &report.pair {
        s.push_str(&format!("\n  pair: ({}, {})", p.role, p.permission));
    }
    if let Some(p) = report.patch() {
        s.push_str(&format!("\n  mechanism: {:?}", p.mechanism));
    }
    if let Some(v) = &report.validation {
        let failed = v.failed_rules();
        if failed.is_empty() {
            s.push_str("\n  static checks: all passed");
        } else {
            let names: Vec<String> = failed.iter().map(ToString::to_string).collect();
            s.push_str(&format!("\n  static checks failed: {}", names.join(", ")));
        }
    }
    let totals = report.usage.totals();
    s.push_str(&format!(
        "\n  calls: {}, tokens: {}, cost: ${:.4}",
        report.usage.calls,
        totals.total(),
        report.usage.estimated_cost
    ));
    s
}

pub fn repair(args: RepairArgs, replay: bool) -> Result<i32> {
    let kind: ProviderKind = if replay { ProviderKind::Replay } else { args.provider.parse()? };
    let settings = RepairSettings {
        token_budget: token_budget(&args.token_budget)?,
        ..RepairSettings::default()
    };
    let prepared = prepare(&args)?;
    if replay && prepared.transcript.is_none() {
        return Err(Error::Usage("replay needs --transcript or a case directory with a transcript".into()));
    }
    let case = prepared.case;
    let provider = make_provider(kind, prepared.transcript.as_deref(), &case.id)?;
    let mut session = LlmSession::new(provider, &case.id, prices()?);
    let taxonomy = load_taxonomy(args.taxonomy.as_deref())?;
    let store = TaxonomyStore::new(taxonomy, args.taxonomy.clone());
    let mut operator: Box<dyn Operator> = if args.yes || !stdin_is_interactive() {
        Box::new(FollowVerdict)
    } else {
        Box::new(AskOperator)
    };
    let report = run_case(&case, &mut session, &store, operator.as_mut(), &settings);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| Path::new(OUT_ROOT).join(slug(&case.id)));
    write_outputs(&out, &report, &session)?;
    println!("{}", summary(&report));
    println!("  output: {}", out.display());
    Ok(report.exit_code())
}

pub fn mine(args: MineArgs) -> Result<i32> {
    if !args.dir.is_dir() {
        return Err(Error::InputNotFound(args.dir.display().to_string()));
    }
    let (pairs, stats) = mine_corpus(&args.dir, args.top)?;
    let out = args.out.unwrap_or_else(|| Path::new(OUT_ROOT).join("mine"));
    let doc = serde_json::json!({ "pairs": pairs, "stats": stats });
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(&out.join("mining.json"), text.as_bytes())?;
    for (i, p) in pairs.iter().enumerate() {
        println!("{:>3}  {:>4}  ({}, {})", i + 1, p.count, p.role, p.permission);
    }
    println!(
        "pairs: {} total, {} unique; top-{} coverage {:.2}%",
        stats.total_pairs,
        stats.unique_pairs,
        stats.k,
        stats.top_k_coverage * 100.0
    );
    println!("output: {}", out.display());
    Ok(0)
}

pub fn taxonomy(args: TaxonomyArgs) -> Result<i32> {
    let path = args.taxonomy.as_deref();
    match args.action {
        TaxonomyAction::List => {
            let t = load_taxonomy(path)?;
            for role in t.roles() {
                println!("{role}");
                for e in t.entries.iter().filter(|e| e.role == role) {
                    println!("  - {}", e.permission);
                }
            }
            println!("{} pairs", t.entries.len());
        }
        TaxonomyAction::Export { out } => {
            write_atomic(&out, load_taxonomy(path)?.to_toml().as_bytes())?;
            println!("wrote {}", out.display());
        }
        TaxonomyAction::Add {
            role,
            permission,
            checks,
        } => {
            let path = path.ok_or_else(|| Error::Usage("taxonomy add needs --taxonomy <file>".into()))?;
            let store = TaxonomyStore::new(load_taxonomy(Some(path))?, Some(path.to_path_buf()));
            let added_at = chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string();
            match store.update(|t| t.propose(&role, &permission, &checks, Some(added_at)))? {
                ProposeOutcome::Added { entry } => println!("added {}", entry.label()),
                ProposeOutcome::DuplicateOf { entry } => println!("already present as {}", entry.label()),
                ProposeOutcome::Rejected { reason } => return Err(Error::Taxonomy(reason)),
            }
            println!("{} pairs", store.snapshot().entries.len());
        }
    }
    Ok(0)
}

pub fn bench(args: BenchArgs) -> Result<i32> {
    let opts = BenchOptions {
        provider: args.provider.parse()?,
        jobs: args.jobs,
        settings: RepairSettings {
            token_budget: token_budget(&args.token_budget)?,
            ..RepairSettings::default()
        },
        taxonomy: load_taxonomy(args.taxonomy.as_deref())?,
        prices: prices()?,
    };
    let (result, reports) = bench::run_bench(&args.root, &opts)?;
    let out = args.out.unwrap_or_else(|| Path::new(OUT_ROOT).join("bench"));
    for r in &reports {
        write_atomic(&out.join("cases").join(slug(&r.case_id)).join("report.json"), r.to_json()?.as_bytes())?;
    }
    let mut text = serde_json::to_string_pretty(&result).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    write_atomic(&out.join("bench.json"), text.as_bytes())?;
    for c in &result.cases {
        let mark = if c.success { "ok  " } else { "FAIL" };
        println!("{mark} {:<28} {}", c.name, c.status);
    }
    println!("rate_gen: {:.4}  rate_success: {:.4}", result.rate_gen, result.rate_success);
    println!("output: {}", out.display());
    Ok(0)
}
