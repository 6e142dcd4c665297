//! The ten acceptance criteria. Each check prints one PASS/FAIL line with
//! its running time; the test fails if any criterion fails.

mod common;

use acrepair_core::acg::slice_operations;
use acrepair_core::bench::{discover_cases, load_case_dir, CaseDir};
use acrepair_core::gate::{validate, Rule};
use acrepair_core::graphs::{state_vars_touched, Analysis};
use acrepair_core::llm::{
    parse_structured, ChatMessage, LlmSession, PriceProfile, ReplayProvider, ScriptedProvider, ScriptedReply,
    Transcript, Usage,
};
use acrepair_core::rbac::{mine_corpus, Taxonomy, TaxonomyStore};
use acrepair_core::repair::*;
use acrepair_core::Error;
use common::{cases, fixtures, gate_cases, header, load, oracle_slice};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

type Check = std::result::Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn bench_case(name: &str) -> CaseDir {
    load_case_dir(&cases::root("bench").join(name)).unwrap()
}

fn replay(cd: &CaseDir, store: &TaxonomyStore) -> (CaseReport, usize) {
    let transcript = Transcript::load(&cd.transcript_path()).unwrap();
    let provider = Arc::new(ReplayProvider::new(transcript));
    let mut session = LlmSession::new(provider.clone(), &cd.case.id, PriceProfile::shipped());
    let report = run_case(&cd.case, &mut session, store, &mut FollowVerdict, &RepairSettings::default());
    (report, provider.remaining())
}

fn taxonomy_fidelity() -> Check {
    let t = Taxonomy::shipped();
    ensure!(t.entries.len() == 48, "shipped taxonomy has {} entries", t.entries.len());
    ensure!(t.roles().len() == 8, "shipped taxonomy has {} roles", t.roles().len());
    let store = TaxonomyStore::new(t, None);
    let (report, left) = replay(&bench_case("05_relay_executor"), &store);
    ensure!(left == 0 && report.succeeded(), "low-level call replay: {:?}", report.outcome);
    let after = store.snapshot();
    ensure!(after.entries.len() == 49, "extended taxonomy has {} entries", after.entries.len());
    ensure!(after.find("Admin", "Low-level call").is_some(), "Admin / Low-level call missing after replay");
    Ok(())
}

fn mining_oracle() -> Check {
    let want: Vec<(u64, String, String, String)> = std::fs::read_to_string(fixtures().join("mining_expected.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].to_string(), f[3].to_string())
        })
        .collect();
    let corpus = fixtures().join("corpus");
    let files = std::fs::read_dir(&corpus).unwrap().count();
    ensure!(files == 20, "desk corpus has {files} contracts");
    let k = 5;
    let (ranked, stats) = mine_corpus(&corpus, k).map_err(|e| e.to_string())?;
    let got: BTreeMap<(String, String), u64> =
        ranked.iter().map(|p| ((p.role.clone(), p.permission.clone()), p.count)).collect();
    let expected: BTreeMap<(String, String), u64> =
        want.iter().map(|w| ((w.1.clone(), w.2.clone()), w.0)).collect();
    ensure!(got == expected, "pair multiset differs:\n got {got:?}\nwant {expected:?}");
    for w in ranked.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let ordered = a.count > b.count || (a.count == b.count && (&a.role, &a.permission) < (&b.role, &b.permission));
        ensure!(ordered, "ranking puts ({}, {}) before ({}, {})", a.role, a.permission, b.role, b.permission);
    }
    let total: u64 = want.iter().map(|w| w.0).sum();
    let mut counts: Vec<u64> = want.iter().map(|w| w.0).collect();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let top: u64 = counts.iter().take(k).sum();
    ensure!(stats.total_pairs == total, "total {} != {total}", stats.total_pairs);
    ensure!(stats.unique_pairs == want.len(), "unique {} != {}", stats.unique_pairs, want.len());
    let coverage = top as f64 / total as f64;
    ensure!((stats.top_k_coverage - coverage).abs() < 1e-12, "coverage {} != {coverage}", stats.top_k_coverage);
    Ok(())
}

fn slicing_oracle() -> Check {
    let mut contracts = 0;
    let mut cross = 0;
    let mut paths: Vec<_> = std::fs::read_dir(fixtures().join("slicing"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    for path in paths {
        let rel = format!("slicing/{}", path.file_name().unwrap().to_string_lossy());
        let u = [load(&rel)];
        for c in &u[0].contracts {
            ensure!(c.functions.len() <= 5, "{rel}: {} has {} functions", c.name, c.functions.len());
        }
        let a = Analysis::new(&u);
        let target = header(&u[0], "target").ok_or(format!("{rel}: no target header"))?;
        let f = a.program.find_function(&target, None).ok_or(format!("{rel}: {target} not found"))?;
        let vars = state_vars_touched(&a.program, &a.cg, f);
        let names: BTreeSet<String> = vars.iter().map(|v| a.program.state_var(*v).name.clone()).collect();
        let got = slice_operations(&a, &vars).retained;
        let want = oracle_slice(&a.program, &names);
        ensure!(got == want, "{rel}: retained {got:?}, oracle {want:?}");
        if got.iter().map(|(c, _)| *c).collect::<BTreeSet<_>>().len() > 1 {
            cross += 1;
        }
        contracts += 1;
    }
    ensure!(contracts >= 10, "only {contracts} slicing fixtures");
    ensure!(cross >= 3, "only {cross} cross-function fixtures");
    Ok(())
}

fn gate_suite() -> Check {
    let mut pass: BTreeMap<Rule, usize> = BTreeMap::new();
    let mut fail: BTreeMap<Rule, usize> = BTreeMap::new();
    let prefixes = [
        (Rule::UndefinedTokens, "undefined_"),
        (Rule::InfeasibleInvocation, "invocation_"),
        (Rule::MisusedTypes, "types_"),
        (Rule::SolidityVersion, "version_"),
        (Rule::MsgSenderCheck, "sender_"),
        (Rule::DefUse, "defuse_"),
        (Rule::StructuralCompat, "structure_"),
    ];
    let (mut constructor_case, mut misspelled_case) = (false, false);
    let all = gate_cases();
    for case in &all {
        let report = validate(
            std::slice::from_ref(&case.original),
            std::slice::from_ref(&case.patched),
            &case.target,
        );
        let failed = report.failed_rules();
        let expected: Vec<Rule> = case.fails.into_iter().collect();
        // rule independence: a fixture aimed at one rule trips no other
        ensure!(failed == expected, "{}: expected {expected:?}, got {failed:?}", case.name);
        let rule = prefixes
            .iter()
            .find(|(_, p)| case.name.starts_with(p))
            .map(|(r, _)| *r)
            .ok_or(format!("{}: unknown prefix", case.name))?;
        match case.fails {
            Some(_) => *fail.entry(rule).or_default() += 1,
            None => *pass.entry(rule).or_default() += 1,
        }
        let note = header(&case.patched, "note").unwrap_or_default();
        if case.fails == Some(Rule::SolidityVersion)
            && case.patched.raw.contains("^0.4")
            && case.patched.raw.contains("constructor(")
        {
            constructor_case = true;
        }
        if case.fails == Some(Rule::DefUse) && note.contains("misspelled") {
            misspelled_case = true;
        }
    }
    ensure!(all.len() >= 14, "only {} gate fixtures", all.len());
    for r in Rule::ALL {
        let (p, f) = (pass.get(&r).copied().unwrap_or(0), fail.get(&r).copied().unwrap_or(0));
        ensure!(p >= 2 && f >= 2, "{r}: {p} pass and {f} fail fixtures");
    }
    ensure!(constructor_case, "no ^0.4 constructor fixture");
    ensure!(misspelled_case, "no misspelled-variable fixture");
    Ok(())
}

fn patch_reply(extra: &str) -> ScriptedReply {
    ScriptedReply::Text(
        json!({
            "patched_function": format!(
                "function depositFromOtherContract(uint256 _depositAmount, uint8 _periodId, bool isUnlocked, address _from) \
                 external onlyBank {{\n{extra}    require(isPoolActive,'Not running yet');\n    \
                 _autoDeposit(_depositAmount,_periodId,isUnlocked,_from);\n}}"
            ),
            "new_declarations": "",
            "replaced_declarations": "",
        })
        .to_string(),
    )
}

fn review(accepted: bool, round: usize) -> ScriptedReply {
    let v = if accepted { "accept" } else { "reject" };
    ScriptedReply::Text(json!({"verdict": v, "reason": format!("round {round}"), "category": "missingValidation"}).to_string())
}

fn mad_state_machine() -> Check {
    let cd = bench_case("01_deposit_pool");
    let extras = [
        "",
        "    require(_from != address(0), \"DepositPool: zero account\");\n",
        "    require(_depositAmount > 0, \"DepositPool: zero amount\");\n",
        "    require(_periodId < 12, \"DepositPool: bad period\");\n",
    ];
    let head = || -> Vec<ScriptedReply> {
        vec![
            ScriptedReply::Text(json!({"rbac_elements": ["onlyBank"]}).to_string()),
            ScriptedReply::Text(json!({"role": "Bank", "permission": "Deposit", "is_new": false}).to_string()),
            patch_reply(extras[0]),
        ]
    };
    let settings = RepairSettings::default();
    let run = |replies: Vec<ScriptedReply>| {
        let provider = Arc::new(ScriptedProvider::new(replies));
        let mut session = LlmSession::new(provider.clone(), &cd.case.id, PriceProfile::shipped());
        let store = TaxonomyStore::new(Taxonomy::shipped(), None);
        let report = run_case(&cd.case, &mut session, &store, &mut FollowVerdict, &settings);
        (report, provider.remaining())
    };
    let mut rounds = BTreeSet::new();
    for k in 0..=3usize {
        let mut replies = head();
        for r in 0..k {
            replies.push(review(false, r));
            replies.push(patch_reply(extras[r + 1]));
        }
        replies.push(review(true, k));
        let (report, left) = run(replies);
        let d = report.debate.ok_or("no debate state")?;
        ensure!(left == 0, "script {k}: {left} replies unused");
        ensure!(d.outcome == Some(DebateOutcome::Accepted), "script {k}: {:?}", d.outcome);
        ensure!(d.round <= 3, "script {k}: round {}", d.round);
        rounds.insert(d.round);
    }
    ensure!(rounds == BTreeSet::from([0, 1, 2, 3]), "rounds {rounds:?}");
    let mut replies = head();
    for r in 0..4 {
        replies.push(review(false, r));
        if r < 3 {
            replies.push(patch_reply(extras[r + 1]));
        }
    }
    let (report, left) = run(replies);
    let d = report.debate.ok_or("no debate state")?;
    ensure!(left == 0, "exhaustion script left {left} replies");
    ensure!(d.outcome == Some(DebateOutcome::ExhaustedKeptLast), "exhaustion: {:?}", d.outcome);
    ensure!(d.round == 3, "exhaustion round {}", d.round);
    let last = d.candidate_patch.ok_or("no patch retained")?;
    ensure!(last.patched_function_text.contains("_periodId < 12"), "retained patch is not the last one");
    Ok(())
}

fn golden_end_to_end() -> Check {
    let cd = bench_case("01_deposit_pool");
    let golden = cd.golden.clone().ok_or("no golden diff")?;
    let mut diffs = Vec::new();
    for run in 0..2 {
        let store = TaxonomyStore::new(Taxonomy::shipped(), None);
        let (report, left) = replay(&cd, &store);
        ensure!(left == 0, "run {run}: {left} recorded responses unused");
        ensure!(report.succeeded(), "run {run}: {:?}", report.outcome);
        let pair = report.pair.as_ref().ok_or("no pair")?;
        let norm = store.snapshot().normalize(&pair.role, &pair.permission);
        ensure!(norm == store.snapshot().normalize("Bank", "Deposit"), "pair ({}, {})", pair.role, pair.permission);
        let patch = report.patch().ok_or("no patch")?;
        ensure!(
            patch.mechanism == Mechanism::ReusedModifier { name: "onlyBank".into() },
            "mechanism {:?}",
            patch.mechanism
        );
        let adds_modifier = patch
            .unified_diff
            .lines()
            .any(|l| l.starts_with('+') && !l.starts_with("+++") && l.contains("external onlyBank {"));
        ensure!(adds_modifier, "diff does not add onlyBank");
        let v = report.validation.as_ref().ok_or("no validation")?;
        ensure!(v.verdicts.len() == 7 && v.overall_pass, "static checks: {:?}", v.failed_rules());
        ensure!(patch.unified_diff == golden, "run {run}: diff differs from golden\n{}", patch.unified_diff);
        diffs.push(patch.unified_diff.clone());
    }
    ensure!(diffs[0] == diffs[1], "runs differ");
    Ok(())
}

/// Requests of one copilot run covering Q0 through Q4.
fn prompts_of(name: &str, store: &TaxonomyStore) -> Vec<Vec<ChatMessage>> {
    let cd = bench_case(name);
    let case = cd.case.clone().copilot();
    let mut replies = vec![ScriptedReply::Text(json!({"vulnerable": true, "reason": "no caller check"}).to_string())];
    replies.extend(cases::replies(&cd.dir).into_iter().map(ScriptedReply::Text));
    let provider = Arc::new(ScriptedProvider::new(replies));
    let mut session = LlmSession::new(provider.clone(), &case.id, PriceProfile::shipped());
    run_case(&case, &mut session, store, &mut AlwaysProceed, &RepairSettings::default());
    provider.requests()
}

fn prompt_determinism() -> Check {
    let names = ["01_deposit_pool", "02_reward_token", "04_wallet_init"];
    let orders: [[usize; 3]; 3] = [[0, 1, 2], [2, 0, 1], [1, 2, 0]];
    let mut seen: BTreeMap<&str, Vec<Vec<ChatMessage>>> = BTreeMap::new();
    for order in orders {
        let store = TaxonomyStore::new(Taxonomy::shipped(), None);
        for &i in &order {
            let reqs = prompts_of(names[i], &store);
            let last_user: Vec<&str> = reqs.iter().map(|r| r.last().map(|m| m.content.as_str()).unwrap_or("")).collect();
            ensure!(reqs.len() == 5, "{}: {} requests", names[i], reqs.len());
            ensure!(last_user[0].contains("Detector report:"), "{}: first prompt is not Q0", names[i]);
            ensure!(last_user[4].contains("Patch for"), "{}: last prompt is not Q4", names[i]);
            match seen.get(names[i]) {
                Some(prev) => ensure!(*prev == reqs, "{}: prompts differ across orderings", names[i]),
                None => {
                    seen.insert(names[i], reqs);
                }
            }
        }
    }
    Ok(())
}

fn accounting() -> Check {
    let cd = bench_case("01_deposit_pool");
    let usages: Vec<Usage> = (0..4u64)
        .map(|i| Usage {
            prompt_tokens: 1200 + 37 * i,
            completion_tokens: 150 + 11 * i,
        })
        .collect();
    let replies: Vec<ScriptedReply> = cases::replies(&cd.dir)
        .into_iter()
        .zip(&usages)
        .map(|(t, u)| ScriptedReply::TextWithUsage(t, *u))
        .collect();
    let provider = Arc::new(ScriptedProvider::new(replies));
    let mut session = LlmSession::new(provider, &cd.case.id, PriceProfile::shipped());
    let store = TaxonomyStore::new(Taxonomy::shipped(), None);
    let report = run_case(&cd.case, &mut session, &store, &mut FollowVerdict, &RepairSettings::default());
    ensure!(report.succeeded(), "{:?}", report.outcome);
    let ledger = &report.usage;
    let sp: u64 = usages.iter().map(|u| u.prompt_tokens).sum();
    let sc: u64 = usages.iter().map(|u| u.completion_tokens).sum();
    ensure!(ledger.calls == 4, "{} calls", ledger.calls);
    ensure!(ledger.prompt_tokens == sp && ledger.completion_tokens == sc, "totals {ledger:?}");
    let prices = PriceProfile::shipped();
    let expected = sp as f64 / 1000.0 * prices.prompt_per_1k + sc as f64 / 1000.0 * prices.completion_per_1k;
    ensure!((ledger.estimated_cost - expected).abs() < 1e-9, "cost {} != {expected}", ledger.estimated_cost);
    let recorded: u64 = session.transcript.records.iter().map(|r| r.usage.total()).sum();
    ensure!(recorded == sp + sc, "transcript usage {recorded}");
    Ok(())
}

fn q0_replay() -> Check {
    let dirs = discover_cases(&cases::root("q0")).map_err(|e| e.to_string())?;
    ensure!(dirs.len() == 10, "{} Q0 cases", dirs.len());
    let (mut tp, mut fp, mut missed) = (0, 0, 0);
    let settings = RepairSettings::default();
    for dir in dirs {
        let cd = load_case_dir(&dir).map_err(|e| e.to_string())?;
        let transcript = Transcript::load(&cd.transcript_path()).map_err(|e| e.to_string())?;
        let provider = Arc::new(ReplayProvider::new(transcript));
        let mut session = LlmSession::new(provider.clone(), &cd.case.id, PriceProfile::shipped());
        let store = TaxonomyStore::new(Taxonomy::shipped(), None);
        let mut p = Pipeline::new(&cd.case, &mut session, &store, &settings).map_err(|e| e.to_string())?;
        let q0 = p.run_q0().map_err(|e| format!("{}: {e}", cd.name))?;
        ensure!(provider.remaining() == 0, "{}: responses left", cd.name);
        let got = match q0.verdict {
            Q0Verdict::Vulnerable => "vulnerable",
            Q0Verdict::NotVulnerable => "not_vulnerable",
        };
        let want = cd.spec.expect.q0.as_deref().ok_or(format!("{}: no expectation", cd.name))?;
        ensure!(got == want, "{}: {got}, expected {want}", cd.name);
        match cd.spec.expect.truth.as_deref() {
            Some("tp") => {
                tp += 1;
                if q0.verdict != Q0Verdict::Vulnerable {
                    missed += 1;
                }
            }
            Some("fp") => fp += 1,
            other => return Err(format!("{}: truth {other:?}", cd.name)),
        }
    }
    ensure!(tp == 5 && fp == 5, "{tp} TP and {fp} FP cases");
    ensure!(missed == 0, "{missed} TP cases missed");
    Ok(())
}

fn robust_parsing() -> Check {
    let dir = fixtures().join("parse");
    for i in 1..=20 {
        let text = std::fs::read_to_string(dir.join(format!("positive_{i:02}.txt"))).unwrap();
        let want: Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("positive_{i:02}.expected.json"))).unwrap())
                .unwrap();
        let got = parse_structured(&text).map_err(|e| format!("positive_{i:02}: {e}"))?;
        ensure!(got == want, "positive_{i:02}: {got} != {want}");
    }
    for i in 1..=5 {
        let text = std::fs::read_to_string(dir.join(format!("negative_{i:02}.txt"))).unwrap();
        match parse_structured(&text) {
            Err(Error::Unparseable(_)) => {}
            other => return Err(format!("negative_{i:02}: {other:?}")),
        }
    }
    Ok(())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check, Duration); 10] = [
        ("1 taxonomy fidelity", taxonomy_fidelity, Duration::from_secs(1)),
        ("2 mining oracle", mining_oracle, Duration::from_secs(5)),
        ("3 slicing oracle", slicing_oracle, Duration::from_secs(10)),
        ("4 patch-gate suite", gate_suite, Duration::from_secs(5)),
        ("5 MAD state machine", mad_state_machine, Duration::from_secs(1)),
        ("6 golden end-to-end", golden_end_to_end, Duration::from_secs(5)),
        ("7 prompt determinism", prompt_determinism, Duration::from_secs(1)),
        ("8 accounting", accounting, Duration::from_secs(1)),
        ("9 Q0 fixture replay", q0_replay, Duration::from_secs(5)),
        ("10 robust parsing", robust_parsing, Duration::from_secs(1)),
    ];
    let mut failed = Vec::new();
    for (name, check, limit) in criteria {
        let t = Instant::now();
        let result = check();
        let elapsed = t.elapsed();
        let result = result.and_then(|()| {
            if elapsed <= limit {
                Ok(())
            } else {
                Err(format!("took {elapsed:?}, limit {limit:?}"))
            }
        });
        match &result {
            Ok(()) => println!("criterion {name}: PASS ({} ms)", elapsed.as_millis()),
            Err(e) => {
                println!("criterion {name}: FAIL ({} ms): {e}", elapsed.as_millis());
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
