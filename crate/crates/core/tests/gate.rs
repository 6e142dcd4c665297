mod common;

use acrepair_core::gate::*;
use acrepair_core::solidity::parse_source;
use common::gate_cases;
use std::collections::BTreeMap;

#[test]
fn fixtures_match_expectations() {
    let mut failures = Vec::new();
    for case in gate_cases() {
        let report = validate(
            std::slice::from_ref(&case.original),
            std::slice::from_ref(&case.patched),
            &case.target,
        );
        let failed = report.failed_rules();
        let expected: Vec<Rule> = case.fails.into_iter().collect();
        if failed != expected {
            failures.push(format!("{}: expected {:?}, got {:?}\n{}", case.name, expected, failed, report.feedback()));
        }
        for v in &report.verdicts {
            assert_eq!(v.pass, v.messages.is_empty(), "{}", case.name);
        }
        if let Some(w) = case.warns {
            assert!(!report.verdict(w).warnings.is_empty(), "{}: expected a {w} warning", case.name);
        }
        assert_eq!(report.overall_pass, case.fails.is_none());
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn every_rule_has_two_pass_and_two_fail_fixtures() {
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
    for case in gate_cases() {
        let (rule, _) = prefixes.iter().find(|(_, p)| case.name.starts_with(p)).unwrap();
        match case.fails {
            Some(r) => {
                assert_eq!(r, *rule, "{}", case.name);
                *fail.entry(r).or_default() += 1;
            }
            None => *pass.entry(*rule).or_default() += 1,
        }
    }
    for r in Rule::ALL {
        assert!(pass.get(&r).copied().unwrap_or(0) >= 2, "{r} pass fixtures");
        assert!(fail.get(&r).copied().unwrap_or(0) >= 2, "{r} fail fixtures");
    }
}

#[test]
fn validate_is_deterministic() {
    for case in gate_cases() {
        let a = validate(std::slice::from_ref(&case.original), std::slice::from_ref(&case.patched), &case.target);
        let b = validate(std::slice::from_ref(&case.original), std::slice::from_ref(&case.patched), &case.target);
        assert_eq!(a, b);
    }
}

#[test]
fn failure_messages_name_the_offender() {
    let by_name: BTreeMap<String, _> = gate_cases().into_iter().map(|c| (c.name.clone(), c)).collect();
    let cases = [
        ("undefined_fail_01", Rule::UndefinedTokens, "onlyVault"),
        ("undefined_fail_02", Rule::UndefinedTokens, "FeeChanged"),
        ("invocation_fail_01", Rule::InfeasibleInvocation, "_credit"),
        ("invocation_fail_02", Rule::InfeasibleInvocation, "checkSignature"),
        ("types_fail_01", Rule::MisusedTypes, "uint256"),
        ("version_fail_01", Rule::SolidityVersion, "constructor"),
        ("version_fail_02", Rule::SolidityVersion, "0.8.4"),
        ("defuse_fail_01", Rule::DefUse, "ownr"),
        ("defuse_fail_02", Rule::DefUse, "never assigned"),
        ("defuse_fail_03", Rule::DefUse, "before its declaration"),
        ("structure_fail_01", Rule::StructuralCompat, "depositFor"),
        ("structure_fail_02", Rule::StructuralCompat, "uint128"),
    ];
    for (name, rule, needle) in cases {
        let c = &by_name[name];
        let report = validate(std::slice::from_ref(&c.original), std::slice::from_ref(&c.patched), &c.target);
        let text = report.feedback();
        assert!(text.contains(needle), "{name}: {text}");
        assert!(text.contains(&format!("[{rule}]")), "{name}: {text}");
    }
}

#[test]
fn feature_table_is_fully_detected() {
    let table = version_features();
    assert!(table.len() >= 20);
    for f in table {
        assert!(count_feature(&f.name, "").is_some(), "{} has no detector", f.name);
        assert!(f.since.is_some() != f.until.is_some(), "{}", f.name);
    }
    let by = |n: &str| table.iter().find(|f| f.name == n).unwrap();
    assert_eq!(by("constructor-keyword").since.unwrap().to_string(), "0.4.22");
    assert_eq!(by("emit").since.unwrap().to_string(), "0.4.21");
    assert_eq!(by("immutable").since.unwrap().to_string(), "0.6.5");
    assert_eq!(by("custom-error").since.unwrap().to_string(), "0.8.4");
    assert_eq!(by("now").until.unwrap().to_string(), "0.7.0");
}

#[test]
fn feature_counts() {
    let src = r#"
        contract C {
            uint constant K = 1;
            uint immutable start;
            error Nope(uint x);
            constructor() { start = now; }
            receive() external payable {}
            function f() public constant returns (uint) { if (x) throw; return 1 years; }
            function g() public virtual { emit E(1); unchecked { i++; } revert Nope(1); }
            function h() public { var y = sha3("a"); suicide(owner); a.callcode(b); }
        }
    "#;
    let n = |f: &str| count_feature(f, src).unwrap();
    assert_eq!(n("constructor-keyword"), 1);
    assert_eq!(n("immutable"), 1);
    assert_eq!(n("custom-error"), 2);
    assert_eq!(n("receive-function"), 1);
    assert_eq!(n("constant-function"), 1);
    assert_eq!(n("throw"), 1);
    assert_eq!(n("years-unit"), 1);
    assert_eq!(n("virtual"), 1);
    assert_eq!(n("emit"), 1);
    assert_eq!(n("unchecked-block"), 1);
    assert_eq!(n("var-declaration"), 1);
    assert_eq!(n("sha3"), 1);
    assert_eq!(n("suicide"), 1);
    assert_eq!(n("callcode"), 1);
    assert_eq!(n("now"), 1);
    assert_eq!(n("fallback-keyword"), 0);
}

#[test]
fn motivating_fix_passes_all_rules() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/motivating/DepositPool.sol");
    let text = std::fs::read_to_string(path).unwrap();
    let patched_text = text.replace(
        "bool isUnlocked, address _from) external {",
        "bool isUnlocked, address _from) external onlyBank {",
    );
    assert_ne!(text, patched_text);
    let original = parse_source("DepositPool.sol", &text);
    let patched = parse_source("DepositPool.sol", &patched_text);
    let report = validate(&[original], &[patched], &Target::new("DepositPool", "depositFromOtherContract"));
    assert!(report.overall_pass, "{}", report.feedback());
}

#[test]
fn unchanged_source_is_a_fixed_point() {
    for case in gate_cases().into_iter().filter(|c| c.fails.is_none()) {
        let once = validate(std::slice::from_ref(&case.original), std::slice::from_ref(&case.patched), &case.target);
        assert!(once.overall_pass);
        let again = validate(std::slice::from_ref(&case.patched), std::slice::from_ref(&case.patched), &case.target);
        assert!(again.overall_pass, "{}: {}", case.name, again.feedback());
    }
}
