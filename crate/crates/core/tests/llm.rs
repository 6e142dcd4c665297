use acrepair_core::llm::*;
use acrepair_core::Error;
use proptest::prelude::*;
use serde_json::{json, Value};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/parse")
}

fn msgs(user: &str) -> Vec<ChatMessage> {
    vec![ChatMessage::system("You are terse."), ChatMessage::user(user)]
}

#[test]
fn parse_positive_fixtures() {
    for i in 1..=20 {
        let text = std::fs::read_to_string(fixtures().join(format!("positive_{i:02}.txt"))).unwrap();
        let expected: Value = serde_json::from_str(
            &std::fs::read_to_string(fixtures().join(format!("positive_{i:02}.expected.json"))).unwrap(),
        )
        .unwrap();
        let got = parse_structured(&text).unwrap_or_else(|e| panic!("positive_{i:02}: {e}"));
        assert_eq!(got, expected, "positive_{i:02}");
    }
}

#[test]
fn parse_negative_fixtures() {
    for i in 1..=5 {
        let text = std::fs::read_to_string(fixtures().join(format!("negative_{i:02}.txt"))).unwrap();
        match parse_structured(&text) {
            Err(Error::Unparseable(_)) => {}
            other => panic!("negative_{i:02}: {other:?}"),
        }
    }
}

#[test]
fn parse_trivial() {
    let v = parse_structured(r#"{"role":"bank","permission":"deposit"}"#).unwrap();
    assert_eq!(v.as_object().unwrap().len(), 2);
    assert!(matches!(parse_structured(""), Err(Error::Unparseable(_))));
    assert!(matches!(parse_structured("   \n"), Err(Error::Unparseable(_))));
}

#[test]
fn canonical_hash_ignores_key_order() {
    let a: Value = serde_json::from_str(r#"{"b":1,"a":{"y":[1,{"q":2,"p":3}],"x":null}}"#).unwrap();
    let b: Value = serde_json::from_str(r#"{"a":{"x":null,"y":[1,{"p":3,"q":2}]},"b":1}"#).unwrap();
    assert_eq!(canonical_json(&a), canonical_json(&b));
    assert_eq!(request_hash(&a), request_hash(&b));
    let c: Value = serde_json::from_str(r#"{"a":{"x":null,"y":[{"p":3,"q":2},1]},"b":1}"#).unwrap();
    assert_ne!(request_hash(&a), request_hash(&c));
    assert_eq!(request_hash(&a).len(), 64);
}

fn one_entry_transcript() -> (Transcript, Vec<ChatMessage>, ModelConfig) {
    let cfg = ModelConfig::default();
    let m = msgs("pick a pair");
    let mut t = Transcript::new("case-1", "scripted");
    t.push(&m, &cfg, r#"{"role":"Bank","permission":"Deposit"}"#, Usage {
        prompt_tokens: 10,
        completion_tokens: 5,
    });
    (t, m, cfg)
}

#[test]
fn replay_matching_request() {
    let (t, m, cfg) = one_entry_transcript();
    let p = ReplayProvider::new(t);
    let c = p.complete(&m, &cfg).unwrap();
    assert_eq!(c.text, r#"{"role":"Bank","permission":"Deposit"}"#);
    assert_eq!(c.usage.unwrap().total(), 15);
    assert_eq!(p.remaining(), 0);
    match p.complete(&m, &cfg) {
        Err(Error::TranscriptDiverged { seq: 1, .. }) => {}
        other => panic!("{other:?}"),
    }
}

#[test]
fn replay_mismatch_reports_both_hashes() {
    let (t, _, cfg) = one_entry_transcript();
    let recorded = t.records[0].request_hash.clone();
    let p = ReplayProvider::new(t.clone());
    let other = msgs("pick another pair");
    match p.complete(&other, &cfg) {
        Err(Error::TranscriptDiverged { seq, expected, actual }) => {
            assert_eq!(seq, 0);
            assert_eq!(expected, recorded);
            assert_eq!(actual, request_hash(&request_value(&other, &cfg)));
        }
        other => panic!("{other:?}"),
    }
    let lenient = ReplayProvider::lenient(t);
    assert!(lenient.complete(&other, &cfg).is_ok());
}

#[test]
fn transcript_round_trip() {
    let (t, _, _) = one_entry_transcript();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.jsonl");
    t.save(&path).unwrap();
    let back = Transcript::load(&path).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_jsonl(), std::fs::read_to_string(&path).unwrap());
    assert!(matches!(
        Transcript::load(&dir.path().join("missing.jsonl")),
        Err(Error::InputNotFound(_))
    ));
}

#[test]
fn scripted_reply_parses_into_pair() {
    let p = Arc::new(ScriptedProvider::new(["Answer:\n```json\n{\"role\": \"Vault, Bank\", \"permission\": \"Deposit\", \"is_new\": false}\n```"]));
    let mut s = LlmSession::new(p, "c", PriceProfile::shipped());
    let (text, _) = s.complete(&msgs("q2"), &ModelConfig::default()).unwrap();
    let v = parse_structured(&text).unwrap();
    assert_eq!(v["role"], "Vault, Bank");
    assert_eq!(v["permission"], "Deposit");
    assert_eq!(v["is_new"], false);
}

#[test]
fn session_estimates_missing_usage() {
    let p = Arc::new(ScriptedProvider::new(["ok then"]));
    let mut s = LlmSession::new(p, "c", PriceProfile::shipped());
    let m = msgs("hello world");
    let (_, usage) = s.complete(&m, &ModelConfig::default()).unwrap();
    assert_eq!(usage.prompt_tokens, estimate_message_tokens(&m));
    assert_eq!(usage.completion_tokens, 2);
    assert_eq!(s.transcript.records.len(), 1);
    assert_eq!(s.ledger.calls, 1);
}

#[test]
fn token_estimate_examples() {
    assert_eq!(estimate_text_tokens(""), 0);
    assert_eq!(estimate_text_tokens("abcd"), 1);
    assert_eq!(estimate_text_tokens("abcde"), 2);
    assert_eq!(estimate_text_tokens("require(msg.sender == bank);"), 12);
}

#[test]
fn shipped_prices_cover_reported_average() {
    let p = PriceProfile::shipped();
    assert_eq!(p.prompt_per_1k, 0.03);
    assert_eq!(p.completion_per_1k, 0.06);
    let thousand = Usage {
        prompt_tokens: 1000,
        completion_tokens: 1000,
    };
    assert!((p.cost(thousand) - 0.09).abs() < 1e-12);
    let all_prompt = p.cost(Usage {
        prompt_tokens: 1956,
        completion_tokens: 0,
    });
    let all_completion = p.cost(Usage {
        prompt_tokens: 0,
        completion_tokens: 1956,
    });
    assert!(all_prompt <= 0.0588 && 0.0588 <= all_completion);
}

proptest! {
    #[test]
    fn ledger_totals_are_sums(calls in prop::collection::vec((0u64..100_000, 0u64..100_000), 0..40)) {
        let prices = PriceProfile::shipped();
        let mut ledger = UsageLedger::new(prices.clone());
        let mut last = 0u64;
        for &(p, c) in &calls {
            ledger.record(Usage { prompt_tokens: p, completion_tokens: c }, Duration::from_millis(1));
            prop_assert!(ledger.total_tokens() >= last);
            last = ledger.total_tokens();
        }
        let sp: u64 = calls.iter().map(|c| c.0).sum();
        let sc: u64 = calls.iter().map(|c| c.1).sum();
        prop_assert_eq!(ledger.prompt_tokens, sp);
        prop_assert_eq!(ledger.completion_tokens, sc);
        prop_assert_eq!(ledger.calls, calls.len() as u64);
        let expected = sp as f64 / 1000.0 * 0.03 + sc as f64 / 1000.0 * 0.06;
        prop_assert!((ledger.estimated_cost - expected).abs() <= 1e-9 * expected.max(1.0));
    }
}

fn read_request(stream: &mut std::net::TcpStream) -> String {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap() == 0 {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
        if line == "\r\n" {
            break;
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    String::from_utf8(body).unwrap()
}

/// Serves `statuses` in order (then repeats the last) and counts requests.
fn serve(statuses: Vec<u16>) -> (String, Arc<AtomicUsize>, Arc<std::sync::Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(std::sync::Mutex::new(Vec::new()));
    let (h, b) = (hits.clone(), bodies.clone());
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let n = h.fetch_add(1, Ordering::SeqCst);
            b.lock().unwrap().push(read_request(&mut stream));
            let status = statuses[n.min(statuses.len() - 1)];
            let body = if status == 200 {
                json!({
                    "choices": [{"message": {"role": "assistant", "content": "{\"vulnerable\": true}"}}],
                    "usage": {"prompt_tokens": 42, "completion_tokens": 7}
                })
                .to_string()
            } else {
                "{\"error\":\"nope\"}".to_string()
            };
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    (url, hits, bodies)
}

#[test]
fn live_retries_transient_failures() {
    let (url, hits, bodies) = serve(vec![503, 429, 200]);
    let p = LiveProvider::new(&url, "k").with_backoff(Duration::from_millis(1));
    let c = p.complete(&msgs("q0"), &ModelConfig::default()).unwrap();
    assert_eq!(c.text, "{\"vulnerable\": true}");
    assert_eq!(
        c.usage,
        Some(Usage {
            prompt_tokens: 42,
            completion_tokens: 7
        })
    );
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    let sent: Value = serde_json::from_str(&bodies.lock().unwrap()[2]).unwrap();
    assert_eq!(sent["temperature"], 0.0);
    assert_eq!(sent["max_tokens"], 4096);
    assert_eq!(sent["response_format"]["type"], "json_object");
    assert_eq!(sent["messages"][1]["role"], "user");
}

#[test]
fn live_gives_up_after_three_retries() {
    let (url, hits, _) = serve(vec![500]);
    let p = LiveProvider::new(&url, "k").with_backoff(Duration::from_millis(1));
    let err = p.complete(&msgs("q0"), &ModelConfig::default()).unwrap_err();
    assert!(matches!(err, Error::ProviderUnavailable(_)));
    assert_eq!(err.exit_code(), 70);
    assert_eq!(hits.load(Ordering::SeqCst), 4);
}

#[test]
fn live_client_errors_are_not_retried() {
    let (url, hits, _) = serve(vec![401]);
    let p = LiveProvider::new(&url, "k").with_backoff(Duration::from_millis(1));
    assert!(matches!(
        p.complete(&msgs("q0"), &ModelConfig::default()),
        Err(Error::ProviderUnavailable(_))
    ));
    assert_eq!(hits.load(Ordering::SeqCst), 1);
}

#[test]
fn live_unreachable_endpoint() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/", listener.local_addr().unwrap());
    drop(listener);
    let p = LiveProvider::new(&url, "k").with_backoff(Duration::from_millis(1));
    assert!(matches!(
        p.complete(&msgs("q0"), &ModelConfig::default()),
        Err(Error::ProviderUnavailable(_))
    ));
}
