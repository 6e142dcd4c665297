use super::{ChatMessage, Completion, ModelConfig, Provider, Usage};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use std::path::Path;
use std::sync::Mutex;

/// One exchange with a provider, as stored one-per-line in a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub case_id: String,
    pub provider: String,
    pub seq: usize,
    pub request_hash: String,
    pub request: Value,
    pub response: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub case_id: String,
    pub provider: String,
    pub records: Vec<TranscriptRecord>,
}

/// Sorts object keys recursively and renders compact JSON.
pub fn canonical_json(v: &Value) -> String {
    fn sort(v: &Value) -> Value {
        match v {
            Value::Object(m) => {
                let mut keys: Vec<&String> = m.keys().collect();
                keys.sort();
                let mut out = Map::new();
                for k in keys {
                    out.insert(k.clone(), sort(&m[k]));
                }
                Value::Object(out)
            }
            Value::Array(a) => Value::Array(a.iter().map(sort).collect()),
            other => other.clone(),
        }
    }
    serde_json::to_string(&sort(v)).expect("json values serialize")
}

pub fn request_value(messages: &[ChatMessage], cfg: &ModelConfig) -> Value {
    serde_json::json!({ "messages": messages, "config": cfg })
}

/// Hex SHA-256 of the canonical form of a request payload.
pub fn request_hash(request: &Value) -> String {
    let digest = Sha256::digest(canonical_json(request).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl Transcript {
    pub fn new(case_id: &str, provider: &str) -> Self {
        Transcript {
            case_id: case_id.to_string(),
            provider: provider.to_string(),
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, messages: &[ChatMessage], cfg: &ModelConfig, response: &str, usage: Usage) {
        let request = request_value(messages, cfg);
        self.records.push(TranscriptRecord {
            case_id: self.case_id.clone(),
            provider: self.provider.clone(),
            seq: self.records.len(),
            request_hash: request_hash(&request),
            request,
            response: response.to_string(),
            usage,
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let v = serde_json::to_value(r).expect("record serializes");
            out.push_str(&canonical_json(&v));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Transcript> {
        let mut t = Transcript::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: TranscriptRecord = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("transcript line {}: {e}", i + 1)))?;
            if t.records.is_empty() {
                t.case_id = r.case_id.clone();
                t.provider = r.provider.clone();
            }
            t.records.push(r);
        }
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Transcript> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::InputNotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        Transcript::from_jsonl(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_jsonl().as_bytes())
    }

    /// Records belonging to one case, for transcripts that hold several.
    pub fn for_case(&self, case_id: &str) -> Transcript {
        Transcript {
            case_id: case_id.to_string(),
            provider: self.provider.clone(),
            records: self.records.iter().filter(|r| r.case_id == case_id).cloned().collect(),
        }
    }
}

/// Plays back recorded responses in order. In strict mode every request
/// must hash to the recorded value; the lenient mode behind `--provider
/// mock` only replays the responses.
pub struct ReplayProvider {
    records: Vec<TranscriptRecord>,
    cursor: Mutex<usize>,
    strict: bool,
    name: String,
}

impl ReplayProvider {
    pub fn new(transcript: Transcript) -> Self {
        ReplayProvider {
            records: transcript.records,
            cursor: Mutex::new(0),
            strict: true,
            name: "replay".into(),
        }
    }

    pub fn lenient(transcript: Transcript) -> Self {
        ReplayProvider {
            strict: false,
            name: "mock".into(),
            ..ReplayProvider::new(transcript)
        }
    }

    pub fn remaining(&self) -> usize {
        let cursor = *self.cursor.lock().expect("replay cursor");
        self.records.len().saturating_sub(cursor)
    }
}

impl Provider for ReplayProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, messages: &[ChatMessage], cfg: &ModelConfig) -> Result<Completion> {
        let mut cursor = self.cursor.lock().expect("replay cursor");
        let seq = *cursor;
        let actual = request_hash(&request_value(messages, cfg));
        let Some(rec) = self.records.get(seq) else {
            return Err(Error::TranscriptDiverged {
                seq,
                expected: "<end of transcript>".into(),
                actual,
            });
        };
        if self.strict && rec.request_hash != actual {
            return Err(Error::TranscriptDiverged {
                seq,
                expected: rec.request_hash.clone(),
                actual,
            });
        }
        *cursor += 1;
        Ok(Completion {
            text: rec.response.clone(),
            usage: Some(rec.usage),
        })
    }
}
