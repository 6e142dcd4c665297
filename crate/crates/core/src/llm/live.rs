use super::{ChatMessage, Completion, ModelConfig, Provider, ResponseFormat, Usage};
use crate::error::{Error, Result};
use serde_json::{json, Value};
use std::time::Duration;
use ureq::Agent;

pub const ENV_ENDPOINT: &str = "ACREPAIR_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "ACREPAIR_LLM_API_KEY";
pub const ENV_PRICE_PROFILE: &str = "ACREPAIR_PRICE_PROFILE";

const MAX_RETRIES: u32 = 3;

/// Chat-completions client. POSTs `{model, messages, temperature,
/// max_tokens, response_format}` to the endpoint with a bearer token and
/// reads `choices[0].message.content` and `usage.{prompt,completion}_tokens`.
pub struct LiveProvider {
    endpoint: String,
    api_key: String,
    agent: Agent,
    backoff: Duration,
}

enum Attempt {
    Done(Completion),
    Transient(String),
    Fatal(String),
}

impl LiveProvider {
    pub fn new(endpoint: &str, api_key: &str) -> Self {
        let config = Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(300)))
            .http_status_as_error(false)
            .build();
        LiveProvider {
            endpoint: endpoint.to_string(),
            api_key: api_key.to_string(),
            agent: Agent::new_with_config(config),
            backoff: Duration::from_millis(500),
        }
    }

    pub fn from_env() -> Result<Self> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| Error::ProviderUnavailable(format!("{ENV_ENDPOINT} is not set")))?;
        let key = std::env::var(ENV_API_KEY)
            .map_err(|_| Error::ProviderUnavailable(format!("{ENV_API_KEY} is not set")))?;
        Ok(LiveProvider::new(&endpoint, &key))
    }

    /// Base delay before the first retry; doubles on each further retry.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    fn body(messages: &[ChatMessage], cfg: &ModelConfig) -> Value {
        let mut body = json!({
            "model": cfg.model,
            "messages": messages,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_output_tokens,
        });
        if cfg.response_format == ResponseFormat::Json {
            body["response_format"] = json!({ "type": "json_object" });
        }
        body
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Attempt::Transient(format!("HTTP {status}"));
        }
        if !(200..300).contains(&status) {
            let detail = resp.body_mut().read_to_string().unwrap_or_default();
            return Attempt::Fatal(format!("HTTP {status}: {}", detail.trim()));
        }
        let v: Value = match resp.body_mut().read_json() {
            Ok(v) => v,
            Err(e) => return Attempt::Fatal(format!("malformed response body: {e}")),
        };
        let Some(text) = v.pointer("/choices/0/message/content").and_then(Value::as_str) else {
            return Attempt::Fatal("response has no choices[0].message.content".into());
        };
        let usage = match (
            v.pointer("/usage/prompt_tokens").and_then(Value::as_u64),
            v.pointer("/usage/completion_tokens").and_then(Value::as_u64),
        ) {
            (Some(p), Some(c)) => Some(Usage {
                prompt_tokens: p,
                completion_tokens: c,
            }),
            _ => None,
        };
        Attempt::Done(Completion {
            text: text.to_string(),
            usage,
        })
    }
}

impl Provider for LiveProvider {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(&self, messages: &[ChatMessage], cfg: &ModelConfig) -> Result<Completion> {
        let body = LiveProvider::body(messages, cfg);
        let mut last = String::new();
        for attempt in 0..=MAX_RETRIES {
            if attempt > 0 {
                std::thread::sleep(self.backoff * 2u32.pow(attempt - 1));
            }
            match self.attempt(&body) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fatal(msg) => return Err(Error::ProviderUnavailable(msg)),
                Attempt::Transient(msg) => {
                    log::warn!("provider call failed (attempt {}): {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::ProviderUnavailable(format!(
            "gave up after {} attempts: {last}",
            MAX_RETRIES + 1
        )))
    }
}
