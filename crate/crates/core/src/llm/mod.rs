//! Language-model gateway: the provider contract, a live HTTP client, a
//! transcript replay provider, scripted test providers, usage accounting
//! and tolerant parsing of model output.

mod accounting;
mod live;
mod parse;
mod replay;
mod scripted;

pub use accounting::{estimate_message_tokens, estimate_text_tokens, PriceProfile, UsageLedger};
pub use live::{LiveProvider, ENV_API_KEY, ENV_ENDPOINT, ENV_PRICE_PROFILE};
pub use parse::parse_structured;
pub use replay::{canonical_json, request_hash, request_value, ReplayProvider, Transcript, TranscriptRecord};
pub use scripted::{FnProvider, ScriptedProvider, ScriptedReply};

use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseFormat {
    Json,
    FreeText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub response_format: ResponseFormat,
    /// Prompt size limit in estimated tokens.
    pub context_window: usize,
}

pub const DEFAULT_MODEL: &str = "gpt-4-0613";
pub const DEFAULT_CONTEXT_WINDOW: usize = 8192;

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            model: DEFAULT_MODEL.into(),
            temperature: 0.0,
            max_output_tokens: 4096,
            response_format: ResponseFormat::Json,
            context_window: DEFAULT_CONTEXT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// `None` when the provider did not report usage.
    pub usage: Option<Usage>,
}

pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, messages: &[ChatMessage], cfg: &ModelConfig) -> Result<Completion>;
}

/// One case's view of a provider: every call is timed, accounted in the
/// ledger and appended to the transcript.
pub struct LlmSession {
    provider: Arc<dyn Provider>,
    pub ledger: UsageLedger,
    pub transcript: Transcript,
}

impl LlmSession {
    pub fn new(provider: Arc<dyn Provider>, case_id: &str, prices: PriceProfile) -> Self {
        LlmSession {
            transcript: Transcript::new(case_id, provider.name()),
            provider,
            ledger: UsageLedger::new(prices),
        }
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn complete(&mut self, messages: &[ChatMessage], cfg: &ModelConfig) -> Result<(String, Usage)> {
        let started = Instant::now();
        let out = self.provider.complete(messages, cfg);
        let elapsed = started.elapsed();
        let c = out?;
        let usage = c.usage.unwrap_or_else(|| Usage {
            prompt_tokens: estimate_message_tokens(messages),
            completion_tokens: estimate_text_tokens(&c.text),
        });
        self.ledger.record(usage, elapsed);
        self.transcript.push(messages, cfg, &c.text, usage);
        Ok((c.text, usage))
    }
}
