use super::{ChatMessage, Usage};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Duration;

const SHIPPED_PRICES: &str = include_str!("data/price_profile.toml");

/// Per-1K-token prices for one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceProfile {
    pub name: String,
    pub currency: String,
    pub prompt_per_1k: f64,
    pub completion_per_1k: f64,
}

impl PriceProfile {
    pub fn shipped() -> PriceProfile {
        PriceProfile::from_toml(SHIPPED_PRICES).expect("shipped price profile parses")
    }

    pub fn from_toml(text: &str) -> Result<PriceProfile> {
        toml::from_str(text).map_err(|e| Error::Format(format!("price profile: {e}")))
    }

    pub fn load(path: &Path) -> Result<PriceProfile> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::InputNotFound(path.display().to_string()),
            _ => Error::Io(e),
        })?;
        PriceProfile::from_toml(&text)
    }

    pub fn cost(&self, usage: Usage) -> f64 {
        usage.prompt_tokens as f64 / 1000.0 * self.prompt_per_1k
            + usage.completion_tokens as f64 / 1000.0 * self.completion_per_1k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub estimated_cost: f64,
    pub prices: PriceProfile,
    #[serde(skip)]
    pub wall_time: Duration,
    #[serde(skip)]
    pub per_call: Vec<Usage>,
}

impl UsageLedger {
    pub fn new(prices: PriceProfile) -> Self {
        UsageLedger {
            calls: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
            estimated_cost: 0.0,
            prices,
            wall_time: Duration::ZERO,
            per_call: Vec::new(),
        }
    }

    pub fn record(&mut self, usage: Usage, elapsed: Duration) {
        self.calls += 1;
        self.prompt_tokens += usage.prompt_tokens;
        self.completion_tokens += usage.completion_tokens;
        self.wall_time += elapsed;
        self.per_call.push(usage);
        self.estimated_cost = self.prices.cost(self.totals());
    }

    pub fn totals(&self) -> Usage {
        Usage {
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
        }
    }

    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// Offline token estimate used when a provider reports no usage: each run
/// of letters and digits costs one token per four characters (rounded up)
/// and every other non-space character costs one token.
pub fn estimate_text_tokens(text: &str) -> u64 {
    let mut tokens = 0u64;
    let mut run = 0u64;
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            run += 1;
            continue;
        }
        tokens += run.div_ceil(4);
        run = 0;
        if !c.is_whitespace() {
            tokens += 1;
        }
    }
    tokens + run.div_ceil(4)
}

/// Message contents plus a fixed overhead of four tokens per message.
pub fn estimate_message_tokens(messages: &[ChatMessage]) -> u64 {
    messages.iter().map(|m| 4 + estimate_text_tokens(&m.content)).sum()
}
