use super::{ChatMessage, Completion, ModelConfig, Provider, Usage};
use crate::error::{Error, Result};
use std::collections::VecDeque;
use std::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedReply {
    Text(String),
    TextWithUsage(String, Usage),
    Fail(String),
}

impl From<&str> for ScriptedReply {
    fn from(s: &str) -> Self {
        ScriptedReply::Text(s.to_string())
    }
}

impl From<String> for ScriptedReply {
    fn from(s: String) -> Self {
        ScriptedReply::Text(s)
    }
}

/// Answers from a fixed queue and keeps every request it receives.
pub struct ScriptedProvider {
    replies: Mutex<VecDeque<ScriptedReply>>,
    requests: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedProvider {
    pub fn new<I, R>(replies: I) -> Self
    where
        I: IntoIterator<Item = R>,
        R: Into<ScriptedReply>,
    {
        ScriptedProvider {
            replies: Mutex::new(replies.into_iter().map(Into::into).collect()),
            requests: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<Vec<ChatMessage>> {
        self.requests.lock().expect("scripted requests").clone()
    }

    pub fn remaining(&self) -> usize {
        self.replies.lock().expect("scripted replies").len()
    }
}

impl Provider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, messages: &[ChatMessage], _cfg: &ModelConfig) -> Result<Completion> {
        self.requests.lock().expect("scripted requests").push(messages.to_vec());
        let next = self.replies.lock().expect("scripted replies").pop_front();
        match next {
            Some(ScriptedReply::Text(text)) => Ok(Completion { text, usage: None }),
            Some(ScriptedReply::TextWithUsage(text, usage)) => Ok(Completion {
                text,
                usage: Some(usage),
            }),
            Some(ScriptedReply::Fail(msg)) => Err(Error::ProviderUnavailable(msg)),
            None => Err(Error::ProviderUnavailable("script exhausted".into())),
        }
    }
}

type CompleteFn = dyn Fn(&[ChatMessage], &ModelConfig) -> Result<Completion> + Send + Sync;

/// Provider backed by a closure.
pub struct FnProvider {
    name: String,
    f: Box<CompleteFn>,
}

impl FnProvider {
    pub fn new<F>(name: &str, f: F) -> Self
    where
        F: Fn(&[ChatMessage], &ModelConfig) -> Result<Completion> + Send + Sync + 'static,
    {
        FnProvider {
            name: name.to_string(),
            f: Box::new(f),
        }
    }
}

impl Provider for FnProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, messages: &[ChatMessage], cfg: &ModelConfig) -> Result<Completion> {
        (self.f)(messages, cfg)
    }
}
