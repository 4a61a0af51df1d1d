//! Design sources: a chat-completion backend and an offline mutation sampler
//! behind one trait.

mod offline;
mod remote;

pub use offline::{MutationKind, OfflineSampler, OFFLINE_ATTEMPTS};
pub use remote::{RemoteConfig, RemoteGenerator};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// System prompt, user prompt and rendered few-shot examples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub user: String,
    pub few_shots: Vec<String>,
}

impl PromptBundle {
    /// The single user message: examples first, then the task.
    pub fn user_message(&self) -> String {
        let mut out = String::new();
        for shot in &self.few_shots {
            out.push_str(shot.trim_end());
            out.push_str("\n\n");
        }
        out.push_str(&self.user);
        out
    }

    /// Every string the generator sees.
    pub fn full_text(&self) -> String {
        format!("{}\n\n{}", self.system, self.user_message())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub raw_text: String,
    pub backend: String,
    /// Seconds.
    pub latency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage: Option<TokenUsage>,
    /// Set when the offline sampler gave up mutating and echoed its elite.
    #[serde(default)]
    pub dead_end: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("remote backend failed with status {status}: {body}")]
    Remote { status: u16, body: String },
    #[error("remote backend unreachable: {0}")]
    Transport(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("prompt bundle has no few-shot examples to mutate")]
    NoExamples,
    #[error("few-shot example {index} does not parse: {reason}")]
    BadExample { index: usize, reason: String },
}

/// Produces raw design text from a prompt.
pub trait DesignGenerator: Send + Sync {
    fn backend(&self) -> &str;
    fn generate(&self, bundle: &PromptBundle, seed: u64) -> Result<GeneratorResponse, GeneratorError>;
}
