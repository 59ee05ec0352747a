//! Uniform access to chat-completion backends.
//!
//! A [`ChatBackend`] performs one attempt; the [`LlmClient`] adds retry with
//! exponential backoff, bounded parallelism and transcript logging. Mock
//! backends (scripted and seeded-generative) make every downstream stage
//! runnable offline and deterministically.

mod backend;
mod client;
mod mock;
mod structured;
mod transcript;

pub use backend::{BackendError, ChatBackend, HttpChatBackend};
pub use client::LlmClient;
pub use mock::{GenerativeSettings, MockChatBackend, ScriptStep};
pub use structured::{extract_structured, FieldKind, FieldSpec, SchemaDescriptor};
pub use transcript::{Transcript, TranscriptRecord};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Transcript tags, one per pipeline call site. The generative mock keys its
/// behavior off these, and tests assert stage ordering against them.
pub mod tags {
    pub const TOPIC_GROUNDING: &str = "topic_grounding";
    /// Used as `expert_qa:<discipline>`.
    pub const EXPERT_QA: &str = "expert_qa";
    pub const CANDIDATE_CLASSIFICATION: &str = "candidate_classification";
    pub const PROBLEM_GENERATION: &str = "problem_generation";
    pub const CLUSTER_FOCUS: &str = "cluster_focus";
    pub const CLUSTER_RUBRIC: &str = "cluster_rubric";
    pub const TASK_DECOMPOSITION: &str = "task_decomposition";
    /// Used as `task:<stage>`.
    pub const TASK_EXECUTION: &str = "task";
    pub const PHASE_INTEGRATION: &str = "phase_integration";
    pub const SEED_IDEAS: &str = "seed_ideas";
    pub const IDEA_RUBRIC: &str = "idea_rubric";
    pub const SUMMARIZE: &str = "summarize";
    pub const REVIEW: &str = "review";
    pub const META_REVIEW: &str = "meta_review";
    pub const COMPARE: &str = "compare";
    pub const ROUND_SUMMARY: &str = "round_summary";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: ChatRole::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub seed: u64,
    pub max_tokens: u32,
    /// Label grouping this call in the transcript.
    pub tag: String,
}

impl ChatRequest {
    pub fn new(tag: impl Into<String>, system: impl Into<String>, user: impl Into<String>) -> Self {
        Self {
            messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
            temperature: 0.7,
            seed: 0,
            max_tokens: 2048,
            tag: tag.into(),
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.messages.is_empty() {
            return Err(Error::validation("chat request has no messages"));
        }
        if self.messages[0].role != ChatRole::System {
            return Err(Error::validation(
                "first chat message must be the system prompt",
            ));
        }
        for message in &self.messages {
            if matches!(message.role, ChatRole::System | ChatRole::User)
                && message.content.trim().is_empty()
            {
                return Err(Error::validation(
                    "system/user message content must be non-empty",
                ));
            }
        }
        if self.temperature < 0.0 {
            return Err(Error::validation("temperature must be >= 0"));
        }
        if self.max_tokens == 0 {
            return Err(Error::validation("max_tokens must be positive"));
        }
        Ok(())
    }

    /// Stable content hash identifying this request in transcripts.
    pub fn content_hash(&self) -> String {
        let body = serde_json::to_string(self).expect("request serializes");
        crate::util::short_hash(&body)
    }

    /// Concatenated message text; the generative mock reads protocol markers
    /// out of this.
    pub fn joined_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_chars: usize,
    pub completion_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

/// Settings for a live chat-completion endpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub base_url: String,
    pub model_id: String,
    /// Name of the environment variable holding the API key; keys never
    /// appear in config files or transcripts.
    pub api_key_env: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub parallelism: usize,
    pub backoff_base_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: "https://api.openai.com/v1".into(),
            model_id: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 60_000,
            max_retries: 3,
            parallelism: 1,
            backoff_base_ms: 250,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_retries > 8 {
            return Err(Error::config("max_retries must be <= 8"));
        }
        if self.parallelism == 0 {
            return Err(Error::config("parallelism must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_validation() {
        let ok = ChatRequest::new("t", "sys", "user");
        assert!(ok.validate().is_ok());

        let mut no_system = ok.clone();
        no_system.messages[0].role = ChatRole::User;
        assert!(no_system.validate().is_err());

        let mut empty = ok.clone();
        empty.messages[1].content = " ".into();
        assert!(empty.validate().is_err());
    }

    #[test]
    fn content_hash_is_stable() {
        let a = ChatRequest::new("t", "sys", "user");
        let b = ChatRequest::new("t", "sys", "user");
        assert_eq!(a.content_hash(), b.content_hash());
        let c = ChatRequest::new("t", "sys", "other");
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn provider_config_bounds() {
        let mut config = ProviderConfig::default();
        assert!(config.validate().is_ok());
        config.max_retries = 9;
        assert!(config.validate().is_err());
        config.max_retries = 2;
        config.parallelism = 0;
        assert!(config.validate().is_err());
    }
}
