//! Prompt construction, chat-model invocation, completion parsing,
//! single-modality translation and the executable filter.

mod client;
mod http;
mod mock;
mod parse;
mod pipeline;
mod prompt;

use thiserror::Error;

pub use client::{
    CachedClient, ChatClient, ChatExchange, ChatMessage, ChatRequest, ChatResponse, OpenAiChatClient, RetryPolicy,
    RetryingClient, ScriptedClient, Sleeper, ThreadSleeper,
};
pub use http::HttpConfig;
pub use mock::MockChatClient;
pub use parse::{parse_pairs, render_pairs, Half, ParsedPairs};
pub use pipeline::{
    filter_executable, generate, generate_insights, translate, CandidateStatus, ExchangeKind, GenerationOutcome,
    InsightCandidate, Usage, UsageEntry, UsageLedger,
};
pub(crate) use pipeline::render_result;
pub use prompt::{
    build_prompt, build_translation_prompt, estimate_tokens, one_shot_examples, GenOptions, GenerationStyle, PromptSpec,
    ShotMode, SYSTEM_PROMPT, TRANSLATE_TO_CODE_SYSTEM, TRANSLATE_TO_QUESTION_SYSTEM,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("prompt needs about {estimated} tokens, budget is {budget}")]
    TokenBudgetExceeded { estimated: usize, budget: usize },
    #[error("endpoint returned HTTP {status}: {message}")]
    ApiError { status: u16, message: String },
    #[error("request timed out")]
    Timeout,
    #[error("rate limited")]
    RateLimited,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    BadResponse(String),
    #[error("no question/code entries found in completion")]
    NoPairsFound,
    #[error("invalid request: {0}")]
    InvalidSpec(String),
    #[error("cache failure: {0}")]
    Cache(String),
    #[error("candidate {0} was already resolved")]
    AlreadyResolved(usize),
}

impl GenError {
    /// Failures worth another attempt: timeouts, throttling and 5xx.
    pub fn is_transient(&self) -> bool {
        match self {
            GenError::Timeout | GenError::RateLimited | GenError::Transport(_) => true,
            GenError::ApiError { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
