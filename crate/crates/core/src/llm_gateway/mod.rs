//! Prompt templates, chat providers and feature-list parsing.

mod http;
pub mod mock;
mod parse;
mod provider;
mod templates;
mod transcript;

pub use http::{HttpChatProvider, ENV_MODEL, ENV_PROVIDER_KEY, ENV_PROVIDER_URL};
pub use parse::{parse_feature_list, ParseError, ParsedFeatureList, KEY_DESCRIPTION, KEY_NAME, KEY_SOURCE};
pub use provider::{
    complete_with_retry, fingerprint, ChatExchange, ChatProvider, ChatRequest, FeatureListReply, Gateway, GatewayError,
    ProviderError, RetryExhausted, RetryPolicy, SamplingParams,
};
pub use templates::{render, Bindings, RenderError, TemplateId};
pub use transcript::{read_transcript, ReplayProvider, TranscriptLog, TRANSCRIPT_FORMAT, TRANSCRIPT_VERSION};
