use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::parse::{parse_feature_list, ParseError, ParsedFeatureList};
use super::transcript::TranscriptLog;

/// Sampling settings sent with every request and recorded with every
/// exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub model: String,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            model: "gpt-4".into(),
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: None,
            seed: Some(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system: String,
    pub user: String,
    pub params: SamplingParams,
}

impl ChatRequest {
    /// Content hash of the prompt pair; replay matches on it.
    pub fn fingerprint(&self) -> String {
        fingerprint(&self.system, &self.user)
    }
}

pub fn fingerprint(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update((system.len() as u64).to_le_bytes());
    h.update(system.as_bytes());
    h.update(user.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProviderError {
    #[error("provider not configured: {0}")]
    NotConfigured(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("provider returned status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("no recorded exchange for request {fingerprint}")]
    ReplayMiss { fingerprint: String },
    #[error("{0}")]
    Other(String),
}

impl ProviderError {
    /// Whether another attempt could succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            ProviderError::NotConfigured(_) | ProviderError::ReplayMiss { .. } => false,
            ProviderError::Status { status, .. } => *status == 408 || *status == 429 || *status >= 500,
            _ => true,
        }
    }
}

/// A chat-completion backend.
pub trait ChatProvider: Send + Sync {
    fn id(&self) -> String;
    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError>;
}

/// One completed request/response pair, stored verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub fingerprint: String,
    pub system: String,
    pub user: String,
    pub params: SamplingParams,
    pub response: String,
    pub provider: String,
    pub latency_ms: u64,
    pub retries: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the first retry; doubles for each further retry.
    #[serde(with = "millis")]
    pub backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            backoff: Duration::ZERO,
        }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("provider failed after {attempts} attempt(s): {last}")]
pub struct RetryExhausted {
    pub attempts: u32,
    pub last: ProviderError,
}

/// Call `provider` until it succeeds or `policy.max_attempts` is used up.
pub fn complete_with_retry(
    provider: &dyn ChatProvider,
    request: &ChatRequest,
    policy: &RetryPolicy,
) -> Result<ChatExchange, RetryExhausted> {
    let attempts = policy.max_attempts.max(1);
    let started = Instant::now();
    let mut last = None;
    for attempt in 0..attempts {
        if attempt > 0 && !policy.backoff.is_zero() {
            std::thread::sleep(policy.backoff * 2u32.saturating_pow(attempt - 1));
        }
        match provider.complete(request) {
            Ok(response) => {
                return Ok(ChatExchange {
                    fingerprint: request.fingerprint(),
                    system: request.system.clone(),
                    user: request.user.clone(),
                    params: request.params.clone(),
                    response,
                    provider: provider.id(),
                    latency_ms: started.elapsed().as_millis() as u64,
                    retries: attempt,
                })
            }
            Err(err) => {
                log::warn!("provider {} attempt {} failed: {err}", provider.id(), attempt + 1);
                let retryable = err.is_retryable();
                last = Some(err);
                if !retryable {
                    return Err(RetryExhausted {
                        attempts: attempt + 1,
                        last: last.expect("just set"),
                    });
                }
            }
        }
    }
    Err(RetryExhausted {
        attempts,
        last: last.expect("at least one attempt"),
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error(transparent)]
    Provider(#[from] RetryExhausted),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("transcript: {0}")]
    Transcript(String),
}

/// Result of asking for a feature list, with every exchange it took.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureListReply {
    pub parsed: ParsedFeatureList,
    pub exchanges: Vec<ChatExchange>,
}

/// Provider plus policy plus optional transcript recording.
#[derive(Clone)]
pub struct Gateway {
    provider: Arc<dyn ChatProvider>,
    params: SamplingParams,
    policy: RetryPolicy,
    transcript: Option<Arc<TranscriptLog>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway")
            .field("provider", &self.provider.id())
            .field("params", &self.params)
            .field("policy", &self.policy)
            .finish()
    }
}

impl Gateway {
    pub fn new(provider: Arc<dyn ChatProvider>) -> Self {
        Self {
            provider,
            params: SamplingParams::default(),
            policy: RetryPolicy::default(),
            transcript: None,
        }
    }

    pub fn with_params(mut self, params: SamplingParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_policy(mut self, policy: RetryPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_transcript(mut self, log: Arc<TranscriptLog>) -> Self {
        self.transcript = Some(log);
        self
    }

    pub fn provider_id(&self) -> String {
        self.provider.id()
    }

    pub fn complete(&self, system: &str, user: &str) -> Result<ChatExchange, GatewayError> {
        let request = ChatRequest {
            system: system.to_string(),
            user: user.to_string(),
            params: self.params.clone(),
        };
        let exchange = complete_with_retry(self.provider.as_ref(), &request, &self.policy)?;
        if let Some(log) = &self.transcript {
            log.append(&exchange).map_err(|e| GatewayError::Transcript(e.to_string()))?;
        }
        Ok(exchange)
    }

    /// Ask for a JSON feature list. A count mismatch triggers one identical
    /// re-ask whose answer is accepted if it parses; the mismatch warning
    /// stays if it persists.
    pub fn feature_list(&self, system: &str, user: &str, expected_n: Option<usize>) -> Result<FeatureListReply, GatewayError> {
        let first = self.complete(system, user)?;
        let parsed = parse_feature_list(&first.response, expected_n)?;
        let mut exchanges = vec![first];
        let Some(n) = expected_n else {
            return Ok(FeatureListReply { parsed, exchanges });
        };
        if parsed.items.len() == n {
            return Ok(FeatureListReply { parsed, exchanges });
        }

        log::info!("expected {n} sub-features, got {}; asking again", parsed.items.len());
        match self.complete(system, user) {
            Ok(second) => {
                let reparsed = parse_feature_list(&second.response, Some(n));
                exchanges.push(second);
                match reparsed {
                    Ok(mut p) => {
                        if p.items.len() != n {
                            p.warnings.push("count still differs after one re-ask; accepted as is".into());
                        }
                        Ok(FeatureListReply { parsed: p, exchanges })
                    }
                    Err(_) => Ok(FeatureListReply {
                        parsed: with_warning(parsed, "re-ask returned no parseable list; kept first answer"),
                        exchanges,
                    }),
                }
            }
            Err(err) => Ok(FeatureListReply {
                parsed: with_warning(parsed, &format!("re-ask failed ({err}); kept first answer")),
                exchanges,
            }),
        }
    }
}

fn with_warning(mut parsed: ParsedFeatureList, warning: &str) -> ParsedFeatureList {
    parsed.warnings.push(warning.to_string());
    parsed
}
