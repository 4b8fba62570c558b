//! OpenAI-compatible `/chat/completions` client.

use std::sync::OnceLock;
use std::time::Duration;

use serde_json::{json, Value};

use super::provider::{ChatProvider, ChatRequest, ProviderError};

pub const ENV_PROVIDER_URL: &str = "INSPIRE_PROVIDER_URL";
pub const ENV_PROVIDER_KEY: &str = "INSPIRE_PROVIDER_KEY";
pub const ENV_MODEL: &str = "INSPIRE_MODEL";

#[derive(Debug)]
pub struct HttpChatProvider {
    endpoint: String,
    api_key: Option<String>,
    timeout: Duration,
    // built lazily so construction is safe inside an async runtime
    client: OnceLock<reqwest::blocking::Client>,
}

impl HttpChatProvider {
    /// `endpoint` is the full chat-completions URL.
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key,
            timeout: Duration::from_secs(120),
            client: OnceLock::new(),
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// Configure from `INSPIRE_PROVIDER_URL` and `INSPIRE_PROVIDER_KEY`.
    pub fn from_env() -> Result<Self, ProviderError> {
        let endpoint = std::env::var(ENV_PROVIDER_URL)
            .map_err(|_| ProviderError::NotConfigured(format!("{ENV_PROVIDER_URL} is not set")))?;
        let key = std::env::var(ENV_PROVIDER_KEY).ok().filter(|k| !k.is_empty());
        Ok(Self::new(endpoint, key))
    }

    fn client(&self) -> Result<&reqwest::blocking::Client, ProviderError> {
        if let Some(c) = self.client.get() {
            return Ok(c);
        }
        let c = reqwest::blocking::Client::builder()
            .timeout(self.timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(self.client.get_or_init(|| c))
    }
}

pub(crate) fn request_body(request: &ChatRequest) -> Value {
    let p = &request.params;
    let mut body = json!({
        "model": p.model,
        "messages": [
            {"role": "system", "content": request.system},
            {"role": "user", "content": request.user},
        ],
        "temperature": p.temperature,
        "top_p": p.top_p,
    });
    if let Some(m) = p.max_tokens {
        body["max_tokens"] = json!(m);
    }
    if let Some(s) = p.seed {
        body["seed"] = json!(s);
    }
    body
}

pub(crate) fn response_text(body: &Value) -> Result<String, ProviderError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Malformed(format!("no choices[0].message.content in {body}")))
}

impl ChatProvider for HttpChatProvider {
    fn id(&self) -> String {
        format!("openai-compatible:{}", self.endpoint)
    }

    fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        let mut call = self.client()?.post(&self.endpoint).json(&request_body(request));
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| ProviderError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ProviderError::Status {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        let body: Value = serde_json::from_str(&text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
        response_text(&body)
    }
}
