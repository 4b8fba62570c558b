//! Chooses the chat backend for a run.

use std::path::PathBuf;
use std::sync::Arc;

use chrono::DateTime;
use inspire_core::llm_gateway::mock::SyntheticModel;
use inspire_core::llm_gateway::{ChatProvider, Gateway, HttpChatProvider, ReplayProvider, TranscriptLog, ENV_MODEL};
use inspire_core::store::{Clock, StoreError, Workspace};

/// Where completions come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderMode {
    /// OpenAI-compatible endpoint from the environment; exchanges are recorded.
    Live,
    /// Built-in deterministic model; exchanges are recorded.
    Mock,
    /// Serve recorded exchanges only; nothing is recorded.
    Replay(Option<PathBuf>),
}

impl ProviderMode {
    pub fn is_replay(&self) -> bool {
        matches!(self, ProviderMode::Replay(_))
    }
}

/// Build the gateway for `mode` and apply the workspace settings. In replay
/// mode the workspace clock is pinned so runs are reproducible.
pub fn build(ws: Workspace, mode: &ProviderMode) -> Result<(Workspace, Gateway), StoreError> {
    let provider: Arc<dyn ChatProvider> = match mode {
        ProviderMode::Live => match HttpChatProvider::from_env() {
            Ok(p) => Arc::new(p),
            // defer the error to the first call so provider-free commands still work
            Err(e) => Arc::new(Unconfigured(e.to_string())),
        },
        ProviderMode::Mock => Arc::new(SyntheticModel::new()),
        ProviderMode::Replay(path) => {
            let path = path.clone().unwrap_or_else(|| ws.transcript_path());
            let replay = if path.exists() {
                ReplayProvider::load(&path)?
            } else {
                ReplayProvider::from_exchanges(Vec::new())
            };
            Arc::new(replay)
        }
    };
    let mut gateway = ws.configure_gateway(Gateway::new(provider));
    if let Ok(model) = std::env::var(ENV_MODEL) {
        let mut params = ws.config().sampling.clone();
        params.model = model;
        gateway = gateway.with_params(params);
    }
    let ws = if mode.is_replay() {
        ws.with_clock(Clock::Fixed(DateTime::UNIX_EPOCH))
    } else {
        gateway = gateway.with_transcript(Arc::new(TranscriptLog::new(ws.transcript_path())));
        ws
    };
    Ok((ws, gateway))
}

/// Stands in for a live provider that could not be configured.
struct Unconfigured(String);

impl ChatProvider for Unconfigured {
    fn id(&self) -> String {
        "unconfigured".into()
    }

    fn complete(&self, _: &inspire_core::llm_gateway::ChatRequest) -> Result<String, inspire_core::llm_gateway::ProviderError> {
        Err(inspire_core::llm_gateway::ProviderError::NotConfigured(self.0.clone()))
    }
}
