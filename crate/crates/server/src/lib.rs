//! HTTP service and command-line front end for the feature-elicitation engine.

pub mod api;
pub mod cli;
pub mod provider;

use inspire_core::llm_gateway::Gateway;
use inspire_core::store::Workspace;

/// Log JSON lines to stderr. Safe to call more than once.
pub fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_env("INSPIRE_LOG").unwrap_or_else(|_| "info".into());
    let _ = tracing_subscriber::fmt()
        .json()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

/// Serve the API on `bind` until interrupted.
pub fn serve(ws: Workspace, gateway: Gateway, bind: &str) -> std::io::Result<()> {
    init_logging();
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(bind).await?;
        tracing::info!(address = %listener.local_addr()?, workspace = %ws.root().display(), "listening");
        let app = api::router(api::AppState::new(ws, gateway));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
    })
}
