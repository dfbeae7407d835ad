//! HTTP/JSON service: upload a CSV, ask questions or run command chains
//! against it, and read back the session history and table embedding.
//! Everything runs locally; the service opens no outbound connections.

pub mod config;
pub mod egress;
pub mod error;
pub mod journal;
mod routes;
pub mod state;

use std::sync::Arc;

pub use config::{Config, ConfigError};
pub use error::ApiError;
pub use routes::router;
pub use state::{replay, AppState, ReplayReport, StateError};

/// Serves `state` on `listener` until Ctrl-C.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            tokio::signal::ctrl_c().await.ok();
        })
        .await
}
