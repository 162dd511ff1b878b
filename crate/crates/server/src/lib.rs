//! HTTP campaign server: hands out question replicas under leases, records
//! answers in the append-only log before acknowledging them, and reports
//! progress and resolved point labels.

pub mod dispatch;
mod http;
mod service;

use std::future::Future;
use std::io;

pub use dispatch::{Clock, ManualClock, MonotonicClock};
pub use http::{router, Registry};
pub use service::{content_type, ApiError, CampaignService, ServerError, ServiceOptions};

/// Serves `app` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: axum::Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}
