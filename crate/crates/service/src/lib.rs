//! HTTP/JSON service for scene texturing projects.
//!
//! Every mutation (texturing jobs and edits) runs on one worker in queue
//! order. Each successful mutation bumps the scene revision, which every
//! response carries in the `x-scene-revision` header.

pub mod api;
mod error;
mod routes;
mod service;

pub use error::ApiError;
pub use routes::router;
pub use service::Service;

use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::TcpListener;

/// Binds `addr`, naming the address when it is taken.
pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr)
        .await
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot bind {addr}: {e}")))
}

/// Serves the API until `shutdown` resolves.
pub async fn serve(
    service: Arc<Service>,
    listener: TcpListener,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service)).with_graceful_shutdown(shutdown).await
}
