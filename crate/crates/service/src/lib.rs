//! HTTP front end of the dataset search engine.
//!
//! All routes live under `/api/v1`; errors are returned as
//! `{code, message, details}` JSON.

pub mod error;
pub mod multipart;
pub mod routes;
pub mod state;

use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{HeaderName, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::{ApiError, ErrorBody};
pub use routes::{AugmentRequest, UploadMetadata, PROVENANCE_HEADER, UPLOAD_PLUGIN};
pub use state::AppState;

pub const MAX_BODY_BYTES: usize = 512 * 1024 * 1024;

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new()
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers(Any)
        .expose_headers([HeaderName::from_static(PROVENANCE_HEADER)]);
    if origins.is_empty() || origins.iter().any(|o| o == "*") {
        layer.allow_origin(Any)
    } else {
        let list: Vec<HeaderValue> = origins
            .iter()
            .filter_map(|o| HeaderValue::from_str(o).ok())
            .collect();
        layer.allow_origin(AllowOrigin::list(list))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/search", post(routes::search))
        .route("/upload", post(routes::upload))
        .route("/augment", post(routes::augment_handler))
        .route("/datasets", get(routes::list_datasets))
        .route("/datasets/{id}", get(routes::get_dataset))
        .route("/datasets/{id}/download", get(routes::download))
        .route("/stats", get(routes::stats))
        .route("/config", get(routes::config))
        .route("/areas", get(routes::areas))
        .route("/areas/{name}", get(routes::area))
        .route("/health", get(routes::health));
    let cors = cors(&state.config.cors_origins);
    Router::new()
        .nest("/api/v1", api)
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .layer(cors)
        .with_state(state)
}

async fn shutdown_signal() {
    if tokio::signal::ctrl_c().await.is_err() {
        std::future::pending::<()>().await;
    }
    log::info!("shutting down");
}

/// Serves until Ctrl-C.
pub async fn serve(state: Arc<AppState>, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown_signal())
        .await
}
