//! REST service for annotation projects: upload of uses, tutorial-gated
//! human annotation, computational annotation tasks, statistics,
//! clustering, graph views and export.

pub mod app;
pub mod config;
pub mod http;
pub mod store;
pub mod tutorial;

pub use app::{ApiError, App};
pub use config::{Config, GateParams};
pub use http::router;

use std::sync::Arc;

/// Opens the configured store and serves until the process is stopped.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let store = match &config.data_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            store::Store::open(&dir.join("wugkit.sqlite3"))
        }
        None => store::Store::in_memory(),
    }
    .map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(App::new(config, store)))).await
}
