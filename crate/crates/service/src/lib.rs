//! HTTP service and batch commands around `arsimplify_core`.

pub mod api;
pub mod config;
pub mod error;

pub use api::{router, AppState};
pub use config::ServiceConfig;
