//! Service layer for the activelabel engine: an HTTP/JSON API over annotation
//! sessions, a client for external embedding backends and the command line.

pub mod api;
pub mod backend;
pub mod cli;
pub mod config;
pub mod embedding;
pub mod store;

pub use api::{router, serve, serve_with_listener, AppState};
pub use backend::{BackendClient, BackendError};
pub use config::ServiceConfig;
