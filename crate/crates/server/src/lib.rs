//! Review sealing service: environment configuration, the request logic
//! shared by HTTP and CLI, the axum router, and the operator command line.

pub mod api;
pub mod cli;
pub mod config;
pub mod service;

pub use api::{router, ApiError};
pub use config::{ConfigError, ServiceConfig};
pub use service::{Service, ServiceError};
