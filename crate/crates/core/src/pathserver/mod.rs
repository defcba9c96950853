//! Single-record JSON path service and its polling client.
//!
//! Routes: `GET /path`, `PUT /path` (and `POST /path`), `GET /health`.
//! Every accepted update bumps the version carried in the `X-Path-Version`
//! response header.

mod client;
mod server;

pub use client::{fetch_path, path_url, spawn_poller, PathClient, PollEvent, Poller, RetryPolicy, VersionedPlan};
pub use server::{router, serve, PathRecord, PathStore, ServerHandle};

use axum::http::HeaderName;
use thiserror::Error;

use crate::pathcodec::WireError;

pub const VERSION_HEADER: HeaderName = HeaderName::from_static("x-path-version");

/// Environment variable consulted for the bind address.
pub const ADDR_ENV: &str = "GRIDPILOT_ADDR";

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("bind failed: {0}")]
    Bind(std::io::Error),
    #[error("server error: {0}")]
    Io(std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClientError {
    #[error("invalid url: {0}")]
    InvalidUrl(String),
    #[error("network failure after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },
    #[error("no-plan: the server holds no path")]
    NoPlan,
    #[error("unexpected HTTP status {0}")]
    Status(u16),
    #[error("undecodable plan ({source}); body starts {excerpt:?}")]
    Decode { source: WireError, excerpt: String },
}
