//! HTTP service for human participant sessions.
//!
//! Participants write explanations for maps (Explain), rate other people's
//! explanations (Rate), or find the treasure under the same partial view the
//! simulated listener has (Navigate). Every session is an append-only event
//! log on disk; finished sessions export as corpus records.

pub mod clock;
pub mod http;
pub mod session;
pub mod store;

pub use clock::{Clock, ManualClock, SystemClock};
pub use http::{router, serve};
pub use session::{
    normalize_whitespace, Ack, CreateSession, Created, Event, EventBody, ExpiryReason, MapSummary,
    Mode, Payload, ServiceConfig, SessionHeader, Sessions, EXPLAIN_INSTRUCTION,
    NAVIGATE_INSTRUCTION, RATE_INSTRUCTION,
};
pub use store::{read_log, EventStore, SessionLog};

use thiserror::Error;

pub const ADMIN_TOKEN_ENV: &str = "WAYFINDER_ADMIN_TOKEN";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Unprocessable(String),
    #[error("{0}")]
    TooLarge(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("missing or wrong operator token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl ServiceError {
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::NotFound(_) => 404,
            ServiceError::Conflict(_) => 409,
            ServiceError::Unprocessable(_) => 422,
            ServiceError::TooLarge(_) => 413,
            ServiceError::BadRequest(_) => 400,
            ServiceError::Unauthorized => 401,
            ServiceError::Forbidden(_) => 403,
            ServiceError::Storage(_) | ServiceError::Config(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Unprocessable(_) => "invalid",
            ServiceError::TooLarge(_) => "too_large",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Unauthorized => "unauthorized",
            ServiceError::Forbidden(_) => "forbidden",
            ServiceError::Storage(_) | ServiceError::Config(_) => "internal",
        }
    }
}
