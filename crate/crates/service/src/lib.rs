//! HTTP service for live interview sessions.
//!
//! Commands go in through `POST /sessions/{id}/commands`; every state
//! change comes back out through the role-filtered event stream at
//! `GET /sessions/{id}/events`. Sessions are event-sourced and recovered
//! from their journals at startup.

mod app;
mod error;
pub mod store;

pub use app::{router, AppState};
pub use error::ApiError;
