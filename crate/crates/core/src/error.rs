//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by models, verification, transports and runtimes.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on a value or argument was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A wire frame or payload could not be decoded.
    #[error("decode error: {0}")]
    Decode(String),

    /// The peer violated the protocol (bad round ids, corrupt batches, ...).
    #[error("protocol error: {0}")]
    Protocol(String),

    /// The session failed mid-run. Tokens produced so far are attached.
    #[error("session error: {reason} (after {} tokens)", partial_output.len())]
    Session {
        reason: String,
        partial_output: Vec<u32>,
    },

    /// A simulation scenario could not make progress.
    #[error("scenario error: {0}")]
    Scenario(String),

    /// Configuration file problems, with the offending keys named.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn decode(msg: impl Into<String>) -> Self {
        Error::Decode(msg.into())
    }

    pub fn protocol(msg: impl Into<String>) -> Self {
        Error::Protocol(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
