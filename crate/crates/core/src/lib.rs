//! Speculative edge-cloud decoding: a client-side draft model proposes
//! tokens, a server-side target model with early exits verifies them, early
//! verifications stream back by priority, and the client pre-drafts their
//! continuations so a confirmed prediction answers the next round instantly.
//!
//! The crate provides the draft/verify mathematics, seeded synthetic models
//! with tunable agreement rates, the client and server runtimes over real
//! TCP, a deterministic virtual-clock simulator, the binary wire codec, and
//! closed-form latency/speedup/cost models for the same system.

pub mod adapter;
pub mod analytics;
pub mod backend;
pub mod cache;
pub mod client;
pub mod config;
pub mod decode;
pub mod error;
pub mod harness;
pub mod model;
pub mod prf;
pub mod queue;
pub mod server;
pub mod sim;
pub mod transport;
pub mod types;
pub mod wire;

pub use error::{Error, Result};
pub use types::{ProbVector, TokenSeq};
