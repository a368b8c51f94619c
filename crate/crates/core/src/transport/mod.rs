//! Transports: framed blocking I/O, a real TCP session, and the
//! virtual-clock channel model used by the simulator.

pub mod frame;
pub mod sim;
pub mod tcp;

use crate::error::Result;
use crate::wire::Message;

/// A bidirectional message session. Sends are atomic per frame; `recv`
/// blocks until a message arrives or the peer closes.
pub trait Session: Send + Sync {
    fn send(&self, msg: &Message) -> Result<()>;
    /// Next message, or `Ok(None)` on orderly close.
    fn recv(&self) -> Result<Option<Message>>;
}
