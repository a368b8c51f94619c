//! Length-prefixed frame I/O over blocking readers and writers.

use crate::error::{Error, Result};
use crate::wire::{decode_payload, encode_frame, Message};
use std::io::{Read, Write};

/// Write one complete frame.
pub fn write_frame<W: Write>(w: &mut W, msg: &Message) -> Result<()> {
    let frame = encode_frame(msg);
    w.write_all(&frame)?;
    w.flush()?;
    Ok(())
}

/// Read one complete frame. Returns `Ok(None)` on a clean EOF at a frame
/// boundary.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Message>> {
    let mut header = [0u8; 5];
    match r.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(header[0..4].try_into().unwrap()) as usize;
    let msg_type = header[4];
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)
        .map_err(|_| Error::decode("connection closed mid-frame"))?;
    Ok(Some(decode_payload(msg_type, &payload)?))
}
