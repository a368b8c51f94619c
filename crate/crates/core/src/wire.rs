//! Wire messages and the bit-exact frame codec.
//!
//! A frame is `length: u32 BE` (payload length), `msg_type: u8`, `payload`.
//! All multi-byte integers are big-endian; probabilities travel as f32.
//!
//! Payload layouts:
//! - `DRAFT_SUBMIT`: round_id u32, prefix_len u32, gamma u16, mode u8
//!   (0 = compact, 1 = full), tokens gamma x u32, then probabilities
//!   (compact: gamma x f32 chosen-token; full: gamma x V x f32).
//! - `EXIT_OUTPUT` / `FINAL_OUTPUT`: round_id u32, exit_index u16, delta u16,
//!   tokens (delta+1) x u32, score f32, isfinal u8.
//! - `HELLO`: protocol version u16, vocab u32, L u16, gamma u16.
//! - `END`: round_id u32. `ERROR`: round_id u32 + UTF-8 reason.

use crate::error::{Error, Result};
use crate::types::TokenSeq;

pub const PROTOCOL_VERSION: u16 = 1;

/// Largest vocabulary for which full-distribution payloads are permitted,
/// bounding the frame size.
pub const MAX_FULL_PAYLOAD_VOCAB: u32 = 1024;

pub const MSG_HELLO: u8 = 1;
pub const MSG_DRAFT_SUBMIT: u8 = 2;
pub const MSG_EXIT_OUTPUT: u8 = 3;
pub const MSG_FINAL_OUTPUT: u8 = 4;
pub const MSG_END: u8 = 5;
pub const MSG_ERROR: u8 = 6;

/// Wire form of a draft batch's probability payload.
#[derive(Debug, Clone, PartialEq)]
pub enum WirePayload {
    /// Chosen-token probability per drafted position.
    Compact(Vec<f32>),
    /// Full distribution per drafted position; all rows share one length.
    Full(Vec<Vec<f32>>),
}

/// One exit's verified output as shipped to the client.
#[derive(Debug, Clone, PartialEq)]
pub struct ExitOutput {
    pub round_id: u32,
    /// 1-based; `num_exits` marks the final exit.
    pub exit_index: u16,
    /// Number of draft tokens this exit accepted.
    pub accepted: u16,
    /// The `accepted + 1` emitted tokens.
    pub tokens: TokenSeq,
    /// Streaming priority: max per-token probability of the output.
    pub score: f32,
    pub is_final: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        version: u16,
        vocab: u32,
        num_exits: u16,
        gamma: u16,
    },
    DraftSubmit {
        round_id: u32,
        prefix_len: u32,
        tokens: TokenSeq,
        payload: WirePayload,
    },
    Exit(ExitOutput),
    End {
        round_id: u32,
    },
    Error {
        round_id: u32,
        reason: String,
    },
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Hello { .. } => MSG_HELLO,
            Message::DraftSubmit { .. } => MSG_DRAFT_SUBMIT,
            Message::Exit(e) if e.is_final => MSG_FINAL_OUTPUT,
            Message::Exit(_) => MSG_EXIT_OUTPUT,
            Message::End { .. } => MSG_END,
            Message::Error { .. } => MSG_ERROR,
        }
    }
}

fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn put_f32(buf: &mut Vec<u8>, v: f32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::decode("truncated payload"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::decode(format!(
                "{} trailing bytes in payload",
                self.remaining()
            )));
        }
        Ok(())
    }
}

/// Encode a message payload (without the frame header).
pub fn encode_payload(msg: &Message) -> Vec<u8> {
    let mut buf = Vec::new();
    match msg {
        Message::Hello {
            version,
            vocab,
            num_exits,
            gamma,
        } => {
            put_u16(&mut buf, *version);
            put_u32(&mut buf, *vocab);
            put_u16(&mut buf, *num_exits);
            put_u16(&mut buf, *gamma);
        }
        Message::DraftSubmit {
            round_id,
            prefix_len,
            tokens,
            payload,
        } => {
            put_u32(&mut buf, *round_id);
            put_u32(&mut buf, *prefix_len);
            put_u16(&mut buf, tokens.len() as u16);
            let mode = match payload {
                WirePayload::Compact(_) => 0u8,
                WirePayload::Full(_) => 1u8,
            };
            buf.push(mode);
            for &t in tokens.as_slice() {
                put_u32(&mut buf, t);
            }
            match payload {
                WirePayload::Compact(ps) => {
                    for &p in ps {
                        put_f32(&mut buf, p);
                    }
                }
                WirePayload::Full(rows) => {
                    for row in rows {
                        for &p in row {
                            put_f32(&mut buf, p);
                        }
                    }
                }
            }
        }
        Message::Exit(e) => {
            put_u32(&mut buf, e.round_id);
            put_u16(&mut buf, e.exit_index);
            put_u16(&mut buf, e.accepted);
            for &t in e.tokens.as_slice() {
                put_u32(&mut buf, t);
            }
            put_f32(&mut buf, e.score);
            buf.push(u8::from(e.is_final));
        }
        Message::End { round_id } => {
            put_u32(&mut buf, *round_id);
        }
        Message::Error { round_id, reason } => {
            put_u32(&mut buf, *round_id);
            buf.extend_from_slice(reason.as_bytes());
        }
    }
    buf
}

/// Encode a full frame: `length (u32 BE) | msg_type (u8) | payload`.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let payload = encode_payload(msg);
    let mut frame = Vec::with_capacity(5 + payload.len());
    put_u32(&mut frame, payload.len() as u32);
    frame.push(msg.msg_type());
    frame.extend_from_slice(&payload);
    frame
}

/// Decode a message from its type byte and payload.
pub fn decode_payload(msg_type: u8, payload: &[u8]) -> Result<Message> {
    let mut r = Reader::new(payload);
    let msg = match msg_type {
        MSG_HELLO => {
            let version = r.u16()?;
            let vocab = r.u32()?;
            let num_exits = r.u16()?;
            let gamma = r.u16()?;
            Message::Hello {
                version,
                vocab,
                num_exits,
                gamma,
            }
        }
        MSG_DRAFT_SUBMIT => {
            let round_id = r.u32()?;
            let prefix_len = r.u32()?;
            let gamma = r.u16()? as usize;
            let mode = r.u8()?;
            let mut tokens = Vec::with_capacity(gamma);
            for _ in 0..gamma {
                tokens.push(r.u32()?);
            }
            let payload = match mode {
                0 => {
                    let mut ps = Vec::with_capacity(gamma);
                    for _ in 0..gamma {
                        ps.push(r.f32()?);
                    }
                    WirePayload::Compact(ps)
                }
                1 => {
                    let rest = r.remaining();
                    if gamma == 0 {
                        WirePayload::Full(Vec::new())
                    } else {
                        if !rest.is_multiple_of(4 * gamma) {
                            return Err(Error::decode(
                                "full payload length is not a multiple of gamma",
                            ));
                        }
                        let vocab = rest / (4 * gamma);
                        if vocab == 0 {
                            return Err(Error::decode("full payload carries no distributions"));
                        }
                        let mut rows = Vec::with_capacity(gamma);
                        for _ in 0..gamma {
                            let mut row = Vec::with_capacity(vocab);
                            for _ in 0..vocab {
                                row.push(r.f32()?);
                            }
                            rows.push(row);
                        }
                        WirePayload::Full(rows)
                    }
                }
                m => return Err(Error::decode(format!("unknown payload mode {m}"))),
            };
            Message::DraftSubmit {
                round_id,
                prefix_len,
                tokens: TokenSeq::new(tokens),
                payload,
            }
        }
        MSG_EXIT_OUTPUT | MSG_FINAL_OUTPUT => {
            let round_id = r.u32()?;
            let exit_index = r.u16()?;
            let accepted = r.u16()?;
            let count = accepted as usize + 1;
            let mut tokens = Vec::with_capacity(count);
            for _ in 0..count {
                tokens.push(r.u32()?);
            }
            let score = r.f32()?;
            let is_final = match r.u8()? {
                0 => false,
                1 => true,
                b => return Err(Error::decode(format!("bad isfinal byte {b}"))),
            };
            if is_final != (msg_type == MSG_FINAL_OUTPUT) {
                return Err(Error::decode("isfinal flag contradicts message type"));
            }
            Message::Exit(ExitOutput {
                round_id,
                exit_index,
                accepted,
                tokens: TokenSeq::new(tokens),
                score,
                is_final,
            })
        }
        MSG_END => Message::End { round_id: r.u32()? },
        MSG_ERROR => {
            let round_id = r.u32()?;
            let rest = r.take(r.remaining())?;
            let reason = std::str::from_utf8(rest)
                .map_err(|_| Error::decode("error reason is not valid UTF-8"))?
                .to_string();
            Message::Error { round_id, reason }
        }
        t => return Err(Error::decode(format!("unknown msg_type {t}"))),
    };
    r.finish()?;
    Ok(msg)
}

/// Decode one frame from a byte buffer; returns the message and the number
/// of bytes consumed.
pub fn decode_frame(buf: &[u8]) -> Result<(Message, usize)> {
    if buf.len() < 5 {
        return Err(Error::decode("truncated frame header"));
    }
    let len = u32::from_be_bytes(buf[0..4].try_into().unwrap()) as usize;
    let msg_type = buf[4];
    if buf.len() < 5 + len {
        return Err(Error::decode(format!(
            "frame declares {len} payload bytes, only {} available",
            buf.len() - 5
        )));
    }
    let msg = decode_payload(msg_type, &buf[5..5 + len])?;
    Ok((msg, 5 + len))
}
