//! The verification server: listen for draft batches, verify them at every
//! exit, stream early-exit outputs through a prioritized send queue, ship
//! the final output directly, and reset the queue.

use crate::backend::Verifier;
use crate::decode::{DraftBatch, VerifyMode, VerifyResult};
use crate::error::{Error, Result};
use crate::prf::{prf, tag};
use crate::queue::{ServerQueue, ServerQueueStrategy};
use crate::sim::Mode;
use crate::transport::Session;
use crate::types::TokenSeq;
use crate::wire::{ExitOutput, Message, PROTOCOL_VERSION};
use std::sync::{Condvar, Mutex};

/// Server-side knobs for one session.
#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub mode: Mode,
    pub gamma: usize,
    /// Token budget for autoregressive requests.
    pub total_tokens: usize,
    pub queue_strategy: ServerQueueStrategy,
    pub verify_mode: VerifyMode,
    /// Seed for per-round stochastic verification sub-seeds.
    pub model_seed: u64,
    pub vocab: u32,
}

/// Counters from one served session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ServerSessionStats {
    pub rounds: u64,
    /// Early-exit outputs discarded unsent when their round's final shipped.
    pub discarded_exits: u64,
}

/// Streaming priority of a verified output: its best per-token probability.
pub fn priority_score(result: &VerifyResult) -> f64 {
    result.confidence
}

struct Outbox {
    inner: Mutex<OutboxInner>,
    cv: Condvar,
}

struct OutboxInner {
    queue: ServerQueue,
    pending_final: Option<ExitOutput>,
    discarded: u64,
    shutdown: bool,
    send_failure: Option<String>,
}

/// Sender thread: the final output always preempts queued early exits, and
/// dispatching it discards whatever the queue still holds, so no early exit
/// of a round can follow that round's final output onto the wire.
fn sender_loop<S: Session + ?Sized>(outbox: &Outbox, session: &S) {
    loop {
        let msg = {
            let mut inner = outbox
                .cv
                .wait_while(outbox.inner.lock().expect("outbox poisoned"), |i| {
                    i.pending_final.is_none() && i.queue.is_empty() && !i.shutdown
                })
                .expect("outbox poisoned");
            if inner.shutdown {
                return;
            }
            if let Some(fin) = inner.pending_final.take() {
                inner.discarded += inner.queue.reset() as u64;
                fin
            } else {
                inner.queue.pop().expect("queue checked non-empty")
            }
        };
        if let Err(e) = session.send(&Message::Exit(msg)) {
            let mut inner = outbox.inner.lock().expect("outbox poisoned");
            inner.send_failure = Some(e.to_string());
            inner.shutdown = true;
            return;
        }
    }
}

/// Serve one session to completion (the peer's `END` or an error).
pub fn serve_session<M, S>(
    config: &ServerConfig,
    model: &M,
    session: &S,
    initial_prefix: &TokenSeq,
) -> Result<ServerSessionStats>
where
    M: Verifier + Sync + ?Sized,
    S: Session + ?Sized,
{
    // Handshake: validate the client's parameters against ours.
    match session.recv()? {
        Some(Message::Hello {
            version,
            vocab,
            num_exits,
            gamma,
        }) => {
            let ok = version == PROTOCOL_VERSION
                && vocab == config.vocab
                && usize::from(num_exits) == model.exit_count()
                && usize::from(gamma) == config.gamma;
            if !ok {
                let reason = format!(
                    "handshake mismatch: got version={version} vocab={vocab} exits={num_exits} gamma={gamma}"
                );
                session.send(&Message::Error {
                    round_id: 0,
                    reason: reason.clone(),
                })?;
                return Err(Error::protocol(reason));
            }
            session.send(&Message::Hello {
                version: PROTOCOL_VERSION,
                vocab: config.vocab,
                num_exits: model.exit_count() as u16,
                gamma: config.gamma as u16,
            })?;
        }
        other => return Err(Error::protocol(format!("expected HELLO, got {other:?}"))),
    }

    let outbox = Outbox {
        inner: Mutex::new(OutboxInner {
            queue: ServerQueue::new(config.queue_strategy),
            pending_final: None,
            discarded: 0,
            shutdown: false,
            send_failure: None,
        }),
        cv: Condvar::new(),
    };

    std::thread::scope(|scope| {
        scope.spawn(|| sender_loop(&outbox, session));
        let result = listen(config, model, session, initial_prefix, &outbox);
        {
            let mut inner = outbox.inner.lock().expect("outbox poisoned");
            inner.shutdown = true;
        }
        outbox.cv.notify_all();
        result
    })
}

fn listen<M, S>(
    config: &ServerConfig,
    model: &M,
    session: &S,
    initial_prefix: &TokenSeq,
    outbox: &Outbox,
) -> Result<ServerSessionStats>
where
    M: Verifier + Sync + ?Sized,
    S: Session + ?Sized,
{
    let mut prefix = initial_prefix.clone();
    let mut expected_round: u32 = 1;
    let mut stats = ServerSessionStats::default();

    loop {
        let msg = match session.recv()? {
            Some(m) => m,
            None => {
                return Err(Error::protocol(
                    "connection closed before the session ended",
                ))
            }
        };
        match msg {
            Message::DraftSubmit {
                round_id,
                prefix_len,
                tokens,
                payload,
            } => {
                if round_id != expected_round {
                    let reason = format!("batch for round {round_id}, expected {expected_round}");
                    session.send(&Message::Error {
                        round_id,
                        reason: reason.clone(),
                    })?;
                    return Err(Error::protocol(reason));
                }
                if prefix_len as usize != prefix.len() {
                    let reason = format!(
                        "prefix length {prefix_len} does not match server prefix {}",
                        prefix.len()
                    );
                    session.send(&Message::Error {
                        round_id,
                        reason: reason.clone(),
                    })?;
                    return Err(Error::protocol(reason));
                }
                let final_tokens = if config.mode == Mode::Ar {
                    handle_ar(config, model, round_id, &prefix, outbox)?
                } else {
                    if tokens.len() != config.gamma {
                        let reason = "batch gamma does not match session gamma".to_string();
                        session.send(&Message::Error {
                            round_id,
                            reason: reason.clone(),
                        })?;
                        return Err(Error::protocol(reason));
                    }
                    let batch = DraftBatch::from_wire(round_id, prefix_len, tokens, &payload)?;
                    handle_batch(config, model, &batch, &prefix, outbox)?
                };
                prefix.extend_from(&final_tokens);
                expected_round += 1;
                stats.rounds += 1;
            }
            Message::End { .. } => break,
            Message::Error { reason, .. } => {
                return Err(Error::protocol(format!("client error: {reason}")))
            }
            other => {
                return Err(Error::protocol(format!(
                    "unexpected message type {}",
                    other.msg_type()
                )))
            }
        }
        let inner = outbox.inner.lock().expect("outbox poisoned");
        if let Some(reason) = &inner.send_failure {
            return Err(Error::protocol(format!("send failed: {reason}")));
        }
    }
    let inner = outbox.inner.lock().expect("outbox poisoned");
    stats.discarded_exits = inner.discarded;
    Ok(stats)
}

/// Verify at every exit, queueing exits 1..L-1 as they complete and
/// dispatching the final exit directly. Returns the final output tokens.
fn handle_batch<M: Verifier + Sync + ?Sized>(
    config: &ServerConfig,
    model: &M,
    batch: &DraftBatch,
    prefix: &TokenSeq,
    outbox: &Outbox,
) -> Result<TokenSeq> {
    let exits = model.exit_count();
    let round_seed = prf(
        config.model_seed,
        tag::ROUND_RNG,
        &[],
        u64::from(batch.round_id),
    );
    let results = model.verify_batch(prefix, batch, config.verify_mode, round_seed)?;
    let mut final_tokens = TokenSeq::empty();
    for result in &results {
        let out = ExitOutput {
            round_id: batch.round_id,
            exit_index: result.exit_index as u16,
            accepted: result.accepted as u16,
            tokens: result.output.clone(),
            score: priority_score(result) as f32,
            is_final: result.exit_index == exits,
        };
        if out.is_final {
            final_tokens = out.tokens.clone();
            let mut inner = outbox.inner.lock().expect("outbox poisoned");
            inner.pending_final = Some(out);
            outbox.cv.notify_all();
        } else if config.mode == Mode::Fsd {
            let mut inner = outbox.inner.lock().expect("outbox poisoned");
            inner.queue.push(out);
            outbox.cv.notify_all();
        }
    }
    Ok(final_tokens)
}

/// Autoregressive request: greedily generate the full token budget at the
/// final exit and respond once.
fn handle_ar<M: Verifier + Sync + ?Sized>(
    config: &ServerConfig,
    model: &M,
    round_id: u32,
    prefix: &TokenSeq,
    outbox: &Outbox,
) -> Result<TokenSeq> {
    let n = config.total_tokens;
    if n == 0 || n > usize::from(u16::MAX) {
        return Err(Error::protocol("autoregressive token budget out of range"));
    }
    let exits = model.exit_count();
    let (tokens, best) = model.generate_final(prefix, n)?;
    let out = ExitOutput {
        round_id,
        exit_index: exits as u16,
        accepted: (n - 1) as u16,
        tokens: tokens.clone(),
        score: best as f32,
        is_final: true,
    };
    let mut inner = outbox.inner.lock().expect("outbox poisoned");
    inner.pending_final = Some(out);
    outbox.cv.notify_all();
    Ok(tokens)
}
