//! The edge client: drafting, early-exit ingestion, pre-drafting into the
//! cache, and cache-or-draft response to final verifications.
//!
//! [`client_generate`] drives a real transport session with a coordinator,
//! a receiver thread and a bounded worker pool. The simulator reuses the
//! same ingestion and pre-drafting helpers inside its event loop.

use crate::analytics::{RoundRecord, RunMetrics};
use crate::backend::Drafter;
use crate::cache::{CacheEntry, PreDraftCache};
use crate::decode::{DraftBatch, DraftMode, PayloadMode};
use crate::error::{Error, Result};
use crate::queue::{ClientQueue, ClientQueueStrategy};
use crate::sim::Mode;
use crate::transport::Session;
use crate::types::TokenSeq;
use crate::wire::{ExitOutput, Message, PROTOCOL_VERSION};
use std::sync::{Condvar, Mutex};

/// Client-side knobs for one generation session.
#[derive(Debug, Clone)]
pub struct ClientConfig {
    pub mode: Mode,
    pub gamma: usize,
    /// Stop at the first round boundary with at least this many tokens.
    pub total_tokens: usize,
    pub worker_threads: usize,
    pub queue_strategy: ClientQueueStrategy,
    pub draft_mode: DraftMode,
    pub payload_mode: PayloadMode,
    /// Keys sampled drafting and the random queue strategy.
    pub session_seed: u64,
    /// Advertised in the handshake.
    pub vocab: u32,
    pub num_exits: usize,
}

/// What one client session produced.
#[derive(Debug, Clone)]
pub struct ClientRunOutput {
    pub tokens: TokenSeq,
    pub metrics: RunMetrics,
    pub rounds: Vec<RoundRecord>,
    pub wall_ms: f64,
}

/// How one received message was applied to the round state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    /// The round's final output slot was filled.
    Final,
    /// An early exit was queued for pre-drafting.
    Queued,
    /// The message carried an old round id and was dropped.
    StaleDropped,
}

/// Apply one exit-output message to the current round.
///
/// Final messages fill the final slot; early exits for the current round are
/// recorded and queued; messages from finished rounds are dropped; messages
/// from future rounds are a protocol violation.
pub fn receiver_ingest(
    current_round: u32,
    queue: &mut ClientQueue,
    received: &mut Vec<ExitOutput>,
    final_slot: &mut Option<ExitOutput>,
    msg: ExitOutput,
) -> Result<IngestOutcome> {
    if msg.round_id > current_round {
        return Err(Error::protocol(format!(
            "exit output for future round {} (current {current_round})",
            msg.round_id
        )));
    }
    if msg.round_id < current_round {
        return Ok(IngestOutcome::StaleDropped);
    }
    if msg.is_final {
        if final_slot.is_some() {
            return Err(Error::protocol("duplicate final output for this round"));
        }
        *final_slot = Some(msg);
        Ok(IngestOutcome::Final)
    } else {
        received.push(msg.clone());
        queue.push(msg);
        Ok(IngestOutcome::Queued)
    }
}

/// Draft the continuation of `prefix ++ exit_output.tokens`, producing the
/// entry to cache under the exit's output key.
#[allow(clippy::too_many_arguments)]
pub fn pre_draft<D: Drafter + ?Sized>(
    model: &D,
    prefix: &TokenSeq,
    exit_output: &ExitOutput,
    gamma: usize,
    draft_mode: DraftMode,
    payload_mode: PayloadMode,
    session_seed: u64,
    next_round: u32,
) -> Result<CacheEntry> {
    let extended = prefix.concat(&exit_output.tokens);
    let batch = model.draft_batch(
        &extended,
        gamma,
        draft_mode,
        payload_mode,
        session_seed,
        next_round,
    )?;
    Ok(CacheEntry {
        tokens: batch.tokens,
        payload: batch.payload,
    })
}

/// Smallest received exit index whose output equals the final output, or 0.
pub fn earliest_matching_exit(received: &[ExitOutput], final_output: &ExitOutput) -> u16 {
    received
        .iter()
        .filter(|e| e.tokens == final_output.tokens)
        .map(|e| e.exit_index)
        .min()
        .unwrap_or(0)
}

struct Inner {
    round: u32,
    prefix: TokenSeq,
    emitted: TokenSeq,
    queue: ClientQueue,
    cache: PreDraftCache,
    received: Vec<ExitOutput>,
    final_slot: Option<ExitOutput>,
    metrics: RunMetrics,
    failure: Option<String>,
    closed: bool,
    shutdown: bool,
}

struct Shared {
    inner: Mutex<Inner>,
    final_cv: Condvar,
    work_cv: Condvar,
}

impl Shared {
    fn fail(&self, reason: String) {
        let mut inner = self.inner.lock().expect("client state poisoned");
        if inner.failure.is_none() {
            inner.failure = Some(reason);
        }
        self.final_cv.notify_all();
        self.work_cv.notify_all();
    }
}

/// Run one generation session over a live transport.
///
/// Spawns a receiver and `worker_threads` pre-draft workers; the calling
/// thread acts as the coordinator. The token stream is identical for any
/// worker count in greedy mode; threads only change the timing.
pub fn client_generate<D, S>(
    config: &ClientConfig,
    model: &D,
    session: &S,
    initial_prefix: &TokenSeq,
) -> Result<ClientRunOutput>
where
    D: Drafter + Sync + ?Sized,
    S: Session + ?Sized,
{
    if initial_prefix.is_empty() {
        return Err(Error::domain("initial prefix must be non-empty"));
    }
    if config.total_tokens == 0 {
        return Err(Error::domain("total_tokens must be at least 1"));
    }

    session.send(&Message::Hello {
        version: PROTOCOL_VERSION,
        vocab: config.vocab,
        num_exits: config.num_exits as u16,
        gamma: config.gamma as u16,
    })?;
    match session.recv()? {
        Some(Message::Hello { version, .. }) if version == PROTOCOL_VERSION => {}
        Some(Message::Error { reason, .. }) => {
            return Err(Error::protocol(format!(
                "server rejected session: {reason}"
            )))
        }
        other => return Err(Error::protocol(format!("bad handshake reply: {other:?}"))),
    }

    let shared = Shared {
        inner: Mutex::new(Inner {
            round: 1,
            prefix: initial_prefix.clone(),
            emitted: TokenSeq::empty(),
            queue: ClientQueue::new(config.queue_strategy, config.session_seed),
            cache: PreDraftCache::new(),
            received: Vec::new(),
            final_slot: None,
            metrics: RunMetrics::default(),
            failure: None,
            closed: false,
            shutdown: false,
        }),
        final_cv: Condvar::new(),
        work_cv: Condvar::new(),
    };

    let start = std::time::Instant::now();
    let result = std::thread::scope(|scope| {
        scope.spawn(|| receiver_loop(&shared, session));
        for _ in 0..config.worker_threads {
            scope.spawn(|| worker_loop(&shared, config, model));
        }
        let run = coordinate(&shared, config, model, session);
        {
            let mut inner = shared.inner.lock().expect("client state poisoned");
            inner.shutdown = true;
        }
        shared.work_cv.notify_all();
        shared.final_cv.notify_all();
        run
    });
    result.map(|(tokens, metrics, rounds)| ClientRunOutput {
        tokens,
        metrics,
        rounds,
        wall_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

fn receiver_loop<S: Session + ?Sized>(shared: &Shared, session: &S) {
    loop {
        match session.recv() {
            Ok(Some(Message::Exit(msg))) => {
                let mut inner = shared.inner.lock().expect("client state poisoned");
                if inner.shutdown {
                    return;
                }
                let round = inner.round;
                let Inner {
                    queue,
                    received,
                    final_slot,
                    ..
                } = &mut *inner;
                match receiver_ingest(round, queue, received, final_slot, msg) {
                    Ok(IngestOutcome::Final) => {
                        shared.final_cv.notify_all();
                    }
                    Ok(IngestOutcome::Queued) => {
                        shared.work_cv.notify_one();
                    }
                    Ok(IngestOutcome::StaleDropped) => {
                        inner.metrics.stale_drops += 1;
                    }
                    Err(e) => {
                        drop(inner);
                        shared.fail(e.to_string());
                        return;
                    }
                }
            }
            Ok(Some(Message::Error { reason, .. })) => {
                shared.fail(format!("server error: {reason}"));
                return;
            }
            Ok(Some(other)) => {
                shared.fail(format!("unexpected message type {}", other.msg_type()));
                return;
            }
            Ok(None) => {
                let mut inner = shared.inner.lock().expect("client state poisoned");
                inner.closed = true;
                shared.final_cv.notify_all();
                shared.work_cv.notify_all();
                return;
            }
            Err(e) => {
                shared.fail(e.to_string());
                return;
            }
        }
    }
}

fn worker_loop<D: Drafter + Sync + ?Sized>(shared: &Shared, config: &ClientConfig, model: &D) {
    loop {
        let (generation, key, exit_output, prefix, next_round) = {
            let mut inner = shared.inner.lock().expect("client state poisoned");
            loop {
                if inner.shutdown || inner.failure.is_some() {
                    return;
                }
                if let Some(entry) = inner.queue.pop() {
                    let key = entry.tokens.as_slice().to_vec();
                    if !inner.cache.begin_job(&key) {
                        continue;
                    }
                    inner.metrics.predraft_jobs += 1;
                    let generation = inner.cache.generation();
                    let prefix = inner.prefix.clone();
                    let next_round = inner.round + 1;
                    break (generation, key, entry, prefix, next_round);
                }
                inner = shared.work_cv.wait(inner).expect("client state poisoned");
            }
        };
        match pre_draft(
            model,
            &prefix,
            &exit_output,
            config.gamma,
            config.draft_mode,
            config.payload_mode,
            config.session_seed,
            next_round,
        ) {
            Ok(entry) => {
                let mut inner = shared.inner.lock().expect("client state poisoned");
                inner.cache.insert(generation, key, entry);
            }
            Err(e) => {
                shared.fail(format!("pre-draft failed: {e}"));
                return;
            }
        }
    }
}

fn coordinate<D, S>(
    shared: &Shared,
    config: &ClientConfig,
    model: &D,
    session: &S,
) -> Result<(TokenSeq, RunMetrics, Vec<RoundRecord>)>
where
    D: Drafter + Sync + ?Sized,
    S: Session + ?Sized,
{
    let mut rounds: Vec<RoundRecord> = Vec::new();

    // Round 1: AR sends a bare request, SD/FSD draft first.
    if config.mode == Mode::Ar {
        let prefix_len = {
            let inner = shared.inner.lock().expect("client state poisoned");
            inner.prefix.len() as u32
        };
        session.send(&Message::DraftSubmit {
            round_id: 1,
            prefix_len,
            tokens: TokenSeq::empty(),
            payload: crate::wire::WirePayload::Compact(Vec::new()),
        })?;
    } else {
        let (prefix, round) = {
            let inner = shared.inner.lock().expect("client state poisoned");
            (inner.prefix.clone(), inner.round)
        };
        let batch = model.draft_batch(
            &prefix,
            config.gamma,
            config.draft_mode,
            config.payload_mode,
            config.session_seed,
            round,
        )?;
        {
            let mut inner = shared.inner.lock().expect("client state poisoned");
            inner.metrics.draft_calls += config.gamma as u64;
        }
        session.send(&batch.to_message())?;
    }

    loop {
        let mut inner = shared
            .final_cv
            .wait_while(shared.inner.lock().expect("client state poisoned"), |i| {
                i.final_slot.is_none() && i.failure.is_none() && !i.closed
            })
            .expect("client state poisoned");
        if let Some(reason) = inner.failure.clone() {
            let partial = inner.emitted.as_slice().to_vec();
            return Err(Error::Session {
                reason,
                partial_output: partial,
            });
        }
        let Some(fin) = inner.final_slot.take() else {
            let partial = inner.emitted.as_slice().to_vec();
            return Err(Error::Session {
                reason: "connection closed before the final output".into(),
                partial_output: partial,
            });
        };

        let round = inner.round;
        let delta = u32::from(fin.accepted);
        let earliest = earliest_matching_exit(&inner.received, &fin);
        if earliest > 0 {
            inner.metrics.matched_rounds += 1;
            inner.metrics.sum_earliest_matching_exit += u64::from(earliest);
        }
        let hit_entry = if config.mode == Mode::Fsd {
            inner.cache.lookup(fin.tokens.as_slice()).cloned()
        } else {
            None
        };
        let hit = hit_entry.is_some();
        inner.metrics.rounds += 1;
        inner.metrics.tokens_emitted += u64::from(delta) + 1;
        if hit {
            inner.metrics.cache_hits += 1;
        } else {
            inner.metrics.cache_misses += 1;
        }
        inner.prefix.extend_from(&fin.tokens);
        inner.emitted.extend_from(&fin.tokens);
        let done = inner.metrics.tokens_emitted >= config.total_tokens as u64;
        // draft_calls: fresh drafting this round's cache decision triggered.
        rounds.push(RoundRecord {
            round,
            delta,
            tau_inst: delta + 1,
            hit,
            earliest_exit: earliest,
            draft_calls: if hit || done { 0 } else { config.gamma as u32 },
        });

        // Atomic end-of-round reset; pre-draft jobs still in flight will
        // insert into a stale generation and be discarded.
        inner.cache.reset();
        inner.queue.reset();
        inner.received.clear();
        inner.round += 1;

        let next_round = inner.round;
        let new_prefix = inner.prefix.clone();
        let metrics = inner.metrics;
        drop(inner);

        if done {
            session.send(&Message::End {
                round_id: next_round - 1,
            })?;
            let inner = shared.inner.lock().expect("client state poisoned");
            return Ok((inner.emitted.clone(), metrics, rounds));
        }

        let batch = if let Some(entry) = hit_entry {
            DraftBatch {
                round_id: next_round,
                prefix_len: new_prefix.len(),
                tokens: entry.tokens,
                payload: entry.payload,
            }
        } else {
            let batch = model.draft_batch(
                &new_prefix,
                config.gamma,
                config.draft_mode,
                config.payload_mode,
                config.session_seed,
                next_round,
            )?;
            {
                let mut inner = shared.inner.lock().expect("client state poisoned");
                inner.metrics.draft_calls += config.gamma as u64;
            }
            batch
        };
        session.send(&batch.to_message())?;
    }
}
