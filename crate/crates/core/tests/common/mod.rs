//! Shared fixtures and independent oracles for the integration suites.
//!
//! The oracles here deliberately re-derive expected behavior with
//! straight-line code instead of calling the runtime under test.
#![allow(dead_code)] // each test target compiles its own copy

use specdec_core::decode::{DraftMode, PayloadMode, VerifyMode};
use specdec_core::model::{draft_distribution, target_distribution, SyntheticParams, VocabConfig};
use specdec_core::queue::{ClientQueueStrategy, ServerQueueStrategy};
use specdec_core::sim::{Mode, Scenario, SimLatencies};
use specdec_core::types::TokenSeq;

/// The documented reference configuration (seed 42) used by recorded runs.
pub fn reference_params(seed: u64) -> SyntheticParams {
    SyntheticParams {
        seed,
        vocab: VocabConfig { size: 16 },
        num_exits: 4,
        alpha: 0.8,
        beta: vec![0.3, 0.6, 0.9],
        sharpness: 4.0,
    }
}

pub fn reference_scenario(mode: Mode, seed: u64) -> Scenario {
    Scenario {
        mode,
        params: reference_params(seed),
        prefix: TokenSeq::from(vec![3, 1, 4]),
        gamma: 4,
        n: 200,
        worker_threads: 3,
        client_queue: ClientQueueStrategy::Priority,
        server_queue: ServerQueueStrategy::Priority,
        draft_mode: DraftMode::Greedy,
        verify_mode: VerifyMode::Greedy,
        payload_mode: PayloadMode::Compact,
        latencies: SimLatencies {
            t_p: 20.0,
            t_q: 497.0,
            t_c: 95.0,
            t_r: 5.0,
        },
        forced_miss_pattern: Vec::new(),
    }
}

/// Greedy autoregressive decoding at the final exit, written straight-line.
pub fn oracle_greedy_ar(params: &SyntheticParams, prefix: &TokenSeq, n: usize) -> Vec<u32> {
    let mut ctx = prefix.clone();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let tok = target_distribution(params, &ctx, params.num_exits)
            .expect("oracle distribution")
            .argmax();
        out.push(tok);
        ctx.push(tok);
    }
    out
}

/// One oracle round of greedy draft-and-verify: returns the emitted tokens
/// (accepted prefix of the draft plus the target's own next token).
pub fn oracle_greedy_round(params: &SyntheticParams, prefix: &TokenSeq, gamma: usize) -> Vec<u32> {
    let mut draft_ctx = prefix.clone();
    let mut drafted = Vec::with_capacity(gamma);
    for _ in 0..gamma {
        let tok = draft_distribution(params, &draft_ctx)
            .expect("oracle draft")
            .argmax();
        drafted.push(tok);
        draft_ctx.push(tok);
    }
    let mut ctx = prefix.clone();
    let mut out = Vec::new();
    for &tok in &drafted {
        let target = target_distribution(params, &ctx, params.num_exits)
            .expect("oracle verify")
            .argmax();
        if target == tok {
            out.push(tok);
            ctx.push(tok);
        } else {
            out.push(target);
            return out;
        }
    }
    let bonus = target_distribution(params, &ctx, params.num_exits)
        .expect("oracle bonus")
        .argmax();
    out.push(bonus);
    out
}

/// Straight-line, single-threaded rendition of the client loop in greedy
/// mode (pre-drafting changes timing, never tokens, so it is omitted).
/// Returns the emitted stream and the per-round token counts.
pub fn oracle_greedy_session(
    params: &SyntheticParams,
    prefix: &TokenSeq,
    gamma: usize,
    n: usize,
) -> (Vec<u32>, Vec<usize>) {
    let mut ctx = prefix.clone();
    let mut emitted = Vec::new();
    let mut per_round = Vec::new();
    while emitted.len() < n {
        let out = oracle_greedy_round(params, &ctx, gamma);
        per_round.push(out.len());
        for &t in &out {
            ctx.push(t);
            emitted.push(t);
        }
    }
    (emitted, per_round)
}
