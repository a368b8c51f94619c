//! Backend traits the runtimes drive: batch-level drafting and verification.
//!
//! Distribution-level models ([`DraftModel`]/[`TargetModel`]) get these for
//! free; out-of-process adapters implement them directly.

use crate::decode::{
    draft, verify_all_exits, verify_greedy, DraftBatch, DraftMode, PayloadMode, VerifyMode,
    VerifyResult,
};
use crate::error::Result;
use crate::model::{DraftModel, TargetModel};
use crate::types::TokenSeq;

/// Produces draft batches for the client runtime.
pub trait Drafter {
    fn draft_batch(
        &self,
        prefix: &TokenSeq,
        gamma: usize,
        mode: DraftMode,
        payload_mode: PayloadMode,
        session_seed: u64,
        round_id: u32,
    ) -> Result<DraftBatch>;
}

impl<D: DraftModel + ?Sized> Drafter for D {
    fn draft_batch(
        &self,
        prefix: &TokenSeq,
        gamma: usize,
        mode: DraftMode,
        payload_mode: PayloadMode,
        session_seed: u64,
        round_id: u32,
    ) -> Result<DraftBatch> {
        draft(
            self,
            prefix,
            gamma,
            mode,
            payload_mode,
            session_seed,
            round_id,
        )
    }
}

/// Verifies draft batches at every exit for the server runtime.
pub trait Verifier {
    fn exit_count(&self) -> usize;

    fn verify_batch(
        &self,
        prefix: &TokenSeq,
        batch: &DraftBatch,
        mode: VerifyMode,
        rng_seed: u64,
    ) -> Result<Vec<VerifyResult>>;

    /// Greedy autoregressive generation at the final exit: `n` tokens plus
    /// the best per-token probability seen. Drives the AR baseline.
    fn generate_final(&self, prefix: &TokenSeq, n: usize) -> Result<(TokenSeq, f64)> {
        let mut ctx = prefix.clone();
        let mut out = TokenSeq::empty();
        let mut best = f64::NEG_INFINITY;
        for _ in 0..n {
            let empty = DraftBatch {
                round_id: 0,
                prefix_len: ctx.len(),
                tokens: TokenSeq::empty(),
                payload: crate::decode::BatchPayload::Compact(Vec::new()),
            };
            let results = self.verify_batch(&ctx, &empty, VerifyMode::Greedy, 0)?;
            let fin = results
                .last()
                .ok_or_else(|| crate::error::Error::protocol("no final exit result"))?;
            let tok = fin.output[0];
            best = best.max(fin.per_token_probs[0]);
            out.push(tok);
            ctx.push(tok);
        }
        Ok((out, best))
    }
}

impl<M: TargetModel + ?Sized> Verifier for M {
    fn exit_count(&self) -> usize {
        self.num_exits()
    }

    fn verify_batch(
        &self,
        prefix: &TokenSeq,
        batch: &DraftBatch,
        mode: VerifyMode,
        rng_seed: u64,
    ) -> Result<Vec<VerifyResult>> {
        verify_all_exits(self, prefix, batch, mode, rng_seed)
    }

    fn generate_final(&self, prefix: &TokenSeq, n: usize) -> Result<(TokenSeq, f64)> {
        // Direct distribution access: one forward pass per token.
        let exits = self.num_exits();
        let mut ctx = prefix.clone();
        let mut out = TokenSeq::empty();
        let mut best = f64::NEG_INFINITY;
        let empty = DraftBatch {
            round_id: 0,
            prefix_len: 0,
            tokens: TokenSeq::empty(),
            payload: crate::decode::BatchPayload::Compact(Vec::new()),
        };
        for _ in 0..n {
            let r = verify_greedy(|c| self.exit_distribution(c, exits), &ctx, &empty)?;
            let tok = r.output[0];
            best = best.max(r.per_token_probs[0]);
            out.push(tok);
            ctx.push(tok);
        }
        Ok((out, best))
    }
}
