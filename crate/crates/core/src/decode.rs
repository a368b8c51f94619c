//! Draft-and-verify mathematics: autoregressive drafting, greedy and
//! stochastic (rejection-sampling) verification, multi-exit verification and
//! residual resampling.

use crate::error::{Error, Result};
use crate::model::{DraftModel, TargetModel};
use crate::prf::{prf, prf_uniform, tag, PrfStream};
use crate::types::{ProbVector, TokenSeq};

/// How draft tokens are chosen from the draft distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DraftMode {
    Greedy,
    Sampled,
}

/// How the target decides acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerifyMode {
    Greedy,
    Stochastic,
}

/// Probability payload attached to a draft batch.
///
/// `Compact` carries only the chosen-token probabilities (sufficient for
/// greedy verification); `Full` carries the whole distribution per position
/// (required for stochastic verification).
#[derive(Debug, Clone, PartialEq)]
pub enum BatchPayload {
    Compact(Vec<f64>),
    Full(Vec<ProbVector>),
}

impl BatchPayload {
    pub fn len(&self) -> usize {
        match self {
            BatchPayload::Compact(v) => v.len(),
            BatchPayload::Full(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One round's drafted tokens plus probability payload.
#[derive(Debug, Clone, PartialEq)]
pub struct DraftBatch {
    pub round_id: u32,
    pub prefix_len: usize,
    pub tokens: TokenSeq,
    pub payload: BatchPayload,
}

impl DraftBatch {
    pub fn gamma(&self) -> usize {
        self.tokens.len()
    }
}

/// Outcome of verifying one draft batch at one exit.
///
/// `output` holds the accepted prefix of the draft plus one token the exit
/// generated itself (the correction at the first rejection, or the bonus
/// token when everything was accepted).
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyResult {
    pub exit_index: usize,
    /// Number of draft tokens accepted.
    pub accepted: usize,
    /// The `accepted + 1` emitted tokens.
    pub output: TokenSeq,
    /// Probability of each emitted token under the exit's distribution at
    /// its position.
    pub per_token_probs: Vec<f64>,
    /// `max(per_token_probs)`; used as the streaming priority.
    pub confidence: f64,
}

/// Draft `gamma` tokens autoregressively from `prefix`.
///
/// Sampled mode draws each token with a PRF uniform keyed on
/// `(draft_seed, current prefix)`, so a redraft from the same prefix always
/// reproduces the same tokens regardless of when or where it runs.
pub fn draft<D: DraftModel + ?Sized>(
    model: &D,
    prefix: &TokenSeq,
    gamma: usize,
    mode: DraftMode,
    payload_mode: PayloadMode,
    draft_seed: u64,
    round_id: u32,
) -> Result<DraftBatch> {
    if prefix.is_empty() {
        return Err(Error::domain("prefix must be non-empty"));
    }
    let mut ctx = prefix.clone();
    let mut tokens = TokenSeq::empty();
    let mut compact = Vec::with_capacity(gamma);
    let mut full = Vec::with_capacity(gamma);
    for _ in 0..gamma {
        let dist = model.draft_distribution(&ctx)?;
        let tok = match mode {
            DraftMode::Greedy => dist.argmax(),
            DraftMode::Sampled => {
                let u = prf_uniform(draft_seed, tag::DRAFT_SAMPLE, ctx.as_slice(), 0);
                dist.sample(u)
            }
        };
        compact.push(dist.prob(tok));
        if payload_mode == PayloadMode::Full {
            full.push(dist.clone());
        }
        tokens.push(tok);
        ctx.push(tok);
    }
    let payload = match payload_mode {
        PayloadMode::Compact => BatchPayload::Compact(compact),
        PayloadMode::Full => BatchPayload::Full(full),
    };
    Ok(DraftBatch {
        round_id,
        prefix_len: prefix.len(),
        tokens,
        payload,
    })
}

/// Which probability content travels with a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadMode {
    Compact,
    Full,
}

/// Greedy verification: scan left to right, accept while the exit's argmax
/// equals the drafted token, then emit the exit's argmax at the stopping
/// position.
pub fn verify_greedy<F>(
    mut exit_dist: F,
    prefix: &TokenSeq,
    batch: &DraftBatch,
) -> Result<VerifyResult>
where
    F: FnMut(&TokenSeq) -> Result<ProbVector>,
{
    let mut ctx = prefix.clone();
    let mut output = TokenSeq::empty();
    let mut probs = Vec::with_capacity(batch.gamma() + 1);
    let mut accepted = 0usize;
    for &tok in batch.tokens.as_slice() {
        let dist = exit_dist(&ctx)?;
        let am = dist.argmax();
        if am == tok {
            accepted += 1;
            output.push(tok);
            probs.push(dist.prob(tok));
            ctx.push(tok);
        } else {
            output.push(am);
            probs.push(dist.prob(am));
            let confidence = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            return Ok(VerifyResult {
                exit_index: 0,
                accepted,
                output,
                per_token_probs: probs,
                confidence,
            });
        }
    }
    // Everything accepted: generate the bonus token.
    let dist = exit_dist(&ctx)?;
    let am = dist.argmax();
    output.push(am);
    probs.push(dist.prob(am));
    let confidence = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(VerifyResult {
        exit_index: 0,
        accepted,
        output,
        per_token_probs: probs,
        confidence,
    })
}

/// Residual distribution `normalize(max(0, q - p))`.
///
/// Undefined when `q == p` exactly (the residual is the zero vector).
pub fn residual_distribution(q: &ProbVector, p: &ProbVector) -> Result<ProbVector> {
    if q.len() != p.len() {
        return Err(Error::domain("distribution lengths differ"));
    }
    let res: Vec<f64> = q
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(&qi, &pi)| (qi - pi).max(0.0))
        .collect();
    let sum: f64 = res.iter().sum();
    if sum <= 0.0 {
        return Err(Error::domain(
            "residual of identical distributions is undefined",
        ));
    }
    Ok(ProbVector::normalized(res).expect("residual weights are non-negative"))
}

/// Stochastic verification with the standard rejection-sampling rule:
/// accept drafted token `x` with probability `min(1, q(x)/p(x))`; on the
/// first rejection sample the replacement from `normalize(max(0, q-p))`;
/// if all tokens are accepted sample the bonus token from `q`.
///
/// Uniform draws come from the PRF stream `(rng_seed, VERIFY_STOCH)` in the
/// order: one per position, then one for the replacement or bonus draw.
pub fn verify_stochastic<F>(
    mut exit_dist: F,
    prefix: &TokenSeq,
    batch: &DraftBatch,
    rng_seed: u64,
) -> Result<VerifyResult>
where
    F: FnMut(&TokenSeq) -> Result<ProbVector>,
{
    let drafted_probs = match &batch.payload {
        BatchPayload::Full(v) => v,
        BatchPayload::Compact(_) => {
            return Err(Error::domain(
                "stochastic verification requires full distributions",
            ))
        }
    };
    if drafted_probs.len() != batch.gamma() {
        return Err(Error::protocol("payload length does not match gamma"));
    }
    let mut draws = PrfStream::new(rng_seed, tag::VERIFY_STOCH);
    let mut ctx = prefix.clone();
    let mut output = TokenSeq::empty();
    let mut probs = Vec::with_capacity(batch.gamma() + 1);
    let mut accepted = 0usize;
    for (k, &tok) in batch.tokens.as_slice().iter().enumerate() {
        let q = exit_dist(&ctx)?;
        let p = &drafted_probs[k];
        let p_tok = p.prob(tok);
        if p_tok <= 0.0 {
            return Err(Error::protocol(format!(
                "drafted token {tok} has zero draft probability"
            )));
        }
        let q_tok = q.prob(tok);
        let accept = (q_tok / p_tok).min(1.0);
        if draws.next_uniform() < accept {
            accepted += 1;
            output.push(tok);
            probs.push(q_tok);
            ctx.push(tok);
        } else {
            let residual = residual_distribution(&q, p)?;
            let replacement = residual.sample(draws.next_uniform());
            output.push(replacement);
            probs.push(q.prob(replacement));
            let confidence = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            return Ok(VerifyResult {
                exit_index: 0,
                accepted,
                output,
                per_token_probs: probs,
                confidence,
            });
        }
    }
    let q = exit_dist(&ctx)?;
    let bonus = q.sample(draws.next_uniform());
    output.push(bonus);
    probs.push(q.prob(bonus));
    let confidence = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(VerifyResult {
        exit_index: 0,
        accepted,
        output,
        per_token_probs: probs,
        confidence,
    })
}

impl DraftBatch {
    /// Wire form of this batch (probabilities narrowed to f32).
    pub fn to_message(&self) -> crate::wire::Message {
        let payload = match &self.payload {
            BatchPayload::Compact(ps) => {
                crate::wire::WirePayload::Compact(ps.iter().map(|&p| p as f32).collect())
            }
            BatchPayload::Full(rows) => crate::wire::WirePayload::Full(
                rows.iter()
                    .map(|r| r.as_slice().iter().map(|&p| p as f32).collect())
                    .collect(),
            ),
        };
        crate::wire::Message::DraftSubmit {
            round_id: self.round_id,
            prefix_len: self.prefix_len as u32,
            tokens: self.tokens.clone(),
            payload,
        }
    }

    /// Rebuild a batch from its wire form. Full-mode rows are renormalized
    /// (f32 transport rounds the sums) and must be valid distributions.
    pub fn from_wire(
        round_id: u32,
        prefix_len: u32,
        tokens: TokenSeq,
        payload: &crate::wire::WirePayload,
    ) -> Result<Self> {
        let payload = match payload {
            crate::wire::WirePayload::Compact(ps) => {
                if ps.len() != tokens.len() {
                    return Err(Error::protocol("payload length does not match gamma"));
                }
                BatchPayload::Compact(ps.iter().map(|&p| f64::from(p)).collect())
            }
            crate::wire::WirePayload::Full(rows) => {
                if rows.len() != tokens.len() {
                    return Err(Error::protocol("payload length does not match gamma"));
                }
                let mut out = Vec::with_capacity(rows.len());
                for row in rows {
                    let weights: Vec<f64> = row.iter().map(|&p| f64::from(p)).collect();
                    let pv = ProbVector::normalized(weights)
                        .map_err(|e| Error::protocol(format!("bad distribution row: {e}")))?;
                    out.push(pv);
                }
                BatchPayload::Full(out)
            }
        };
        Ok(DraftBatch {
            round_id,
            prefix_len: prefix_len as usize,
            tokens,
            payload,
        })
    }
}

/// Verify a batch independently at every exit. Result `i-1` carries exit `i`;
/// the last one is the final, authoritative output.
///
/// In stochastic mode each exit draws from its own sub-seed
/// `prf(rng_seed, EXIT_RNG, [], i)`, so results do not depend on evaluation
/// order.
pub fn verify_all_exits<M: TargetModel + ?Sized>(
    model: &M,
    prefix: &TokenSeq,
    batch: &DraftBatch,
    mode: VerifyMode,
    rng_seed: u64,
) -> Result<Vec<VerifyResult>> {
    let exits = model.num_exits();
    let mut results = Vec::with_capacity(exits);
    for i in 1..=exits {
        let dist = |ctx: &TokenSeq| model.exit_distribution(ctx, i);
        let mut r = match mode {
            VerifyMode::Greedy => verify_greedy(dist, prefix, batch)?,
            VerifyMode::Stochastic => {
                let exit_seed = prf(rng_seed, tag::EXIT_RNG, &[], i as u64);
                verify_stochastic(dist, prefix, batch, exit_seed)?
            }
        };
        r.exit_index = i;
        results.push(r);
    }
    Ok(results)
}
