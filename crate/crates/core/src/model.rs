//! Seeded synthetic draft/target models with configurable agreement rates.
//!
//! The pair emulates the statistical structure a draft/verify protocol sees:
//! the draft model's greedy token equals the target's final-exit greedy token
//! with probability `alpha`, and early exit `i` agrees with the final exit
//! with probability `beta[i-1]`, every decision driven by the frozen PRF so
//! runs are reproducible bit for bit.

use crate::error::{Error, Result};
use crate::prf::{prf, prf_coin, tag};
use crate::types::{ProbVector, TokenSeq};
use serde::{Deserialize, Serialize};

/// Vocabulary descriptor; valid ids are `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabConfig {
    pub size: u32,
}

impl VocabConfig {
    pub fn new(size: u32) -> Result<Self> {
        if size < 2 {
            return Err(Error::domain("vocabulary size must be at least 2"));
        }
        Ok(VocabConfig { size })
    }
}

/// Parameters of the synthetic draft/target model pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub seed: u64,
    pub vocab: VocabConfig,
    /// Number of exits `L`; exit `L` is the final, authoritative one.
    pub num_exits: usize,
    /// Probability that a drafted token equals the final-exit greedy token.
    pub alpha: f64,
    /// `beta[i-1]` = probability exit `i` agrees with the final exit.
    /// Length `L-1`, non-decreasing.
    pub beta: Vec<f64>,
    /// Peakedness of every emitted distribution: the greedy token carries
    /// unnormalized mass `exp(sharpness)`, every other token mass 1.
    pub sharpness: f64,
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.vocab.size < 2 {
            return Err(Error::domain("vocabulary size must be at least 2"));
        }
        if self.num_exits == 0 {
            return Err(Error::domain("num_exits must be positive"));
        }
        if self.beta.len() != self.num_exits - 1 {
            return Err(Error::domain(format!(
                "beta must have {} entries, got {}",
                self.num_exits - 1,
                self.beta.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::domain("alpha must lie in [0, 1]"));
        }
        for (i, &b) in self.beta.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::domain(format!("beta[{}] must lie in [0, 1]", i + 1)));
            }
            if i > 0 && b < self.beta[i - 1] {
                return Err(Error::domain("beta must be non-decreasing"));
            }
        }
        if !self.sharpness.is_finite() || self.sharpness <= 0.0 {
            return Err(Error::domain("sharpness must be positive and finite"));
        }
        Ok(())
    }

    /// Peak probability of every synthetic distribution.
    pub fn peak_prob(&self) -> f64 {
        let e = self.sharpness.exp();
        e / (e + f64::from(self.vocab.size - 1))
    }
}

/// Confidence of a distribution: its largest probability.
pub fn confidence(dist: &ProbVector) -> f64 {
    dist.max()
}

fn peaked_distribution(vocab: u32, argmax: u32, sharpness: f64) -> ProbVector {
    let peak = sharpness.exp();
    let z = peak + f64::from(vocab - 1);
    let probs = (0..vocab)
        .map(|i| if i == argmax { peak / z } else { 1.0 / z })
        .collect();
    ProbVector::new(probs).expect("peaked distribution normalizes by construction")
}

/// Pick a token distinct from `avoid`, uniformly via the PRF.
fn alt_token(seed: u64, alt_tag: u64, prefix: &[u32], extra: u64, vocab: u32, avoid: u32) -> u32 {
    let off = 1 + (prf(seed, alt_tag, prefix, extra) % u64::from(vocab - 1)) as u32;
    (avoid + off) % vocab
}

fn final_argmax(params: &SyntheticParams, prefix: &[u32]) -> u32 {
    (prf(params.seed, tag::FINAL_ARGMAX, prefix, 0) % u64::from(params.vocab.size)) as u32
}

fn exit_argmax(params: &SyntheticParams, prefix: &[u32], exit_index: usize) -> u32 {
    let fin = final_argmax(params, prefix);
    if exit_index == params.num_exits {
        return fin;
    }
    let agrees = prf_coin(
        params.seed,
        tag::EXIT_AGREE,
        prefix,
        exit_index as u64,
        params.beta[exit_index - 1],
    );
    if agrees {
        fin
    } else {
        alt_token(
            params.seed,
            tag::EXIT_ALT,
            prefix,
            exit_index as u64,
            params.vocab.size,
            fin,
        )
    }
}

fn draft_argmax(params: &SyntheticParams, prefix: &[u32]) -> u32 {
    let fin = final_argmax(params, prefix);
    if prf_coin(params.seed, tag::DRAFT_AGREE, prefix, 0, params.alpha) {
        fin
    } else {
        alt_token(
            params.seed,
            tag::DRAFT_ALT,
            prefix,
            0,
            params.vocab.size,
            fin,
        )
    }
}

/// Distribution of target exit `exit_index` (1-based, `L` = final) at the
/// next position after `prefix`.
pub fn target_distribution(
    params: &SyntheticParams,
    prefix: &TokenSeq,
    exit_index: usize,
) -> Result<ProbVector> {
    if prefix.is_empty() {
        return Err(Error::domain("prefix must be non-empty"));
    }
    if exit_index == 0 || exit_index > params.num_exits {
        return Err(Error::domain(format!(
            "exit index {exit_index} out of range 1..={}",
            params.num_exits
        )));
    }
    prefix.check_vocab(params.vocab.size)?;
    let am = exit_argmax(params, prefix.as_slice(), exit_index);
    Ok(peaked_distribution(params.vocab.size, am, params.sharpness))
}

/// Distribution of the draft model at the next position after `prefix`.
pub fn draft_distribution(params: &SyntheticParams, prefix: &TokenSeq) -> Result<ProbVector> {
    if prefix.is_empty() {
        return Err(Error::domain("prefix must be non-empty"));
    }
    prefix.check_vocab(params.vocab.size)?;
    let am = draft_argmax(params, prefix.as_slice());
    Ok(peaked_distribution(params.vocab.size, am, params.sharpness))
}

/// Next-token distribution source on the drafting side.
pub trait DraftModel {
    fn draft_distribution(&self, prefix: &TokenSeq) -> Result<ProbVector>;
}

/// Per-exit next-token distribution source on the verification side.
pub trait TargetModel {
    fn num_exits(&self) -> usize;
    fn exit_distribution(&self, prefix: &TokenSeq, exit_index: usize) -> Result<ProbVector>;
}

/// The synthetic model pair. Pure functions of `(params, prefix)`; freely
/// shareable across threads.
#[derive(Debug, Clone)]
pub struct SyntheticModel {
    params: SyntheticParams,
}

impl SyntheticModel {
    pub fn new(params: SyntheticParams) -> Result<Self> {
        params.validate()?;
        Ok(SyntheticModel { params })
    }

    pub fn params(&self) -> &SyntheticParams {
        &self.params
    }
}

impl DraftModel for SyntheticModel {
    fn draft_distribution(&self, prefix: &TokenSeq) -> Result<ProbVector> {
        draft_distribution(&self.params, prefix)
    }
}

impl TargetModel for SyntheticModel {
    fn num_exits(&self) -> usize {
        self.params.num_exits
    }

    fn exit_distribution(&self, prefix: &TokenSeq, exit_index: usize) -> Result<ProbVector> {
        target_distribution(&self.params, prefix, exit_index)
    }
}
