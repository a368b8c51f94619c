//! Token sequences and probability vectors, the two currencies of the
//! protocol.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// An ordered sequence of token ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<u32>);

impl TokenSeq {
    pub fn new(tokens: Vec<u32>) -> Self {
        TokenSeq(tokens)
    }

    pub fn empty() -> Self {
        TokenSeq(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn push(&mut self, token: u32) {
        self.0.push(token);
    }

    pub fn extend_from(&mut self, other: &TokenSeq) {
        self.0.extend_from_slice(&other.0);
    }

    /// `self` followed by `other`, as a new sequence.
    pub fn concat(&self, other: &TokenSeq) -> TokenSeq {
        let mut out = self.0.clone();
        out.extend_from_slice(&other.0);
        TokenSeq(out)
    }

    /// Check that every id is below the vocabulary size.
    pub fn check_vocab(&self, vocab_size: u32) -> Result<()> {
        match self.0.iter().find(|&&t| t >= vocab_size) {
            Some(t) => Err(Error::domain(format!(
                "token id {t} out of vocabulary (size {vocab_size})"
            ))),
            None => Ok(()),
        }
    }
}

impl From<Vec<u32>> for TokenSeq {
    fn from(v: Vec<u32>) -> Self {
        TokenSeq(v)
    }
}

impl From<&[u32]> for TokenSeq {
    fn from(v: &[u32]) -> Self {
        TokenSeq(v.to_vec())
    }
}

impl std::ops::Index<usize> for TokenSeq {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

/// Sum tolerance for a probability vector.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// A probability distribution over a finite vocabulary.
///
/// Entries are non-negative and sum to 1 within [`PROB_SUM_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validate and wrap a distribution.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("empty probability vector"));
        }
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::domain("probability entries must be finite and >= 0"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(Error::domain(format!(
                "probability vector sums to {sum}, expected 1 within {PROB_SUM_TOLERANCE}"
            )));
        }
        Ok(ProbVector(probs))
    }

    /// Normalize arbitrary non-negative weights into a distribution.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(Error::domain("weights must be finite and >= 0"));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::domain("cannot normalize a zero weight vector"));
        }
        Ok(ProbVector(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Probability of one token id.
    pub fn prob(&self, token: u32) -> f64 {
        self.0.get(token as usize).copied().unwrap_or(0.0)
    }

    /// Index of the largest entry; ties resolve to the lowest index.
    pub fn argmax(&self) -> u32 {
        let mut best = 0usize;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best as u32
    }

    /// Largest entry.
    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Inverse-CDF sample: the first index whose cumulative mass exceeds `u`.
    pub fn sample(&self, u: f64) -> u32 {
        let mut cum = 0.0;
        for (i, &p) in self.0.iter().enumerate() {
            cum += p;
            if u < cum {
                return i as u32;
            }
        }
        (self.0.len() - 1) as u32
    }
}
