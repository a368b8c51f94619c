//! Keyed 64-bit PRF used for every deterministic random decision in the crate.
//!
//! All synthetic-model choices, sampled drafting, stochastic verification and
//! the random queue strategy draw their randomness from one frozen function:
//! a splitmix64 finalizer chained over `(seed, tag, tokens, extra)`. Changing
//! this function invalidates every recorded reference value, so it is fixed.

/// splitmix64 finalizer.
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^= x >> 31;
    x
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Domain-separation tags. Each independent decision stream gets its own tag.
pub mod tag {
    /// Final-exit argmax token for a prefix.
    pub const FINAL_ARGMAX: u64 = 1;
    /// Early-exit agreement coin (extra = exit index).
    pub const EXIT_AGREE: u64 = 2;
    /// Early-exit alternative-token choice on disagreement.
    pub const EXIT_ALT: u64 = 3;
    /// Draft-model agreement coin.
    pub const DRAFT_AGREE: u64 = 4;
    /// Draft-model alternative-token choice on disagreement.
    pub const DRAFT_ALT: u64 = 5;
    /// Sampled-drafting inverse-CDF uniform.
    pub const DRAFT_SAMPLE: u64 = 6;
    /// Random queue-strategy pop choice (extra = pop counter).
    pub const QUEUE_RANDOM: u64 = 7;
    /// Stochastic-verification draw stream (extra = draw counter).
    pub const VERIFY_STOCH: u64 = 8;
    /// Per-exit sub-seed derivation for stochastic verification.
    pub const EXIT_RNG: u64 = 9;
    /// Per-round sub-seed derivation (extra = round id).
    pub const ROUND_RNG: u64 = 10;
}

/// Hash `(seed, tag, tokens, extra)` to a uniform 64-bit value.
///
/// The chain absorbs one mixing round per token, so sequences of different
/// lengths never collide by construction of the chain shape.
pub fn prf(seed: u64, tag: u64, tokens: &[u32], extra: u64) -> u64 {
    let mut h = mix64(seed ^ GOLDEN);
    h = mix64(h ^ tag);
    for &t in tokens {
        h = mix64(h ^ u64::from(t));
    }
    mix64(h ^ extra)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
pub fn prf_uniform(seed: u64, tag: u64, tokens: &[u32], extra: u64) -> f64 {
    (prf(seed, tag, tokens, extra) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli coin: true with probability `p`.
pub fn prf_coin(seed: u64, tag: u64, tokens: &[u32], extra: u64, p: f64) -> bool {
    prf_uniform(seed, tag, tokens, extra) < p
}

/// A counted uniform stream keyed on `(seed, tag)`; draw `k` is independent
/// of draw `j != k`.
#[derive(Debug, Clone)]
pub struct PrfStream {
    seed: u64,
    tag: u64,
    counter: u64,
}

impl PrfStream {
    pub fn new(seed: u64, tag: u64) -> Self {
        Self {
            seed,
            tag,
            counter: 0,
        }
    }

    pub fn next_uniform(&mut self) -> f64 {
        let u = prf_uniform(self.seed, self.tag, &[], self.counter);
        self.counter += 1;
        u
    }
}
