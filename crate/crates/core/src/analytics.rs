//! Closed-form latency, speedup and cost models, plus run-metric
//! finalization and the CSV schemas shared by the harness.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// The full notation set of the latency analysis.
///
/// `t_p`/`t_q` are per-forward-pass times of the draft and target models,
/// `t_c` the per-message communication latency, `t_r` the synchronization
/// cost paid on a cache hit, `gamma` draft tokens per round, `n` total
/// tokens, `tau` effective tokens per round, `miss_rate` the cache miss
/// rate and `c = t_p / t_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyParams {
    pub t_p: f64,
    pub t_q: f64,
    pub t_c: f64,
    pub t_r: f64,
    pub gamma: u32,
    pub n: u32,
    pub tau: f64,
    pub miss_rate: f64,
}

impl LatencyParams {
    pub fn validate(&self) -> Result<()> {
        if self.t_p < 0.0 || self.t_q < 0.0 || self.t_c < 0.0 || self.t_r < 0.0 {
            return Err(Error::domain("latencies must be non-negative"));
        }
        if self.tau < 1.0 {
            return Err(Error::domain("tau must be at least 1"));
        }
        if self.tau > f64::from(self.gamma) + 1.0 {
            return Err(Error::domain("tau cannot exceed gamma + 1"));
        }
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(Error::domain("miss rate must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Latency ratio `c = t_p / t_q`.
    pub fn ratio(&self) -> f64 {
        self.t_p / self.t_q
    }
}

/// Cloud autoregressive decoding: `2 T_c + n T_q`.
pub fn latency_ar(p: &LatencyParams) -> f64 {
    2.0 * p.t_c + f64::from(p.n) * p.t_q
}

/// Edge-cloud speculative decoding: `(n/tau)(2 T_c + gamma T_p + T_q)`.
pub fn latency_sd(p: &LatencyParams) -> Result<f64> {
    if p.tau <= 0.0 {
        return Err(Error::domain("tau must be positive"));
    }
    let per_round = 2.0 * p.t_c + f64::from(p.gamma) * p.t_p + p.t_q;
    Ok(f64::from(p.n) / p.tau * per_round)
}

/// Fast edge-cloud speculative decoding:
/// `(n/tau)(2 T_c + r gamma T_p + (1-r) T_r + T_q)`.
pub fn latency_fsd(p: &LatencyParams) -> Result<f64> {
    if p.tau <= 0.0 {
        return Err(Error::domain("tau must be positive"));
    }
    let r = p.miss_rate;
    let per_round = 2.0 * p.t_c + r * f64::from(p.gamma) * p.t_p + (1.0 - r) * p.t_r + p.t_q;
    Ok(f64::from(p.n) / p.tau * per_round)
}

/// Projected per-round speedup of FSD over SD with negligible communication
/// and synchronization cost: `(gamma c + 1) / (r gamma c + 1)`.
pub fn speedup_projection(gamma: f64, c: f64, r: f64) -> f64 {
    (gamma * c + 1.0) / (r * (gamma * c) + 1.0)
}

/// Row-major grid of projected speedups over `c` (rows) and `r` (columns).
#[derive(Debug, Clone)]
pub struct HeatmapGrid {
    pub gamma: f64,
    pub c_values: Vec<f64>,
    pub r_values: Vec<f64>,
    /// `values[i * r_values.len() + j]` = speedup at `(c_values[i], r_values[j])`.
    pub values: Vec<f64>,
}

/// Evaluate the projection on an inclusive `steps x steps` grid.
pub fn heatmap_grid(
    gamma: f64,
    c_range: (f64, f64),
    r_range: (f64, f64),
    steps: usize,
) -> Result<HeatmapGrid> {
    if steps == 0 {
        return Err(Error::domain("steps must be positive"));
    }
    let axis = |(lo, hi): (f64, f64)| -> Vec<f64> {
        if steps == 1 {
            vec![lo]
        } else {
            (0..steps)
                .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
                .collect()
        }
    };
    let c_values = axis(c_range);
    let r_values = axis(r_range);
    let mut values = Vec::with_capacity(steps * steps);
    for &c in &c_values {
        for &r in &r_values {
            values.push(speedup_projection(gamma, c, r));
        }
    }
    Ok(HeatmapGrid {
        gamma,
        c_values,
        r_values,
        values,
    })
}

impl HeatmapGrid {
    /// CSV with a gamma header comment: `c,r,speedup` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# gamma={}\n", self.gamma));
        out.push_str("c,r,speedup\n");
        for (i, &c) in self.c_values.iter().enumerate() {
            for (j, &r) in self.r_values.iter().enumerate() {
                let v = self.values[i * self.r_values.len() + j];
                out.push_str(&format!("{c:.6},{r:.6},{v:.6}\n"));
            }
        }
        out
    }
}

/// One provider's token prices (dollars per million tokens) and the request
/// shape the costs are evaluated over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingRow {
    pub provider: String,
    pub draft_in: f64,
    pub draft_out: f64,
    pub target_in: f64,
    pub target_out: f64,
    pub requests: u64,
    pub in_tokens: u64,
    pub out_tokens: u64,
    pub gamma: f64,
    pub tau: f64,
}

impl PricingRow {
    pub fn validate(&self) -> Result<()> {
        if [
            self.draft_in,
            self.draft_out,
            self.target_in,
            self.target_out,
        ]
        .iter()
        .any(|&p| p < 0.0)
        {
            return Err(Error::domain("prices must be non-negative"));
        }
        if self.tau <= 0.0 {
            return Err(Error::domain("tau must be positive"));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        self.requests as f64 / 1_000_000.0
    }

    /// Cloud autoregressive: every output token is a target forward pass.
    pub fn cost_cloud_ar(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.scale()
            * (self.in_tokens as f64 * self.target_in + self.out_tokens as f64 * self.target_out))
    }

    /// Edge-cloud speculative decoding: drafting is free (on-device), target
    /// forward passes shrink by a factor of tau.
    pub fn cost_edge_sd(&self) -> Result<f64> {
        self.validate()?;
        Ok(self.scale()
            * (self.in_tokens as f64 * self.target_in
                + self.out_tokens as f64 / self.tau * self.target_out))
    }

    /// Cloud speculative decoding: the edge-cloud target cost plus the
    /// drafting bill — the prompt billed once as draft input and
    /// `gamma * out / tau` drafted tokens as draft output.
    pub fn cost_cloud_sd(&self) -> Result<f64> {
        let edge = self.cost_edge_sd()?;
        let draft = self.scale()
            * (self.in_tokens as f64 * self.draft_in
                + self.gamma * self.out_tokens as f64 / self.tau * self.draft_out);
        Ok(edge + draft)
    }
}

/// Counters accumulated over one generation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub rounds: u64,
    pub tokens_emitted: u64,
    /// Fresh drafting forward passes by the coordinator (cache hits skip
    /// these entirely).
    pub draft_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    /// Sum over matched rounds of the smallest exit index whose output
    /// equals the final output.
    pub sum_earliest_matching_exit: u64,
    /// Rounds with at least one matching early exit.
    pub matched_rounds: u64,
    /// Pre-draft jobs started by workers.
    pub predraft_jobs: u64,
    /// Early-exit messages dropped for carrying an old round id.
    pub stale_drops: u64,
}

/// Finalized statistics: `(tau, miss_rate, avg_ee)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalMetrics {
    pub tau: f64,
    pub miss_rate: f64,
    /// Average earliest matching exit over rounds with any match; NaN when
    /// no round matched.
    pub avg_ee: f64,
}

/// `tau = tokens/rounds`, `miss_rate = misses/rounds`, `avg_ee = matching-exit
/// sum / rounds with any match`.
pub fn metrics_finalize(m: &RunMetrics) -> Result<FinalMetrics> {
    if m.rounds == 0 {
        return Err(Error::domain("metrics require at least one round"));
    }
    debug_assert_eq!(m.cache_hits + m.cache_misses, m.rounds);
    let tau = m.tokens_emitted as f64 / m.rounds as f64;
    let miss_rate = m.cache_misses as f64 / m.rounds as f64;
    let avg_ee = if m.matched_rounds == 0 {
        f64::NAN
    } else {
        m.sum_earliest_matching_exit as f64 / m.matched_rounds as f64
    };
    Ok(FinalMetrics {
        tau,
        miss_rate,
        avg_ee,
    })
}

/// Expected tokens per round of greedy decoding when each drafted position
/// independently agrees with the target with probability `alpha`:
/// `1 + sum_{k=1..gamma} alpha^k`.
pub fn expected_tau_greedy(alpha: f64, gamma: u32) -> f64 {
    let mut sum = 1.0;
    let mut pow = 1.0;
    for _ in 0..gamma {
        pow *= alpha;
        sum += pow;
    }
    sum
}

/// One row of the per-round CSV: `round,delta,tau_inst,hit,earliest_exit,draft_calls`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub delta: u32,
    pub tau_inst: u32,
    pub hit: bool,
    /// Smallest received exit index whose output equals the final output;
    /// 0 when none matched.
    pub earliest_exit: u16,
    pub draft_calls: u32,
}

pub const ROUND_CSV_HEADER: &str = "round,delta,tau_inst,hit,earliest_exit,draft_calls";

pub fn round_csv_line(r: &RoundRecord) -> String {
    format!(
        "{},{},{},{},{},{}",
        r.round,
        r.delta,
        r.tau_inst,
        u8::from(r.hit),
        r.earliest_exit,
        r.draft_calls
    )
}

/// One row of the summary CSV:
/// `mode,n,gamma,threads,client_q,server_q,seed,tau,miss_rate,avg_ee,wall_ms`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub mode: String,
    pub n: u32,
    pub gamma: u32,
    pub threads: u32,
    pub client_q: String,
    pub server_q: String,
    pub seed: u64,
    pub tau: f64,
    pub miss_rate: f64,
    pub avg_ee: f64,
    pub wall_ms: f64,
}

pub const SUMMARY_CSV_HEADER: &str =
    "mode,n,gamma,threads,client_q,server_q,seed,tau,miss_rate,avg_ee,wall_ms";

pub fn summary_csv_line(s: &SummaryRow) -> String {
    let avg_ee = if s.avg_ee.is_nan() {
        "nan".to_string()
    } else {
        format!("{:.4}", s.avg_ee)
    };
    format!(
        "{},{},{},{},{},{},{},{:.4},{:.4},{},{:.3}",
        s.mode,
        s.n,
        s.gamma,
        s.threads,
        s.client_q,
        s.server_q,
        s.seed,
        s.tau,
        s.miss_rate,
        avg_ee,
        s.wall_ms
    )
}
