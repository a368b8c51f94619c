//! Shared fixtures for the benchmark targets.

use specdec_core::model::{SyntheticParams, VocabConfig};
use specdec_core::sim::{Mode, Scenario, SimLatencies};
use specdec_core::types::TokenSeq;

/// The scenario the benchmarks exercise: mixed hits and misses, all four
/// exits in play.
pub fn bench_scenario(mode: Mode, n: usize) -> Scenario {
    Scenario {
        mode,
        params: SyntheticParams {
            seed: 42,
            vocab: VocabConfig { size: 64 },
            num_exits: 4,
            alpha: 0.8,
            beta: vec![0.3, 0.6, 0.9],
            sharpness: 4.0,
        },
        prefix: TokenSeq::from(vec![3, 1, 4]),
        gamma: 4,
        n,
        worker_threads: 3,
        client_queue: specdec_core::queue::ClientQueueStrategy::Priority,
        server_queue: specdec_core::queue::ServerQueueStrategy::Priority,
        draft_mode: specdec_core::decode::DraftMode::Greedy,
        verify_mode: specdec_core::decode::VerifyMode::Greedy,
        payload_mode: specdec_core::decode::PayloadMode::Compact,
        latencies: SimLatencies {
            t_p: 20.0,
            t_q: 497.0,
            t_c: 95.0,
            t_r: 5.0,
        },
        forced_miss_pattern: Vec::new(),
    }
}
