//! Experiment orchestration: run seeds through the simulator or a live
//! TCP session, compare decoding modes, and produce the CSV outputs.

use crate::analytics::{
    latency_ar, latency_fsd, latency_sd, metrics_finalize, speedup_projection, LatencyParams,
    RoundRecord, SummaryRow,
};
use crate::client::{client_generate, ClientConfig, ClientRunOutput};
use crate::config::{ExperimentConfig, ModelSpec, TransportKind};
use crate::error::{Error, Result};
use crate::model::SyntheticModel;
use crate::server::{serve_session, ServerConfig};
use crate::sim::{sim_run, Mode};
use crate::transport::tcp::TcpSession;
use crate::types::TokenSeq;

/// One seed's outcome.
#[derive(Debug, Clone)]
pub struct SeedResult {
    pub seed: u64,
    pub tokens: TokenSeq,
    pub summary: SummaryRow,
    pub rounds: Vec<RoundRecord>,
    /// Event trace; simulation runs only.
    pub trace: Option<String>,
}

/// A full experiment: one result per seed, in seed order.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub results: Vec<SeedResult>,
}

impl RunOutput {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(crate::analytics::SUMMARY_CSV_HEADER);
        out.push('\n');
        for r in &self.results {
            out.push_str(&crate::analytics::summary_csv_line(&r.summary));
            out.push('\n');
        }
        out
    }

    pub fn per_round_csv(&self) -> String {
        let mut out = String::from("seed,");
        out.push_str(crate::analytics::ROUND_CSV_HEADER);
        out.push('\n');
        for r in &self.results {
            for record in &r.rounds {
                out.push_str(&format!(
                    "{},{}\n",
                    r.seed,
                    crate::analytics::round_csv_line(record)
                ));
            }
        }
        out
    }
}

fn queue_names(config: &ExperimentConfig) -> (String, String) {
    let client = match config.client_queue {
        crate::queue::ClientQueueStrategy::Priority => "priority",
        crate::queue::ClientQueueStrategy::Fifo => "fifo",
        crate::queue::ClientQueueStrategy::Random => "random",
    };
    let server = match config.server_queue {
        crate::queue::ServerQueueStrategy::Priority => "priority",
        crate::queue::ServerQueueStrategy::Fifo => "fifo",
    };
    (client.to_string(), server.to_string())
}

fn make_summary(
    config: &ExperimentConfig,
    seed: u64,
    metrics: &crate::analytics::RunMetrics,
    wall_ms: f64,
) -> Result<SummaryRow> {
    let f = metrics_finalize(metrics)?;
    let (client_q, server_q) = queue_names(config);
    Ok(SummaryRow {
        mode: config.mode.as_str().to_string(),
        n: config.n as u32,
        gamma: config.gamma as u32,
        threads: config.threads as u32,
        client_q,
        server_q,
        seed,
        tau: f.tau,
        miss_rate: f.miss_rate,
        avg_ee: f.avg_ee,
        wall_ms,
    })
}

/// Run the experiment over every seed. Sim transport executes in-process;
/// tcp transport connects to the configured server.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput> {
    config.validate()?;
    let mut results = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let result = match config.transport {
            TransportKind::Sim => {
                let scenario = config.scenario(seed)?;
                let report = sim_run(&scenario)?;
                SeedResult {
                    seed,
                    summary: make_summary(config, seed, &report.metrics, report.wall_ms)?,
                    tokens: report.tokens,
                    rounds: report.rounds,
                    trace: Some(report.trace),
                }
            }
            TransportKind::Tcp => {
                let run = run_tcp_client(config, seed)?;
                SeedResult {
                    seed,
                    summary: make_summary(config, seed, &run.metrics, run.wall_ms)?,
                    tokens: run.tokens,
                    rounds: run.rounds,
                    trace: None,
                }
            }
        };
        results.push(result);
    }
    Ok(RunOutput { results })
}

fn client_config(config: &ExperimentConfig, seed: u64) -> Result<ClientConfig> {
    let (vocab, num_exits) = match &config.model {
        ModelSpec::Synthetic {
            vocab, num_exits, ..
        } => (*vocab, *num_exits),
        ModelSpec::Adapter {
            vocab, num_exits, ..
        } => (*vocab, *num_exits),
    };
    Ok(ClientConfig {
        mode: config.mode,
        gamma: config.gamma,
        total_tokens: config.n,
        worker_threads: config.threads,
        queue_strategy: config.client_queue,
        draft_mode: config.draft_mode,
        payload_mode: config.payload_mode,
        session_seed: seed,
        vocab,
        num_exits,
    })
}

/// Connect and drive one client session over TCP.
pub fn run_tcp_client(config: &ExperimentConfig, seed: u64) -> Result<ClientRunOutput> {
    let host = config
        .host
        .as_deref()
        .ok_or_else(|| Error::config("tcp transport requires host"))?;
    let port = config
        .port
        .ok_or_else(|| Error::config("tcp transport requires port"))?;
    let session = TcpSession::connect((host, port))?;
    let ccfg = client_config(config, seed)?;
    match &config.model {
        ModelSpec::Synthetic { .. } => {
            let model = SyntheticModel::new(config.synthetic_params(seed)?)?;
            client_generate(&ccfg, &model, &session, &config.prefix)
        }
        ModelSpec::Adapter {
            command, num_exits, ..
        } => {
            let model = crate::adapter::StdioModel::spawn(command, *num_exits)?;
            client_generate(&ccfg, &model, &session, &config.prefix)
        }
    }
}

/// Serve sessions on `listener` until `max_sessions` completed (0 = forever).
pub fn serve_tcp(
    config: &ExperimentConfig,
    listener: std::net::TcpListener,
    max_sessions: usize,
) -> Result<()> {
    let (vocab, num_exits) = match &config.model {
        ModelSpec::Synthetic {
            vocab, num_exits, ..
        } => (*vocab, *num_exits),
        ModelSpec::Adapter {
            vocab, num_exits, ..
        } => (*vocab, *num_exits),
    };
    let _ = num_exits;
    let mut served = 0usize;
    loop {
        let (stream, _) = listener.accept()?;
        let session = TcpSession::new(stream)?;
        let seed = config.seeds[0];
        let scfg = ServerConfig {
            mode: config.mode,
            gamma: config.gamma,
            total_tokens: config.n,
            queue_strategy: config.server_queue,
            verify_mode: config.verify_mode,
            model_seed: seed,
            vocab,
        };
        match &config.model {
            ModelSpec::Synthetic { .. } => {
                let model = SyntheticModel::new(config.synthetic_params(seed)?)?;
                serve_session(&scfg, &model, &session, &config.prefix)?;
            }
            ModelSpec::Adapter {
                command, num_exits, ..
            } => {
                let model = crate::adapter::StdioModel::spawn(command, *num_exits)?;
                serve_session(&scfg, &model, &session, &config.prefix)?;
            }
        }
        served += 1;
        if max_sessions > 0 && served >= max_sessions {
            return Ok(());
        }
    }
}

/// One seed's measured and predicted latencies across the three modes.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub seed: u64,
    pub ar_ms: f64,
    pub sd_ms: f64,
    pub fsd_ms: f64,
    pub speedup_ar_sd: f64,
    pub speedup_sd_fsd: f64,
    pub tau: f64,
    pub miss_rate: f64,
    pub pred_ar_ms: f64,
    pub pred_sd_ms: f64,
    pub pred_fsd_ms: f64,
    pub pred_speedup_sd_fsd: f64,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
    pub mean_speedup_ar_sd: f64,
    pub mean_speedup_sd_fsd: f64,
}

pub const COMPARE_CSV_HEADER: &str = "seed,ar_ms,sd_ms,fsd_ms,speedup_ar_sd,speedup_sd_fsd,\
tau,miss_rate,pred_ar_ms,pred_sd_ms,pred_fsd_ms,pred_speedup_sd_fsd";

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARE_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.3},{:.3},{:.3},{:.4},{:.4},{:.4},{:.4},{:.3},{:.3},{:.3},{:.4}\n",
                r.seed,
                r.ar_ms,
                r.sd_ms,
                r.fsd_ms,
                r.speedup_ar_sd,
                r.speedup_sd_fsd,
                r.tau,
                r.miss_rate,
                r.pred_ar_ms,
                r.pred_sd_ms,
                r.pred_fsd_ms,
                r.pred_speedup_sd_fsd
            ));
        }
        out
    }
}

/// Run AR, SD and FSD on the same seeds (sim transport), enforce greedy
/// token-stream equality, and report measured versus closed-form latencies.
pub fn compare_modes(config: &ExperimentConfig) -> Result<CompareReport> {
    if config.transport != TransportKind::Sim {
        return Err(Error::config("compare runs on the sim transport"));
    }
    let latencies = config
        .latencies
        .ok_or_else(|| Error::config("compare requires latencies"))?;
    let greedy = config.draft_mode == crate::decode::DraftMode::Greedy
        && config.verify_mode == crate::decode::VerifyMode::Greedy;
    let mut rows = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut cfg = config.clone();
        cfg.mode = Mode::Ar;
        let ar = sim_run(&cfg.scenario(seed)?)?;
        cfg.mode = Mode::Sd;
        let sd = sim_run(&cfg.scenario(seed)?)?;
        cfg.mode = Mode::Fsd;
        let fsd = sim_run(&cfg.scenario(seed)?)?;

        if greedy {
            let n = config.n;
            let ar_t = &ar.tokens.as_slice()[..n];
            if ar_t != &sd.tokens.as_slice()[..n] || ar_t != &fsd.tokens.as_slice()[..n] {
                return Err(Error::protocol(format!(
                    "seed {seed}: token streams diverge across modes in greedy decoding"
                )));
            }
        }

        let f = metrics_finalize(&fsd.metrics)?;
        let params = LatencyParams {
            t_p: latencies.t_p,
            t_q: latencies.t_q,
            t_c: latencies.t_c,
            t_r: latencies.t_r,
            gamma: config.gamma as u32,
            n: config.n as u32,
            tau: f.tau,
            miss_rate: f.miss_rate,
        };
        let c = params.ratio();
        rows.push(CompareRow {
            seed,
            ar_ms: ar.wall_ms,
            sd_ms: sd.wall_ms,
            fsd_ms: fsd.wall_ms,
            speedup_ar_sd: ar.wall_ms / sd.wall_ms,
            speedup_sd_fsd: sd.wall_ms / fsd.wall_ms,
            tau: f.tau,
            miss_rate: f.miss_rate,
            pred_ar_ms: latency_ar(&params),
            pred_sd_ms: latency_sd(&params)?,
            pred_fsd_ms: latency_fsd(&params)?,
            pred_speedup_sd_fsd: speedup_projection(config.gamma as f64, c, f.miss_rate),
        });
    }
    let mean =
        |f: fn(&CompareRow) -> f64| -> f64 { rows.iter().map(f).sum::<f64>() / rows.len() as f64 };
    Ok(CompareReport {
        mean_speedup_ar_sd: mean(|r| r.speedup_ar_sd),
        mean_speedup_sd_fsd: mean(|r| r.speedup_sd_fsd),
        rows,
    })
}
