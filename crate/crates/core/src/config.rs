//! Experiment configuration: a flat `key=value` file, plus the pricing CSV.

use crate::decode::{DraftMode, PayloadMode, VerifyMode};
use crate::error::{Error, Result};
use crate::model::{SyntheticParams, VocabConfig};
use crate::queue::{ClientQueueStrategy, ServerQueueStrategy};
use crate::sim::{Mode, Scenario, SimLatencies};
use crate::types::TokenSeq;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportKind {
    Sim,
    Tcp,
}

/// How early-exit agreement rates are specified.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaSpec {
    /// Explicit list of `num_exits - 1` values.
    Explicit(Vec<f64>),
    /// `num_exits - 1` evenly spaced values from `lo` to `hi` inclusive.
    Linear { lo: f64, hi: f64 },
}

impl BetaSpec {
    pub fn materialize(&self, num_exits: usize) -> Result<Vec<f64>> {
        let count = num_exits - 1;
        match self {
            BetaSpec::Explicit(values) => {
                if values.len() != count {
                    return Err(Error::config(format!(
                        "beta: expected {count} values for {num_exits} exits, got {}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
            BetaSpec::Linear { lo, hi } => Ok((0..count)
                .map(|i| {
                    if count == 1 {
                        *lo
                    } else {
                        lo + (hi - lo) * i as f64 / (count - 1) as f64
                    }
                })
                .collect()),
        }
    }
}

/// Which model pair an experiment runs on.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Synthetic {
        vocab: u32,
        num_exits: usize,
        alpha: f64,
        beta: BetaSpec,
        sharpness: f64,
    },
    /// Out-of-process adapter command (tcp transport only).
    Adapter {
        command: String,
        num_exits: usize,
        vocab: u32,
    },
}

/// Everything one experiment needs, mirroring the config-file keys.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub transport: TransportKind,
    pub model: ModelSpec,
    pub prefix: TokenSeq,
    pub gamma: usize,
    pub n: usize,
    pub threads: usize,
    pub client_queue: ClientQueueStrategy,
    pub server_queue: ServerQueueStrategy,
    pub draft_mode: DraftMode,
    pub verify_mode: VerifyMode,
    pub payload_mode: PayloadMode,
    pub seeds: Vec<u64>,
    pub latencies: Option<SimLatencies>,
    pub host: Option<String>,
    pub port: Option<u16>,
    pub forced_miss_pattern: Vec<bool>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Fsd,
            transport: TransportKind::Sim,
            model: ModelSpec::Synthetic {
                vocab: 64,
                num_exits: 4,
                alpha: 0.8,
                beta: BetaSpec::Linear { lo: 0.3, hi: 0.9 },
                sharpness: 4.0,
            },
            prefix: TokenSeq::from(vec![3, 1, 4]),
            gamma: 4,
            n: 200,
            threads: 3,
            client_queue: ClientQueueStrategy::Priority,
            server_queue: ServerQueueStrategy::Priority,
            draft_mode: DraftMode::Greedy,
            verify_mode: VerifyMode::Greedy,
            payload_mode: PayloadMode::Compact,
            seeds: vec![42],
            latencies: None,
            host: None,
            port: None,
            forced_miss_pattern: Vec::new(),
        }
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<T>()
                .map_err(|_| Error::config(format!("{key}: cannot parse '{part}'")))
        })
        .collect()
}

fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = value.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("seeds: bad range start '{lo}'")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("seeds: bad range end '{hi}'")))?;
        if hi < lo {
            return Err(Error::config("seeds: range end before start"));
        }
        Ok((lo..=hi).collect())
    } else {
        parse_list(value, "seeds")
    }
}

impl ExperimentConfig {
    /// Parse the flat key=value format. `#` starts a comment; unknown keys
    /// are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut synthetic: HashMap<&str, String> = HashMap::new();
        let mut adapter_cmd: Option<String> = None;
        let mut model_kind = "synthetic".to_string();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key=value", lineno + 1)))?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "mode" => {
                    cfg.mode = match value {
                        "ar" => Mode::Ar,
                        "sd" => Mode::Sd,
                        "fsd" => Mode::Fsd,
                        _ => return Err(Error::config(format!("mode: unknown '{value}'"))),
                    }
                }
                "transport" => {
                    cfg.transport = match value {
                        "sim" => TransportKind::Sim,
                        "tcp" => TransportKind::Tcp,
                        _ => return Err(Error::config(format!("transport: unknown '{value}'"))),
                    }
                }
                "model" => model_kind = value.to_string(),
                "adapter_cmd" => adapter_cmd = Some(value.to_string()),
                "vocab" | "num_exits" | "alpha" | "beta" | "sharpness" => {
                    synthetic.insert(
                        match key {
                            "vocab" => "vocab",
                            "num_exits" => "num_exits",
                            "alpha" => "alpha",
                            "beta" => "beta",
                            _ => "sharpness",
                        },
                        value.to_string(),
                    );
                }
                "prefix" => cfg.prefix = TokenSeq::new(parse_list(value, "prefix")?),
                "gamma" => {
                    cfg.gamma = value
                        .parse()
                        .map_err(|_| Error::config("gamma: not an integer"))?
                }
                "n" => {
                    cfg.n = value
                        .parse()
                        .map_err(|_| Error::config("n: not an integer"))?
                }
                "threads" => {
                    cfg.threads = value
                        .parse()
                        .map_err(|_| Error::config("threads: not an integer"))?
                }
                "client_queue" => {
                    cfg.client_queue = match value {
                        "priority" => ClientQueueStrategy::Priority,
                        "fifo" => ClientQueueStrategy::Fifo,
                        "random" => ClientQueueStrategy::Random,
                        _ => return Err(Error::config(format!("client_queue: unknown '{value}'"))),
                    }
                }
                "server_queue" => {
                    cfg.server_queue = match value {
                        "priority" => ServerQueueStrategy::Priority,
                        "fifo" => ServerQueueStrategy::Fifo,
                        _ => return Err(Error::config(format!("server_queue: unknown '{value}'"))),
                    }
                }
                "draft_mode" => {
                    cfg.draft_mode = match value {
                        "greedy" => DraftMode::Greedy,
                        "sampled" => DraftMode::Sampled,
                        _ => return Err(Error::config(format!("draft_mode: unknown '{value}'"))),
                    }
                }
                "verify_mode" => {
                    cfg.verify_mode = match value {
                        "greedy" => VerifyMode::Greedy,
                        "stochastic" => VerifyMode::Stochastic,
                        _ => return Err(Error::config(format!("verify_mode: unknown '{value}'"))),
                    }
                }
                "payload" => {
                    cfg.payload_mode = match value {
                        "compact" => PayloadMode::Compact,
                        "full" => PayloadMode::Full,
                        _ => return Err(Error::config(format!("payload: unknown '{value}'"))),
                    }
                }
                "seeds" => cfg.seeds = parse_seeds(value)?,
                "t_p" | "t_q" | "t_c" | "t_r" => {
                    let v: f64 = value
                        .parse()
                        .map_err(|_| Error::config(format!("{key}: not a number")))?;
                    let lat = cfg.latencies.get_or_insert(SimLatencies {
                        t_p: f64::NAN,
                        t_q: f64::NAN,
                        t_c: f64::NAN,
                        t_r: 5.0,
                    });
                    match key {
                        "t_p" => lat.t_p = v,
                        "t_q" => lat.t_q = v,
                        "t_c" => lat.t_c = v,
                        _ => lat.t_r = v,
                    }
                }
                "host" => cfg.host = Some(value.to_string()),
                "port" => {
                    cfg.port = Some(
                        value
                            .parse()
                            .map_err(|_| Error::config("port: not a port number"))?,
                    )
                }
                "forced_miss_pattern" => {
                    cfg.forced_miss_pattern = parse_list::<u8>(value, "forced_miss_pattern")?
                        .into_iter()
                        .map(|v| v != 0)
                        .collect();
                }
                _ => return Err(Error::config(format!("unknown key '{key}'"))),
            }
        }

        let get = |map: &HashMap<&str, String>, key: &str, default: &str| -> String {
            map.get(key).cloned().unwrap_or_else(|| default.to_string())
        };
        if model_kind == "synthetic" {
            let vocab: u32 = get(&synthetic, "vocab", "64")
                .parse()
                .map_err(|_| Error::config("vocab: not an integer"))?;
            let num_exits: usize = get(&synthetic, "num_exits", "4")
                .parse()
                .map_err(|_| Error::config("num_exits: not an integer"))?;
            let alpha: f64 = get(&synthetic, "alpha", "0.8")
                .parse()
                .map_err(|_| Error::config("alpha: not a number"))?;
            let sharpness: f64 = get(&synthetic, "sharpness", "4.0")
                .parse()
                .map_err(|_| Error::config("sharpness: not a number"))?;
            let beta_raw = get(&synthetic, "beta", "linear:0.3:0.9");
            let beta = if let Some(rest) = beta_raw.strip_prefix("linear:") {
                let (lo, hi) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::config("beta: linear form is linear:<lo>:<hi>"))?;
                BetaSpec::Linear {
                    lo: lo.parse().map_err(|_| Error::config("beta: bad lo"))?,
                    hi: hi.parse().map_err(|_| Error::config("beta: bad hi"))?,
                }
            } else {
                BetaSpec::Explicit(parse_list(&beta_raw, "beta")?)
            };
            cfg.model = ModelSpec::Synthetic {
                vocab,
                num_exits,
                alpha,
                beta,
                sharpness,
            };
        } else if model_kind == "adapter" {
            let command =
                adapter_cmd.ok_or_else(|| Error::config("adapter model requires adapter_cmd"))?;
            let vocab: u32 = get(&synthetic, "vocab", "64")
                .parse()
                .map_err(|_| Error::config("vocab: not an integer"))?;
            let num_exits: usize = get(&synthetic, "num_exits", "4")
                .parse()
                .map_err(|_| Error::config("num_exits: not an integer"))?;
            cfg.model = ModelSpec::Adapter {
                command,
                num_exits,
                vocab,
            };
        } else {
            return Err(Error::config(format!("model: unknown '{model_kind}'")));
        }

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut missing: Vec<&str> = Vec::new();
        if self.prefix.is_empty() {
            missing.push("prefix (must be non-empty)");
        }
        if self.n == 0 {
            missing.push("n (must be >= 1)");
        }
        if self.mode != Mode::Ar && self.gamma == 0 {
            missing.push("gamma (must be >= 1)");
        }
        if self.seeds.is_empty() {
            missing.push("seeds (at least one)");
        }
        match self.transport {
            TransportKind::Sim => {
                match &self.latencies {
                    None => missing.push("t_p, t_q, t_c (sim transport requires all latencies)"),
                    Some(l) => {
                        if l.t_p.is_nan() {
                            missing.push("t_p");
                        }
                        if l.t_q.is_nan() {
                            missing.push("t_q");
                        }
                        if l.t_c.is_nan() {
                            missing.push("t_c");
                        }
                    }
                }
                if matches!(self.model, ModelSpec::Adapter { .. }) {
                    missing.push("model (sim transport requires the synthetic model)");
                }
            }
            TransportKind::Tcp => {
                if self.host.is_none() {
                    missing.push("host (tcp transport)");
                }
                if self.port.is_none() {
                    missing.push("port (tcp transport)");
                }
                if self.seeds.len() != 1 {
                    missing.push("seeds (tcp transport runs exactly one seed)");
                }
            }
        }
        if self.verify_mode == VerifyMode::Stochastic && self.payload_mode != PayloadMode::Full {
            missing.push("payload (stochastic verification requires payload=full)");
        }
        if !self.forced_miss_pattern.is_empty() && self.mode != Mode::Fsd {
            missing.push("forced_miss_pattern (fsd mode only)");
        }
        if !missing.is_empty() {
            return Err(Error::config(format!(
                "invalid configuration: {}",
                missing.join("; ")
            )));
        }
        Ok(())
    }

    /// Synthetic model parameters for one seed.
    pub fn synthetic_params(&self, seed: u64) -> Result<SyntheticParams> {
        match &self.model {
            ModelSpec::Synthetic {
                vocab,
                num_exits,
                alpha,
                beta,
                sharpness,
            } => {
                let params = SyntheticParams {
                    seed,
                    vocab: VocabConfig { size: *vocab },
                    num_exits: *num_exits,
                    alpha: *alpha,
                    beta: beta.materialize(*num_exits)?,
                    sharpness: *sharpness,
                };
                params.validate()?;
                Ok(params)
            }
            ModelSpec::Adapter { .. } => {
                Err(Error::config("adapter models have no synthetic parameters"))
            }
        }
    }

    /// The simulation scenario for one seed.
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        let latencies = self
            .latencies
            .ok_or_else(|| Error::config("scenario requires latencies"))?;
        let scenario = Scenario {
            mode: self.mode,
            params: self.synthetic_params(seed)?,
            prefix: self.prefix.clone(),
            gamma: self.gamma,
            n: self.n,
            worker_threads: self.threads,
            client_queue: self.client_queue,
            server_queue: self.server_queue,
            draft_mode: self.draft_mode,
            verify_mode: self.verify_mode,
            payload_mode: self.payload_mode,
            latencies,
            forced_miss_pattern: self.forced_miss_pattern.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Parse the pricing CSV: `provider,draft_in,draft_out,target_in,target_out`
/// (dollars per million tokens). A leading header row is skipped.
pub fn parse_pricing_csv(
    text: &str,
    requests: u64,
    in_tokens: u64,
    out_tokens: u64,
    gamma: f64,
    tau: f64,
) -> Result<Vec<crate::analytics::PricingRow>> {
    let mut rows = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if lineno == 0 && fields.first() == Some(&"provider") {
            continue;
        }
        if fields.len() != 5 {
            return Err(Error::config(format!(
                "pricing line {}: expected 5 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse().map_err(|_| {
                Error::config(format!("pricing line {}: bad {what} '{s}'", lineno + 1))
            })
        };
        rows.push(crate::analytics::PricingRow {
            provider: fields[0].to_string(),
            draft_in: num(fields[1], "draft_in")?,
            draft_out: num(fields[2], "draft_out")?,
            target_in: num(fields[3], "target_in")?,
            target_out: num(fields[4], "target_out")?,
            requests,
            in_tokens,
            out_tokens,
            gamma,
            tau,
        });
    }
    if rows.is_empty() {
        return Err(Error::config("pricing file has no data rows"));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "
mode=fsd
transport=sim
vocab=16
num_exits=4
alpha=0.8
beta=0.3,0.6,0.9
sharpness=4.0
gamma=4
n=200
threads=3
seeds=1..3
prefix=3,1,4
t_p=83.5
t_q=497
t_c=95
";

    #[test]
    fn parses_a_complete_config() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.gamma, 4);
        let params = cfg.synthetic_params(7).unwrap();
        assert_eq!(params.beta, vec![0.3, 0.6, 0.9]);
        // t_r defaults to 5 ms when other latencies are given.
        assert_eq!(cfg.latencies.unwrap().t_r, 5.0);
        cfg.scenario(7).unwrap();
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::parse("bogus_key=1\n").unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
    }

    #[test]
    fn sim_requires_latencies() {
        let err = ExperimentConfig::parse("mode=sd\ntransport=sim\n").unwrap_err();
        assert!(err.to_string().contains("t_p"));
    }

    #[test]
    fn tcp_requires_endpoint_and_single_seed() {
        let err = ExperimentConfig::parse("transport=tcp\nseeds=1,2\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("host"));
        assert!(text.contains("port"));
        assert!(text.contains("one seed"));
    }

    #[test]
    fn linear_beta_expands() {
        let spec = BetaSpec::Linear { lo: 0.2, hi: 0.8 };
        assert_eq!(spec.materialize(4).unwrap(), vec![0.2, 0.5, 0.8]);
        assert_eq!(spec.materialize(2).unwrap(), vec![0.2]);
        assert_eq!(spec.materialize(1).unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn pricing_csv_parses_with_header() {
        let text = "provider,draft_in,draft_out,target_in,target_out\n\
                    together,0.1,0.1,0.9,0.9\n";
        let rows = parse_pricing_csv(text, 1_000_000, 100, 500, 4.0, 2.5).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].provider, "together");
        assert!((rows[0].cost_cloud_ar().unwrap() - 540.0).abs() < 1e-9);
    }
}
