//! Command-line harness: run AR/SD/FSD experiments over the simulator or
//! TCP, serve the verification endpoint, compare modes, and evaluate the
//! closed-form latency, speedup and cost models.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use specdec_core::analytics::{heatmap_grid, speedup_projection};
use specdec_core::config::{parse_pricing_csv, ExperimentConfig, TransportKind};
use specdec_core::harness::{compare_modes, run_experiment, serve_tcp};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "specdec",
    version,
    about = "Speculative edge-cloud decoding: experiments, serving, and analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Serve verification sessions on a TCP port.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Listen port (overrides the config file).
        #[arg(long)]
        port: Option<u16>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Exit after one session instead of serving forever.
        #[arg(long)]
        once: bool,
    },
    /// Run the client side of a session against a live server.
    Client {
        #[arg(long)]
        config: PathBuf,
        /// Server host (overrides the config file).
        #[arg(long)]
        host: Option<String>,
        /// Server port (overrides the config file).
        #[arg(long)]
        port: Option<u16>,
        /// Summary CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-round CSV path.
        #[arg(long)]
        per_round: Option<PathBuf>,
    },
    /// Run the experiment described by a config file (sim or tcp).
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Summary CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-round CSV path.
        #[arg(long)]
        per_round: Option<PathBuf>,
        /// Event-trace path (sim transport only).
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run AR, SD and FSD on the same seeds and report speedups.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// Report CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the decoding cost model over a pricing CSV.
    Cost {
        /// CSV: provider,draft_in,draft_out,target_in,target_out ($/1M tokens).
        #[arg(long)]
        pricing_file: PathBuf,
        #[arg(long, default_value_t = 4.0)]
        gamma: f64,
        #[arg(long, default_value_t = 2.5)]
        tau: f64,
        #[arg(long, default_value_t = 1_000_000)]
        requests: u64,
        #[arg(long, default_value_t = 100)]
        in_tokens: u64,
        #[arg(long, default_value_t = 500)]
        out_tokens: u64,
    },
    /// Print the projected SD -> FSD speedup for (gamma, c, r).
    Project {
        #[arg(long)]
        gamma: f64,
        /// Latency ratio T_p / T_q.
        #[arg(long)]
        c: f64,
        /// Cache miss rate.
        #[arg(long)]
        r: f64,
    },
    /// Emit the projected-speedup heatmap as CSV.
    Heatmap {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0)]
        c_min: f64,
        #[arg(long, default_value_t = 1.0)]
        c_max: f64,
        #[arg(long, default_value_t = 0.0)]
        r_min: f64,
        #[arg(long, default_value_t = 1.0)]
        r_max: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        /// CSV path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Render a float with trailing zeros trimmed but at least one decimal.
fn fmt_ratio(v: f64) -> String {
    let mut s = format!("{v:.6}");
    while s.ends_with('0') {
        s.pop();
    }
    if s.ends_with('.') {
        s.push('0');
    }
    s
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Serve {
            config,
            port,
            host,
            once,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(p) = port {
                cfg.port = Some(p);
            }
            let port = cfg
                .port
                .context("serve requires --port or port= in the config")?;
            let listener = std::net::TcpListener::bind((host.as_str(), port))
                .with_context(|| format!("binding {host}:{port}"))?;
            eprintln!("listening on {}", listener.local_addr()?);
            serve_tcp(&cfg, listener, if once { 1 } else { 0 })?;
        }
        Command::Client {
            config,
            host,
            port,
            out,
            per_round,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            cfg.transport = TransportKind::Tcp;
            if let Some(h) = host {
                cfg.host = Some(h);
            }
            if let Some(p) = port {
                cfg.port = Some(p);
            }
            cfg.validate()?;
            let run = run_experiment(&cfg)?;
            emit(&run.summary_csv(), out.as_ref())?;
            if let Some(path) = per_round {
                std::fs::write(&path, run.per_round_csv())?;
            }
        }
        Command::Run {
            config,
            out,
            per_round,
            trace,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            if trace.is_some() && cfg.transport != TransportKind::Sim {
                bail!("--trace requires the sim transport");
            }
            let run = run_experiment(&cfg)?;
            emit(&run.summary_csv(), out.as_ref())?;
            if let Some(path) = per_round {
                std::fs::write(&path, run.per_round_csv())?;
            }
            if let Some(path) = trace {
                let mut text = String::new();
                for r in &run.results {
                    text.push_str(&format!("# seed={}\n", r.seed));
                    if let Some(t) = &r.trace {
                        text.push_str(t);
                    }
                }
                std::fs::write(&path, text)?;
            }
        }
        Command::Compare { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = compare_modes(&cfg)?;
            emit(&report.to_csv(), out.as_ref())?;
            eprintln!(
                "mean speedup ar->sd: {}",
                fmt_ratio(report.mean_speedup_ar_sd)
            );
            eprintln!(
                "mean speedup sd->fsd: {}",
                fmt_ratio(report.mean_speedup_sd_fsd)
            );
        }
        Command::Cost {
            pricing_file,
            gamma,
            tau,
            requests,
            in_tokens,
            out_tokens,
        } => {
            let text = std::fs::read_to_string(&pricing_file)
                .with_context(|| format!("reading {}", pricing_file.display()))?;
            let rows = parse_pricing_csv(&text, requests, in_tokens, out_tokens, gamma, tau)?;
            println!("provider,cloud_ar,cloud_sd,edge_sd");
            for row in rows {
                println!(
                    "{},{:.2},{:.2},{:.2}",
                    row.provider,
                    row.cost_cloud_ar()?,
                    row.cost_cloud_sd()?,
                    row.cost_edge_sd()?
                );
            }
        }
        Command::Project { gamma, c, r } => {
            if !(0.0..=1.0).contains(&r) {
                bail!("r must lie in [0, 1]");
            }
            if c < 0.0 {
                bail!("c must be non-negative");
            }
            println!("{}", fmt_ratio(speedup_projection(gamma, c, r)));
        }
        Command::Heatmap {
            gamma,
            c_min,
            c_max,
            r_min,
            r_max,
            steps,
            out,
        } => {
            let grid = heatmap_grid(gamma, (c_min, c_max), (r_min, r_max), steps)?;
            emit(&grid.to_csv(), out.as_ref())?;
        }
    }
    Ok(())
}
