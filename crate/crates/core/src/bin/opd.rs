use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use opd::harness::{
    output_dir, run_experiment, summarize, train_experiment, ExperimentConfig,
};
use opd::workload::{generate_trace, Pattern, PatternParams};

#[derive(Parser)]
#[command(name = "opd", version, about = "Inference pipeline configuration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured algorithm over one trace and write CSVs and a summary.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Train the predictor and the agent and write their checkpoints.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Compare finished runs.
    Summarize {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a synthetic rate trace as a one-column CSV.
    GenTrace {
        #[arg(long, default_value = "fluctuating")]
        pattern: Pattern,
        #[arg(long, default_value_t = 1200)]
        duration: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        low: Option<f64>,
        #[arg(long)]
        high: Option<f64>,
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        period: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let dir = output_dir(&cfg, out.as_deref());
            let run = run_experiment(&cfg, &dir)
                .with_context(|| format!("running {}", config.display()))?;
            for a in &run.summary.algorithms {
                println!(
                    "{:<8} qos {:>8.4}  cost {:>7.3}  objective {:>8.4}  H {:>10.3} ms",
                    a.algorithm, a.mean_qos, a.mean_cost, a.mean_objective, a.total_decision_ms
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Train { config, seed, out } => {
            let cfg = load_config(&config, seed)?;
            let dir = output_dir(&cfg, out.as_deref());
            let t = train_experiment(&cfg, &dir)
                .with_context(|| format!("training {}", config.display()))?;
            if let (Some(first), Some(last)) = (t.curve.first(), t.curve.last()) {
                println!(
                    "{} episodes in {:.1} s, reward {:.4} -> {:.4}",
                    t.curve.len(),
                    t.elapsed.as_secs_f64(),
                    first.mean_reward,
                    last.mean_reward
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Summarize { runs, json } => {
            let report = summarize(&runs)?;
            print!("{report}");
            if let Some(p) = json {
                let text = serde_json::to_string_pretty(&report)?;
                std::fs::write(&p, text + "\n").with_context(|| format!("writing {}", p.display()))?;
            }
        }
        Command::GenTrace {
            pattern,
            duration,
            seed,
            low,
            high,
            level,
            period,
            noise,
            out,
        } => {
            let d = PatternParams::default();
            let params = PatternParams {
                low: low.unwrap_or(d.low),
                high: high.unwrap_or(d.high),
                level: level.unwrap_or(d.level),
                period_s: period.unwrap_or(d.period_s),
                noise: noise.unwrap_or(d.noise),
                ..d
            };
            let trace = generate_trace(pattern, duration, seed, &params)?;
            trace.write_csv(&out)?;
            println!("wrote {} rates to {}", trace.len(), out.display());
        }
    }
    Ok(())
}
