//! Runs an experiment config and prints the comparison report.
//!
//! `cargo run --release --example run_experiment -- crates/core/examples/configs/quick.toml`

use std::path::PathBuf;

use opd::harness::{compare, output_dir, run_experiment, ExperimentConfig};

fn main() -> opd::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/quick.toml")));
    let cfg = ExperimentConfig::load(&path)?;
    let dir = output_dir(&cfg, Some(&std::env::temp_dir().join("opd-example-run")));
    let run = run_experiment(&cfg, &dir)?;
    print!("{}", compare(&[(cfg.pipeline_name(), run.summary)])?);
    println!("outputs in {}", dir.display());
    Ok(())
}
