//! Generates each workload pattern and prints summary statistics.
//! Pass a directory to also write the traces as CSV.

use opd::workload::{generate_trace, Pattern, PatternParams};

fn main() -> opd::Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let params = PatternParams::default();
    for pattern in [
        Pattern::SteadyLow,
        Pattern::Fluctuating,
        Pattern::SteadyHigh,
        Pattern::Constant,
    ] {
        let t = generate_trace(pattern, 1200, 7, &params)?;
        let mean = t.rates.iter().sum::<f64>() / t.len() as f64;
        let min = t.rates.iter().copied().fold(f64::INFINITY, f64::min);
        println!(
            "{pattern:?}: {} s, mean {mean:.1}, min {min:.1}, max {:.1}, peak of first 20 s {:.1}",
            t.len(),
            t.max_rate(),
            t.future_peak(0).unwrap_or(0.0)
        );
        if let Some(dir) = &out {
            std::fs::create_dir_all(dir).map_err(|e| opd::Error::Io { path: dir.clone(), source: e })?;
            t.write_csv(&dir.join(format!("{pattern:?}.csv").to_lowercase()))?;
        }
    }
    Ok(())
}
