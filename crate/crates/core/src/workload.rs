//! Synthetic arrival-rate traces, history windows and SMAPE.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds of history the predictor sees.
pub const HISTORY_LEN: usize = 120;
/// Seconds ahead over which the peak is predicted.
pub const HORIZON: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    SteadyLow,
    Fluctuating,
    SteadyHigh,
    Constant,
    FromFile,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "steady_low" | "low" => Ok(Pattern::SteadyLow),
            "fluctuating" => Ok(Pattern::Fluctuating),
            "steady_high" | "high" => Ok(Pattern::SteadyHigh),
            "constant" => Ok(Pattern::Constant),
            "from_file" | "file" => Ok(Pattern::FromFile),
            other => Err(Error::invalid(format!("unknown workload pattern '{other}'"))),
        }
    }
}

/// Generator parameters. Noise is multiplicative and uniform in
/// `[-noise, +noise]`, so every sample stays within `noise` of its mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatternParams {
    pub low: f64,
    pub high: f64,
    pub level: f64,
    pub period_s: f64,
    pub noise: f64,
    /// Blend between a raised cosine (0) and a square wave (1).
    pub step_mix: f64,
    /// Phase offset in seconds for the fluctuating pattern.
    pub phase_s: f64,
}

impl Default for PatternParams {
    fn default() -> Self {
        Self {
            low: 20.0,
            high: 100.0,
            level: 20.0,
            period_s: 300.0,
            noise: 0.05,
            step_mix: 0.5,
            phase_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadTrace {
    /// Requests per second, one entry per second.
    pub rates: Vec<f64>,
    pub seed: u64,
    pub pattern: Pattern,
}

impl WorkloadTrace {
    pub fn from_rates(rates: Vec<f64>, pattern: Pattern) -> Result<Self> {
        if rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::invalid("trace rates must be finite and non-negative"));
        }
        Ok(Self {
            rates,
            seed: 0,
            pattern,
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    /// Mean rate over `[start, start + len)`, truncated at the trace end.
    pub fn interval_mean(&self, start: usize, len: usize) -> Result<f64> {
        let end = (start + len).min(self.rates.len());
        if start >= end {
            return Err(Error::invalid(format!("interval at {start} is past the trace end")));
        }
        Ok(self.rates[start..end].iter().sum::<f64>() / (end - start) as f64)
    }

    /// Peak rate over the `HORIZON` seconds after `t`, or `None` near the end.
    pub fn future_peak(&self, t: usize) -> Option<f64> {
        let end = t + 1 + HORIZON;
        if end > self.rates.len() {
            return None;
        }
        Some(self.rates[t + 1..end].iter().copied().fold(0.0, f64::max))
    }

    /// Reads a single-column CSV of rates, with an optional `rate` header.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Serde(format!("{other:?}")),
            })?;
        let mut rates = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let field = rec.get(0).unwrap_or("");
            if line == 0 && field.eq_ignore_ascii_case("rate") {
                continue;
            }
            let r: f64 = field.parse().map_err(|_| {
                Error::invalid(format!("{}:{}: not a number: '{field}'", path.display(), line + 1))
            })?;
            rates.push(r);
        }
        if rates.is_empty() {
            return Err(Error::invalid(format!("{}: no rates", path.display())));
        }
        Self::from_rates(rates, Pattern::FromFile)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Serde(format!("{other:?}")),
            })?;
        w.write_record(["rate"])?;
        for r in &self.rates {
            w.write_record([r.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn generate_trace(
    pattern: Pattern,
    duration_s: usize,
    seed: u64,
    params: &PatternParams,
) -> Result<WorkloadTrace> {
    if duration_s < 1 {
        return Err(Error::invalid("trace duration must be at least one second"));
    }
    if !(0.0..1.0).contains(&params.noise) || !(0.0..=1.0).contains(&params.step_mix) {
        return Err(Error::invalid("noise must be in [0, 1) and step_mix in [0, 1]"));
    }
    let mean_at: Box<dyn Fn(usize) -> f64> = match pattern {
        Pattern::SteadyLow => Box::new(|_| params.low),
        Pattern::SteadyHigh => Box::new(|_| params.high),
        Pattern::Constant => Box::new(|_| params.level),
        Pattern::Fluctuating => {
            if !(params.period_s > 0.0) {
                return Err(Error::invalid("fluctuating pattern needs a positive period"));
            }
            let (lo, hi, period, mix, phase) =
                (params.low, params.high, params.period_s, params.step_mix, params.phase_s);
            Box::new(move |t| {
                let x = 2.0 * PI * (t as f64 + phase) / period;
                let smooth = 0.5 - 0.5 * x.cos();
                let square = if smooth >= 0.5 { 1.0 } else { 0.0 };
                lo + (hi - lo) * ((1.0 - mix) * smooth + mix * square)
            })
        }
        Pattern::FromFile => {
            return Err(Error::invalid("from_file traces are loaded, not generated"));
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = (0..duration_s)
        .map(|t| {
            let u: f64 = if params.noise > 0.0 {
                rng.gen_range(-params.noise..=params.noise)
            } else {
                0.0
            };
            (mean_at(t) * (1.0 + u)).max(0.0)
        })
        .collect();
    Ok(WorkloadTrace {
        rates,
        seed,
        pattern,
    })
}

/// The `HISTORY_LEN` rates ending at second `t` inclusive, left-padded with
/// zeros before the trace start.
pub fn history_window(trace: &WorkloadTrace, t: usize) -> Result<Vec<f64>> {
    if t >= trace.len() {
        return Err(Error::invalid(format!(
            "window end {t} outside trace of length {}",
            trace.len()
        )));
    }
    let mut out = vec![0.0; HISTORY_LEN];
    let start = (t + 1).saturating_sub(HISTORY_LEN);
    let src = &trace.rates[start..=t];
    out[HISTORY_LEN - src.len()..].copy_from_slice(src);
    Ok(out)
}

/// Symmetric mean absolute percentage error in percent. `0/0` terms count as zero.
pub fn smape(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() || predicted.is_empty() {
        return Err(Error::invalid(format!(
            "smape needs equal non-empty lengths, got {} and {}",
            predicted.len(),
            actual.len()
        )));
    }
    let sum: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| {
            let denom = p.abs() + a.abs();
            if denom == 0.0 {
                0.0
            } else {
                2.0 * (p - a).abs() / denom
            }
        })
        .sum();
    Ok(100.0 * sum / predicted.len() as f64)
}
