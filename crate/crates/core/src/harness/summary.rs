//! Cross-algorithm and cross-run comparison of finished runs.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::RunSummary;
use crate::error::{Error, Result};

/// `(value - base) / |base|`, or `None` when `base` is zero.
pub fn relative_delta(value: f64, base: f64) -> Option<f64> {
    if base == 0.0 || !base.is_finite() || !value.is_finite() {
        return None;
    }
    Some((value - base) / base.abs())
}

/// Signed percentage with one decimal, dropping a trailing `.0`:
/// `1.2` becomes `+120%`, `-0.035` becomes `-3.5%`.
pub fn format_percent(fraction: f64) -> String {
    let pct = fraction * 100.0;
    if pct.abs() < 0.05 {
        return "0%".into();
    }
    let s = format!("{pct:+.1}");
    let s = s.strip_suffix(".0").unwrap_or(&s);
    format!("{s}%")
}

pub fn format_delta(value: f64, base: f64) -> String {
    relative_delta(value, base).map(format_percent).unwrap_or_else(|| "n/a".into())
}

/// How much faster OPD decides than the solver: `(H_solver - H_opd) / H_opd`.
pub fn decision_time_improvement(h_solver: f64, h_opd: f64) -> Option<f64> {
    if h_opd <= 0.0 || !h_opd.is_finite() || !h_solver.is_finite() {
        return None;
    }
    Some((h_solver - h_opd) / h_opd)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub cost: String,
    pub qos: String,
    pub objective: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub algorithm: String,
    pub mean_cost: f64,
    pub mean_qos: f64,
    pub mean_objective: f64,
    pub total_decision_ms: f64,
    pub vs_greedy: Option<Deltas>,
    pub vs_solver: Option<Deltas>,
    /// Against the same algorithm in the first run.
    pub vs_first_run: Option<Deltas>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTimeRow {
    pub run: String,
    pub solver_ms: f64,
    pub opd_ms: f64,
    pub improvement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ReportRow>,
    pub decision_time: Vec<DecisionTimeRow>,
}

fn deltas(
    s: &super::experiment::AlgorithmSummary,
    b: &super::experiment::AlgorithmSummary,
) -> Deltas {
    Deltas {
        cost: format_delta(s.mean_cost, b.mean_cost),
        qos: format_delta(s.mean_qos, b.mean_qos),
        objective: format_delta(s.mean_objective, b.mean_objective),
    }
}

pub fn compare(runs: &[(String, RunSummary)]) -> Result<ComparisonReport> {
    let (_, first) = runs
        .first()
        .ok_or_else(|| Error::Comparison("no runs to summarize".into()))?;
    for (name, r) in &runs[1..] {
        if !r.metadata.comparable(&first.metadata) {
            return Err(Error::Comparison(format!(
                "run {name} used a different pipeline or trace than {}",
                runs[0].0
            )));
        }
    }
    let mut rows = Vec::new();
    let mut decision_time = Vec::new();
    for (i, (name, run)) in runs.iter().enumerate() {
        let greedy = run.algorithm("greedy");
        let solver = run.algorithm("solver");
        for a in &run.algorithms {
            rows.push(ReportRow {
                run: name.clone(),
                algorithm: a.algorithm.clone(),
                mean_cost: a.mean_cost,
                mean_qos: a.mean_qos,
                mean_objective: a.mean_objective,
                total_decision_ms: a.total_decision_ms,
                vs_greedy: greedy.map(|g| deltas(a, g)),
                vs_solver: solver.map(|s| deltas(a, s)),
                vs_first_run: if i == 0 {
                    None
                } else {
                    first.algorithm(&a.algorithm).map(|f| deltas(a, f))
                },
            });
        }
        if let (Some(s), Some(o)) = (solver, run.algorithm("opd")) {
            decision_time.push(DecisionTimeRow {
                run: name.clone(),
                solver_ms: s.total_decision_ms,
                opd_ms: o.total_decision_ms,
                improvement: decision_time_improvement(s.total_decision_ms, o.total_decision_ms)
                    .map(format_percent)
                    .unwrap_or_else(|| "n/a".into()),
            });
        }
    }
    Ok(ComparisonReport { rows, decision_time })
}

/// Loads `summary.json` from every directory and compares them.
pub fn summarize(dirs: &[PathBuf]) -> Result<ComparisonReport> {
    let runs = dirs
        .iter()
        .map(|d| Ok((run_label(d), RunSummary::load(d)?)))
        .collect::<Result<Vec<_>>>()?;
    compare(&runs)
}

fn run_label(dir: &Path) -> String {
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| dir.display().to_string())
}

impl fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = |x: &Option<Deltas>, pick: fn(&Deltas) -> &String| {
            x.as_ref().map(|d| pick(d).clone()).unwrap_or_else(|| "-".into())
        };
        writeln!(
            f,
            "{:<14} {:<8} {:>10} {:>10} {:>10} {:>12} {:>10} {:>10} {:>10} {:>10}",
            "run", "algo", "cost", "qos", "objective", "H_ms", "cost/grd", "qos/grd", "cost/sol", "qos/sol"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<14} {:<8} {:>10.4} {:>10.4} {:>10.4} {:>12.3} {:>10} {:>10} {:>10} {:>10}",
                r.run,
                r.algorithm,
                r.mean_cost,
                r.mean_qos,
                r.mean_objective,
                r.total_decision_ms,
                d(&r.vs_greedy, |d| &d.cost),
                d(&r.vs_greedy, |d| &d.qos),
                d(&r.vs_solver, |d| &d.cost),
                d(&r.vs_solver, |d| &d.qos),
            )?;
        }
        let cross: Vec<_> = self.rows.iter().filter(|r| r.vs_first_run.is_some()).collect();
        if !cross.is_empty() {
            writeln!(f, "\nagainst the first run:")?;
            for r in cross {
                let x = r.vs_first_run.as_ref().expect("filtered");
                writeln!(
                    f,
                    "{:<14} {:<8} cost {:>8} qos {:>8} objective {:>8}",
                    r.run, r.algorithm, x.cost, x.qos, x.objective
                )?;
            }
        }
        if !self.decision_time.is_empty() {
            writeln!(f, "\ndecision time (OPD improvement = (H_solver - H_opd) / H_opd):")?;
            for t in &self.decision_time {
                writeln!(
                    f,
                    "{:<14} solver {:>12.3} ms  opd {:>10.3} ms  improvement {}",
                    t.run, t.solver_ms, t.opd_ms, t.improvement
                )?;
            }
        }
        Ok(())
    }
}
