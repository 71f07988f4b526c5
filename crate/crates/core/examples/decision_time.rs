//! Per-decision time of the exhaustive solver and the policy network
//! across pipelines of growing size.
//!
//! `cargo run --release --example decision_time`

use opd::agent::{run_online, OpdPolicy, PolicyArch, PolicyModel, SolverPolicy};
use opd::env::{EnvConfig, PipelineEnv};
use opd::harness::bench::decision_time_family;
use opd::harness::decision_time_improvement;
use opd::harness::format_percent;
use opd::predictor::RecentPeak;
use opd::workload::{generate_trace, Pattern, PatternParams};

fn main() -> opd::Result<()> {
    // a short trace keeps the 5x5 solver run under a minute
    let trace = generate_trace(Pattern::Fluctuating, 300, 7, &PatternParams::default())?;
    for b in decision_time_family() {
        let mut env = PipelineEnv::new(
            b.spec.clone(),
            b.capacity,
            trace.clone(),
            &RecentPeak::default(),
            EnvConfig::default(),
        )?;
        let model = PolicyModel::for_space(env.space(), PolicyArch::default(), 0)?;
        let size = env.space().size();
        let solver = run_online(&mut env, &mut SolverPolicy::new(&b.spec, &b.capacity, Default::default())?)?;
        let opd = run_online(&mut env, &mut OpdPolicy::greedy(model))?;
        let (hs, ho) = (
            solver.total_decision_time.as_secs_f64() * 1e3,
            opd.total_decision_time.as_secs_f64() * 1e3,
        );
        println!(
            "{:<10} {:>12} configs  H solver {:>10.3} ms  H opd {:>7.3} ms  improvement {}",
            b.name,
            size,
            hs,
            ho,
            decision_time_improvement(hs, ho).map(format_percent).unwrap_or_default()
        );
    }
    Ok(())
}
