//! Steps the environment by hand, including an action that overruns the
//! resource budget and gets repaired.

use opd::env::{EnvConfig, PipelineEnv};
use opd::harness::bench::desk_pipeline;
use opd::pipeline::{PipelineConfig, StageConfig};
use opd::predictor::RecentPeak;
use opd::workload::{generate_trace, Pattern, PatternParams};

fn main() -> opd::Result<()> {
    let desk = desk_pipeline();
    let trace = generate_trace(Pattern::Fluctuating, 60, 3, &PatternParams::default())?;
    let mut env = PipelineEnv::new(desk.spec, desk.capacity, trace, &RecentPeak::default(), EnvConfig::default())?;
    println!("observation length {}, {} steps", env.observation_len(), env.episode_len());

    let modest = PipelineConfig::new(vec![StageConfig::new(1, 1, 4); 3]);
    let greedy_for_accuracy = PipelineConfig::new(vec![StageConfig::new(2, 4, 8); 3]);
    let mut actions = [modest, greedy_for_accuracy].into_iter().cycle();
    while !env.is_done() {
        let action = actions.next().expect("cycle never ends");
        let out = env.step(&action)?;
        let i = &out.info;
        println!(
            "t={:>3}s demand {:>5.1} predicted {:>5.1} reward {:>7.3} repaired {:<5} installed {:?}",
            i.time_s,
            i.demand,
            i.predicted,
            out.reward,
            i.repaired,
            i.config.stages.iter().map(|s| (s.variant, s.replicas, s.batch)).collect::<Vec<_>>()
        );
    }
    Ok(())
}
