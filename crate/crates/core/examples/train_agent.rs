//! Trains the PPO agent on the desk pipeline with solver-guided episodes,
//! then compares it with the baselines on a fresh trace.
//!
//! `cargo run --release --example train_agent -- 2000`

use opd::agent::{run_online, ConfigPolicy, OpdPolicy, RandomPolicy, SolverPolicy};
use opd::harness::{prepare, train_agent, ExperimentConfig, ForecasterKind};

fn main() -> opd::Result<()> {
    let episodes = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let mut cfg = ExperimentConfig::builtin("desk", 7);
    cfg.agent.episodes = episodes;
    cfg.agent.ppo.discount = 0.9;
    cfg.predictor.kind = ForecasterKind::RecentPeak;

    let prepared = prepare(&cfg)?;
    let trained = train_agent(&cfg, &prepared)?;
    let step = (trained.curve.len() / 10).max(1);
    for c in trained.curve.iter().step_by(step) {
        println!(
            "episode {:>5} {} reward {:>7.3} policy loss {:>7.3} value loss {:>8.3}",
            c.episode,
            if c.expert { "expert" } else { "policy" },
            c.mean_reward,
            c.policy_loss,
            c.value_loss
        );
    }
    println!("trained in {:.1?}", trained.elapsed);

    let mut env = prepared.eval_env(&cfg)?;
    let mut policies: Vec<Box<dyn ConfigPolicy>> = vec![
        Box::new(RandomPolicy::new(cfg.seed)),
        Box::new(SolverPolicy::new(&prepared.spec, &prepared.capacity, cfg.weights)?),
        Box::new(OpdPolicy::greedy(trained.model)),
    ];
    for p in &mut policies {
        let r = run_online(&mut env, p.as_mut())?;
        println!(
            "{:<7} objective {:.4} qos {:.4} cost {:.3} H {:.2?}",
            r.algorithm,
            r.mean_objective(),
            r.mean_qos(),
            r.mean_cost(),
            r.total_decision_time
        );
    }
    Ok(())
}
