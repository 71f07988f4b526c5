//! Random, greedy and exhaustive-solver choices on the desk pipeline at
//! several demand levels.

use opd::baselines::{greedy_policy, random_policy, solver_policy};
use opd::harness::bench::desk_pipeline;
use opd::pipeline::{objective, pipeline_metrics, qos, ActionSpace, MetricWeights};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> opd::Result<()> {
    let desk = desk_pipeline();
    let weights = MetricWeights::default();
    let space = ActionSpace::new(&desk.spec, &desk.capacity);
    println!("{} configurations", space.size());

    let greedy = greedy_policy(&desk.spec, &desk.capacity)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for demand in [20.0, 60.0, 100.0] {
        let solved = solver_policy(&desk.spec, &desk.capacity, demand, &weights)?;
        let random = random_policy(&space, &mut rng);
        println!("demand {demand}:");
        for (name, cfg) in [("greedy", &greedy), ("random", &random), ("solver", &solved.config)] {
            let m = pipeline_metrics(&desk.spec, cfg, demand)?;
            let q = qos(&m, &weights);
            println!(
                "  {name:<7} objective {:>7.3} cost {:>5.1} throughput {:>6.1}  {:?}",
                objective(q, m.cost, &weights),
                m.cost,
                m.throughput,
                cfg.stages.iter().map(|s| (s.variant, s.replicas, s.batch)).collect::<Vec<_>>()
            );
        }
        println!(
            "  solver scored {} feasible configurations in {:.2?}",
            solved.evaluated, solved.elapsed
        );
    }
    Ok(())
}
