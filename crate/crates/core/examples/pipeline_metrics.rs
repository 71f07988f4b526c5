//! Scores a few configurations of a two-stage pipeline at one demand level.

use opd::pipeline::{
    check_feasible, objective, pipeline_metrics, qos, Capacity, MetricWeights, ModelVariant,
    PipelineConfig, PipelineSpec, StageConfig, StageSpec,
};

fn main() -> opd::Result<()> {
    let spec = PipelineSpec::new(vec![
        StageSpec::new(
            "detect",
            vec![
                ModelVariant::new(0, 0.70, 1.0, 1.0, 0.020, 0.006),
                ModelVariant::new(1, 0.88, 2.0, 2.0, 0.040, 0.012),
            ],
        ),
        StageSpec::new("classify", vec![ModelVariant::new(0, 0.80, 0.5, 0.5, 0.010, 0.004)]),
    ])?;
    let capacity = Capacity::new(4, 8, 8.0);
    let weights = MetricWeights::default();
    let demand = 60.0;

    let candidates = [
        [StageConfig::new(0, 1, 1), StageConfig::new(0, 1, 1)],
        [StageConfig::new(0, 1, 8), StageConfig::new(0, 1, 4)],
        [StageConfig::new(1, 2, 4), StageConfig::new(0, 1, 4)],
        [StageConfig::new(1, 4, 8), StageConfig::new(0, 2, 8)],
    ];
    println!("demand {demand} req/s");
    for stages in candidates {
        let cfg = PipelineConfig::new(stages.to_vec());
        let m = pipeline_metrics(&spec, &cfg, demand)?;
        let q = qos(&m, &weights);
        let feasible = check_feasible(&spec, &cfg, &capacity)?;
        println!(
            "{:?}\n  accuracy {:.2} cost {:.1} latency {:.3}s throughput {:.1} excess {:+.1} qos {:.3} objective {:.3} feasible {}",
            cfg.stages,
            m.accuracy_sum,
            m.cost,
            m.latency,
            m.throughput,
            m.excess_load,
            q,
            objective(q, m.cost, &weights),
            feasible.is_ok()
        );
        for v in &feasible.violations {
            println!("  violation: {v:?}");
        }
    }
    Ok(())
}
