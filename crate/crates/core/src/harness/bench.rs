//! Built-in pipelines: the 3×3 desk pipeline used for training runs and
//! the square family used for decision-time scaling.

use crate::error::{Error, Result};
use crate::pipeline::{Capacity, ModelVariant, PipelineSpec, StageSpec};

/// Variant `v` of `count` on stage `stage`. Larger `v` is more accurate,
/// more expensive and slower.
pub fn variant_profile(stage: usize, v: usize, count: usize) -> ModelVariant {
    let frac = if count > 1 {
        v as f64 / (count - 1) as f64
    } else {
        0.5
    };
    let mut m = ModelVariant::new(
        v,
        0.55 + 0.4 * frac,
        1.0 + 1.5 * frac,
        1.0 + 1.5 * frac,
        0.010 * (1.0 + 2.0 * frac) + 0.002 * stage as f64,
        0.004 * (1.0 + 1.6 * frac),
    );
    m.name = Some(format!("s{stage}v{v}"));
    m
}

/// `stages` stages with `variants` profiled variants each.
pub fn square_pipeline(stages: usize, variants: usize) -> Result<PipelineSpec> {
    if stages == 0 || variants == 0 {
        return Err(Error::invalid("benchmark pipelines need at least one stage and variant"));
    }
    PipelineSpec::new(
        (0..stages)
            .map(|n| {
                StageSpec::new(
                    format!("stage{n}"),
                    (0..variants).map(|v| variant_profile(n, v, variants)).collect(),
                )
            })
            .collect(),
    )
}

/// Four replicas, batches 1/2/4/8, and a budget of 2.5 units per stage.
pub fn bench_capacity(stages: usize) -> Capacity {
    Capacity::new(4, 8, 2.5 * stages as f64)
}

#[derive(Debug, Clone)]
pub struct BenchPipeline {
    pub name: String,
    pub spec: PipelineSpec,
    pub capacity: Capacity,
}

pub fn desk_pipeline() -> BenchPipeline {
    BenchPipeline {
        name: "desk-3x3".into(),
        spec: square_pipeline(3, 3).expect("static pipeline is valid"),
        capacity: Capacity::new(4, 8, 12.0),
    }
}

/// 2×2, 3×3, 4×4 and 5×5, in order of configuration-space size.
pub fn decision_time_family() -> Vec<BenchPipeline> {
    (2..=5)
        .map(|n| BenchPipeline {
            name: format!("bench-{n}x{n}"),
            spec: square_pipeline(n, n).expect("static pipeline is valid"),
            capacity: bench_capacity(n),
        })
        .collect()
}

/// Looks up `desk` or `bench-NxN`.
pub fn builtin(name: &str) -> Result<BenchPipeline> {
    if name == "desk" || name == "desk-3x3" {
        return Ok(desk_pipeline());
    }
    decision_time_family()
        .into_iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::invalid(format!("unknown built-in pipeline {name:?}")))
}
