use serde::{Deserialize, Serialize};

use super::{Capacity, MetricWeights, ModelVariant, PipelineConfig, PipelineSpec};
use crate::error::{Error, Result};

/// Aggregate metrics of one pipeline configuration at one demand level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineMetrics {
    /// Sum of per-stage accuracies.
    pub accuracy_sum: f64,
    /// Total CPU cores.
    pub cost: f64,
    /// End-to-end latency in seconds (sum over stages).
    pub latency: f64,
    /// Bottleneck throughput in requests per second.
    pub throughput: f64,
    /// Demand minus throughput; negative means spare capacity.
    pub excess_load: f64,
}

/// Per-stage quantities that feed the observation vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub latency: f64,
    pub throughput: f64,
    pub cost: f64,
    pub resource: f64,
}

/// Affine batch latency: `base + per_item * batch`.
pub fn stage_latency(variant: &ModelVariant, batch: usize) -> Result<f64> {
    if batch < 1 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    Ok(variant.base_latency + variant.per_item_latency * batch as f64)
}

/// Each replica completes one batch per latency period.
pub fn stage_throughput(variant: &ModelVariant, batch: usize, replicas: usize) -> Result<f64> {
    if replicas < 1 {
        return Err(Error::invalid("replica count must be at least 1"));
    }
    let latency = stage_latency(variant, batch)?;
    Ok(replicas as f64 * batch as f64 / latency)
}

pub fn stage_metrics(spec: &PipelineSpec, config: &PipelineConfig) -> Result<Vec<StageMetrics>> {
    config.check_shape(spec)?;
    config
        .stages
        .iter()
        .enumerate()
        .map(|(n, sc)| {
            let v = spec.variant(n, sc.variant)?;
            Ok(StageMetrics {
                latency: stage_latency(v, sc.batch)?,
                throughput: stage_throughput(v, sc.batch, sc.replicas)?,
                cost: sc.replicas as f64 * v.cost_per_replica,
                resource: sc.replicas as f64 * v.resource_per_replica,
            })
        })
        .collect()
}

pub fn pipeline_metrics(
    spec: &PipelineSpec,
    config: &PipelineConfig,
    demand: f64,
) -> Result<PipelineMetrics> {
    if !(demand >= 0.0) || !demand.is_finite() {
        return Err(Error::invalid(format!("demand {demand} must be finite and >= 0")));
    }
    config.check_shape(spec)?;
    let mut m = PipelineMetrics {
        accuracy_sum: 0.0,
        cost: 0.0,
        latency: 0.0,
        throughput: f64::INFINITY,
        excess_load: 0.0,
    };
    for (n, sc) in config.stages.iter().enumerate() {
        let v = spec.variant(n, sc.variant)?;
        m.accuracy_sum += v.accuracy;
        m.cost += sc.replicas as f64 * v.cost_per_replica;
        m.latency += stage_latency(v, sc.batch)?;
        m.throughput = m.throughput.min(stage_throughput(v, sc.batch, sc.replicas)?);
    }
    m.excess_load = demand - m.throughput;
    Ok(m)
}

/// Piecewise QoS score: unmet demand is penalised by `gamma_q`, spare
/// capacity by `delta_q`.
pub fn qos(metrics: &PipelineMetrics, weights: &MetricWeights) -> f64 {
    let base = weights.alpha * metrics.accuracy_sum + weights.beta_q * metrics.throughput
        - metrics.latency;
    let e = metrics.excess_load;
    if e >= 0.0 {
        base - weights.gamma_q * e
    } else {
        base - weights.delta_q * (-e)
    }
}

pub fn objective(q: f64, cost: f64, weights: &MetricWeights) -> f64 {
    q - weights.lambda_obj * cost
}

pub fn total_resource(spec: &PipelineSpec, config: &PipelineConfig) -> Result<f64> {
    config.check_shape(spec)?;
    let mut used = 0.0;
    for (n, sc) in config.stages.iter().enumerate() {
        used += spec.variant(n, sc.variant)?.resource_per_replica * sc.replicas as f64;
    }
    Ok(used)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    VariantIndex { stage: usize, index: usize, count: usize },
    Replicas { stage: usize, replicas: usize, f_max: usize },
    Batch { stage: usize, batch: usize, b_max: usize },
    Resource { used: f64, w_max: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Evaluates every constraint and reports all that fail. The resource sum
/// only counts stages whose variant index is valid.
pub fn check_feasible(
    spec: &PipelineSpec,
    config: &PipelineConfig,
    capacity: &Capacity,
) -> Result<Feasibility> {
    config.check_shape(spec)?;
    let mut violations = Vec::new();
    let mut used = 0.0;
    for (n, sc) in config.stages.iter().enumerate() {
        let count = spec.stages[n].variants.len();
        match spec.stages[n].variants.get(sc.variant) {
            Some(v) => used += v.resource_per_replica * sc.replicas as f64,
            None => violations.push(Violation::VariantIndex {
                stage: n,
                index: sc.variant,
                count,
            }),
        }
        if sc.replicas == 0 || sc.replicas > capacity.f_max {
            violations.push(Violation::Replicas {
                stage: n,
                replicas: sc.replicas,
                f_max: capacity.f_max,
            });
        }
        if sc.batch == 0 || sc.batch > capacity.b_max {
            violations.push(Violation::Batch {
                stage: n,
                batch: sc.batch,
                b_max: capacity.b_max,
            });
        }
    }
    if used > capacity.w_max {
        violations.push(Violation::Resource {
            used,
            w_max: capacity.w_max,
        });
    }
    Ok(Feasibility { violations })
}
