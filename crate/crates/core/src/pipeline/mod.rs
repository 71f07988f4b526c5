//! Pipeline domain types and the pure metric model.
//!
//! A pipeline is a linear chain of stages. Each stage picks one model
//! variant, a replica count and a batch size; everything downstream
//! (accuracy, cost, latency, throughput, QoS) is a pure function of that
//! choice plus the current demand.

mod metrics;
pub(crate) mod space;

pub use metrics::{
    check_feasible, objective, pipeline_metrics, qos, stage_latency, stage_metrics,
    stage_throughput, total_resource, Feasibility, PipelineMetrics, StageMetrics, Violation,
};
pub use space::{ActionSpace, StageChoices};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One deployable model option for a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelVariant {
    #[serde(default)]
    pub id: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Offline-profiled accuracy in `[0, 1]`.
    pub accuracy: f64,
    /// CPU cores per replica.
    pub cost_per_replica: f64,
    /// Abstract resource units per replica, counted against `Capacity::w_max`.
    pub resource_per_replica: f64,
    /// Fixed per-batch latency in seconds.
    pub base_latency: f64,
    /// Additional latency per request in a batch, in seconds.
    pub per_item_latency: f64,
}

impl ModelVariant {
    pub fn new(
        id: usize,
        accuracy: f64,
        cost_per_replica: f64,
        resource_per_replica: f64,
        base_latency: f64,
        per_item_latency: f64,
    ) -> Self {
        Self {
            id,
            name: None,
            accuracy,
            cost_per_replica,
            resource_per_replica,
            base_latency,
            per_item_latency,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.accuracy,
            self.cost_per_replica,
            self.resource_per_replica,
            self.base_latency,
            self.per_item_latency,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid(format!("variant {}: non-finite field", self.id)));
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return Err(Error::invalid(format!(
                "variant {}: accuracy {} outside [0, 1]",
                self.id, self.accuracy
            )));
        }
        if self.cost_per_replica <= 0.0 || self.resource_per_replica <= 0.0 {
            return Err(Error::invalid(format!(
                "variant {}: cost and resource per replica must be positive",
                self.id
            )));
        }
        if self.base_latency < 0.0 || self.per_item_latency < 0.0 {
            return Err(Error::invalid(format!(
                "variant {}: latencies must be non-negative",
                self.id
            )));
        }
        if self.base_latency == 0.0 && self.per_item_latency == 0.0 {
            return Err(Error::invalid(format!(
                "variant {}: zero latency gives unbounded throughput",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub name: String,
    pub variants: Vec<ModelVariant>,
}

impl StageSpec {
    /// Builds a stage, renumbering variant ids to their positions.
    pub fn new(name: impl Into<String>, mut variants: Vec<ModelVariant>) -> Self {
        for (i, v) in variants.iter_mut().enumerate() {
            v.id = i;
        }
        Self {
            name: name.into(),
            variants,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::invalid(format!("stage {}: no variants", self.name)));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if v.id != i {
                return Err(Error::invalid(format!(
                    "stage {}: variant at position {i} has id {}",
                    self.name, v.id
                )));
            }
            v.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub stages: Vec<StageSpec>,
}

impl PipelineSpec {
    pub fn new(stages: Vec<StageSpec>) -> Result<Self> {
        let spec = Self { stages };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::invalid("pipeline has no stages"));
        }
        self.stages.iter().try_for_each(StageSpec::validate)
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn variant(&self, stage: usize, index: usize) -> Result<&ModelVariant> {
        let s = self
            .stages
            .get(stage)
            .ok_or_else(|| Error::shape(format!("stage {stage} does not exist")))?;
        s.variants.get(index).ok_or_else(|| {
            Error::invalid(format!(
                "stage {stage}: variant index {index} out of range (0..{})",
                s.variants.len()
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StageConfig {
    pub variant: usize,
    pub replicas: usize,
    pub batch: usize,
}

impl StageConfig {
    pub fn new(variant: usize, replicas: usize, batch: usize) -> Self {
        Self {
            variant,
            replicas,
            batch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stages: Vec<StageConfig>,
}

impl PipelineConfig {
    pub fn new(stages: Vec<StageConfig>) -> Self {
        Self { stages }
    }

    /// Variant 0, one replica, batch 1 on every stage.
    pub fn minimal(spec: &PipelineSpec) -> Self {
        Self::new(vec![StageConfig::new(0, 1, 1); spec.num_stages()])
    }

    pub fn max_batch(&self) -> usize {
        self.stages.iter().map(|s| s.batch).max().unwrap_or(0)
    }

    pub fn batch_sum(&self) -> usize {
        self.stages.iter().map(|s| s.batch).sum()
    }

    pub(crate) fn check_shape(&self, spec: &PipelineSpec) -> Result<()> {
        if self.stages.len() != spec.num_stages() {
            return Err(Error::shape(format!(
                "config has {} stages, pipeline has {}",
                self.stages.len(),
                spec.num_stages()
            )));
        }
        Ok(())
    }
}

/// Which batch sizes in `1..=b_max` an agent may choose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchGrid {
    /// `1, 2, 4, ...` up to `b_max`.
    #[default]
    PowersOfTwo,
    /// Every integer in `1..=b_max`.
    All,
}

impl BatchGrid {
    pub fn choices(self, b_max: usize) -> Vec<usize> {
        match self {
            BatchGrid::All => (1..=b_max).collect(),
            BatchGrid::PowersOfTwo => std::iter::successors(Some(1usize), |b| Some(b * 2))
                .take_while(|&b| b <= b_max)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    pub f_max: usize,
    pub b_max: usize,
    pub w_max: f64,
    #[serde(default)]
    pub batch_grid: BatchGrid,
}

impl Capacity {
    pub fn new(f_max: usize, b_max: usize, w_max: f64) -> Self {
        Self {
            f_max,
            b_max,
            w_max,
            batch_grid: BatchGrid::PowersOfTwo,
        }
    }

    pub fn with_batch_grid(mut self, grid: BatchGrid) -> Self {
        self.batch_grid = grid;
        self
    }

    pub fn batch_choices(&self) -> Vec<usize> {
        self.batch_grid.choices(self.b_max)
    }

    pub fn validate(&self) -> Result<()> {
        if self.f_max == 0 || self.b_max == 0 || !(self.w_max > 0.0) || !self.w_max.is_finite() {
            return Err(Error::invalid("capacity bounds must be strictly positive"));
        }
        Ok(())
    }
}

/// QoS weights (`alpha`, `beta_q`, `gamma_q`, `delta_q`) and the objective's
/// cost weight `lambda_obj`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricWeights {
    pub alpha: f64,
    pub beta_q: f64,
    pub gamma_q: f64,
    pub delta_q: f64,
    pub lambda_obj: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta_q: 0.01,
            gamma_q: 0.1,
            delta_q: 0.05,
            lambda_obj: 0.1,
        }
    }
}

impl MetricWeights {
    pub fn validate(&self) -> Result<()> {
        let w = [self.alpha, self.beta_q, self.gamma_q, self.delta_q, self.lambda_obj];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("metric weights must be finite and non-negative"));
        }
        Ok(())
    }
}
