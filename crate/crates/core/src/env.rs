//! The simulated cluster as a sequential decision problem.
//!
//! Each step installs a pipeline configuration, repairs it if it overruns
//! the device's resource budget, advances the workload trace by one
//! adaptation interval and scores the interval.

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{
    check_feasible, objective, pipeline_metrics, qos, stage_metrics, total_resource, ActionSpace,
    Capacity, MetricWeights, PipelineConfig, PipelineMetrics, PipelineSpec, StageMetrics,
};
use crate::predictor::LoadForecaster;
use crate::workload::{history_window, WorkloadTrace};

/// Features per stage in the observation vector.
pub const FEATURES_PER_STAGE: usize = 9;

/// One action is one full pipeline configuration.
pub type Action = PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    /// Resource units left unallocated.
    pub available_resource: f64,
    /// Requests per second arriving now.
    pub incoming_load: f64,
    /// Forecast peak over the next 20 s.
    pub predicted_load: f64,
}

/// The flattened observation: for every stage, the shared node triple
/// followed by that stage's latency, throughput, variant, replicas, batch
/// and cost, all scaled to roughly unit range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub features: Vec<f64>,
}

impl EnvState {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Divisors applied to raw observation features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormScales {
    pub load: f64,
    pub latency: f64,
    pub resource: f64,
}

impl NormScales {
    pub fn new(trace: &WorkloadTrace, capacity: &Capacity) -> Self {
        Self {
            load: trace.max_rate().max(1.0),
            latency: 1.0,
            resource: capacity.w_max,
        }
    }
}

pub fn observe(
    space: &ActionSpace,
    config: &PipelineConfig,
    cluster: &ClusterState,
    metrics: &[StageMetrics],
    scales: &NormScales,
) -> Result<EnvState> {
    if metrics.len() != space.num_stages() {
        return Err(Error::State(format!(
            "observation needs metrics for {} stages, got {}",
            space.num_stages(),
            metrics.len()
        )));
    }
    if config.stages.len() != space.num_stages() {
        return Err(Error::shape("config does not match the action space"));
    }
    let node = [
        cluster.available_resource / scales.resource,
        cluster.incoming_load / scales.load,
        cluster.predicted_load / scales.load,
    ];
    let mut features = Vec::with_capacity(FEATURES_PER_STAGE * space.num_stages());
    for (n, (sc, m)) in config.stages.iter().zip(metrics).enumerate() {
        let choices = &space.stages[n];
        let idx = space.encode(n, sc).ok_or_else(|| {
            Error::invalid(format!("stage {n}: configuration {sc:?} is not on the action grid"))
        })?;
        features.extend_from_slice(&node);
        features.extend_from_slice(&[
            m.latency / scales.latency,
            m.throughput / scales.load,
            idx[0] as f64 / choices.variants as f64,
            idx[1] as f64 / choices.replicas.len() as f64,
            idx[2] as f64 / choices.batches.len() as f64,
            m.cost / scales.resource,
        ]);
    }
    Ok(EnvState { features })
}

/// How the batch term of the reward aggregates per-stage batch sizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchAggregate {
    #[default]
    Max,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub qos_weights: MetricWeights,
    pub cost_weight: f64,
    pub batch_penalty: f64,
    pub repair_penalty: f64,
    pub batch_aggregate: BatchAggregate,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            qos_weights: MetricWeights::default(),
            cost_weight: 0.1,
            batch_penalty: 0.01,
            repair_penalty: 0.5,
            batch_aggregate: BatchAggregate::Max,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        self.qos_weights.validate()?;
        let w = [self.cost_weight, self.batch_penalty, self.repair_penalty];
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("reward weights must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn batch_term(&self, config: &PipelineConfig) -> usize {
        match self.batch_aggregate {
            BatchAggregate::Max => config.max_batch(),
            BatchAggregate::Sum => config.batch_sum(),
        }
    }
}

/// `q - cost_weight * cost - batch_penalty * batch_term`.
pub fn reward(q: f64, cost: f64, batch_term: usize, params: &RewardParams) -> f64 {
    q - params.cost_weight * cost - params.batch_penalty * batch_term as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub interval_s: usize,
    pub reward: RewardParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            interval_s: 10,
            reward: RewardParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub step: usize,
    /// Second at which the interval started.
    pub time_s: usize,
    pub demand: f64,
    pub predicted: f64,
    pub repaired: bool,
    /// Configuration actually installed, after any repair.
    pub config: PipelineConfig,
    pub metrics: PipelineMetrics,
    pub qos: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Decrements replicas of the largest resource consumer (earliest stage on
/// ties) until the budget holds. If every stage is already at one replica,
/// the largest consumer falls back to its leanest variant.
pub fn repair(
    spec: &PipelineSpec,
    capacity: &Capacity,
    config: &mut PipelineConfig,
) -> Result<bool> {
    let mut repaired = false;
    loop {
        if total_resource(spec, config)? <= capacity.w_max {
            return Ok(repaired);
        }
        repaired = true;
        let usage: Vec<f64> = config
            .stages
            .iter()
            .enumerate()
            .map(|(n, sc)| spec.stages[n].variants[sc.variant].resource_per_replica * sc.replicas as f64)
            .collect();
        let pick = |eligible: &dyn Fn(usize) -> bool| {
            (0..usage.len())
                .filter(|&n| eligible(n))
                .fold(None, |best: Option<usize>, n| match best {
                    Some(b) if usage[b] >= usage[n] => Some(b),
                    _ => Some(n),
                })
        };
        let replica_pick = pick(&|n| config.stages[n].replicas > 1);
        if let Some(n) = replica_pick {
            config.stages[n].replicas -= 1;
            continue;
        }
        let leanest = |n: usize| {
            spec.stages[n]
                .variants
                .iter()
                .min_by(|a, b| a.resource_per_replica.total_cmp(&b.resource_per_replica))
                .map(|v| v.id)
                .unwrap_or(0)
        };
        let lean_pick = pick(&|n| {
            leanest(n) != config.stages[n].variant
                && spec.stages[n].variants[leanest(n)].resource_per_replica
                    < spec.stages[n].variants[config.stages[n].variant].resource_per_replica
        });
        match lean_pick {
            Some(n) => config.stages[n].variant = leanest(n),
            None => {
                return Err(Error::Infeasible(
                    "no configuration fits the resource budget".into(),
                ))
            }
        }
    }
}

/// A single-episode simulator over one workload trace.
#[derive(Clone)]
pub struct PipelineEnv {
    spec: Arc<PipelineSpec>,
    capacity: Capacity,
    space: Arc<ActionSpace>,
    trace: Arc<WorkloadTrace>,
    predictions: Arc<Vec<f64>>,
    cfg: EnvConfig,
    scales: NormScales,
    initial: PipelineConfig,
    config: PipelineConfig,
    t: usize,
    step: usize,
    state: EnvState,
    apply_delay: Option<Duration>,
}

impl std::fmt::Debug for PipelineEnv {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PipelineEnv")
            .field("stages", &self.spec.num_stages())
            .field("trace_len", &self.trace.len())
            .field("t", &self.t)
            .field("step", &self.step)
            .finish()
    }
}

impl PipelineEnv {
    /// Builds the environment and runs the forecaster once per decision point.
    pub fn new(
        spec: PipelineSpec,
        capacity: Capacity,
        trace: WorkloadTrace,
        forecaster: &dyn LoadForecaster,
        cfg: EnvConfig,
    ) -> Result<Self> {
        spec.validate()?;
        capacity.validate()?;
        cfg.reward.validate()?;
        if cfg.interval_s == 0 {
            return Err(Error::invalid("adaptation interval must be at least one second"));
        }
        if trace.is_empty() {
            return Err(Error::invalid("workload trace is empty"));
        }
        let predictions = (0..trace.len())
            .step_by(cfg.interval_s)
            .map(|t| forecaster.predict_peak(&history_window(&trace, t)?))
            .collect::<Result<Vec<f64>>>()?;
        let space = ActionSpace::new(&spec, &capacity);
        let scales = NormScales::new(&trace, &capacity);
        let initial = PipelineConfig::minimal(&spec);
        if !check_feasible(&spec, &initial, &capacity)?.is_ok() {
            return Err(Error::Infeasible(
                "the minimal configuration already exceeds the capacity".into(),
            ));
        }
        let mut env = Self {
            spec: Arc::new(spec),
            capacity,
            space: Arc::new(space),
            trace: Arc::new(trace),
            predictions: Arc::new(predictions),
            cfg,
            scales,
            config: initial.clone(),
            initial,
            t: 0,
            step: 0,
            state: EnvState { features: vec![] },
            apply_delay: None,
        };
        env.reset()?;
        Ok(env)
    }

    /// Simulated time spent applying each new configuration to the cluster.
    pub fn with_apply_delay(mut self, delay: Duration) -> Self {
        self.apply_delay = Some(delay);
        self
    }

    pub fn with_initial_config(mut self, config: PipelineConfig) -> Result<Self> {
        if !self.space.contains(&config) || !check_feasible(&self.spec, &config, &self.capacity)?.is_ok() {
            return Err(Error::invalid("initial configuration is not a feasible grid point"));
        }
        self.initial = config;
        self.reset()?;
        Ok(self)
    }

    pub fn reset(&mut self) -> Result<EnvState> {
        self.t = 0;
        self.step = 0;
        self.config = self.initial.clone();
        self.state = self.observe_now()?;
        Ok(self.state.clone())
    }

    fn cluster_now(&self) -> Result<ClusterState> {
        let idx = self.t.min(self.trace.len() - 1);
        let pred_idx = self.step.min(self.predictions.len() - 1);
        Ok(ClusterState {
            available_resource: (self.capacity.w_max - total_resource(&self.spec, &self.config)?)
                .max(0.0),
            incoming_load: self.trace.rates[idx],
            predicted_load: self.predictions[pred_idx],
        })
    }

    fn observe_now(&self) -> Result<EnvState> {
        let metrics = stage_metrics(&self.spec, &self.config)?;
        observe(&self.space, &self.config, &self.cluster_now()?, &metrics, &self.scales)
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome> {
        if self.is_done() {
            return Err(Error::State("episode already finished".into()));
        }
        if action.stages.len() != self.spec.num_stages() {
            return Err(Error::shape("action does not match the pipeline"));
        }
        if !self.space.contains(action) {
            return Err(Error::invalid(format!("action {action:?} is outside the action grid")));
        }
        let mut config = action.clone();
        let repaired = repair(&self.spec, &self.capacity, &mut config)?;
        if let Some(d) = self.apply_delay {
            std::thread::sleep(d);
        }
        let predicted = self.predictions[self.step];
        let demand = self.trace.interval_mean(self.t, self.cfg.interval_s)?;
        let metrics = pipeline_metrics(&self.spec, &config, demand)?;
        let rp = &self.cfg.reward;
        let q = qos(&metrics, &rp.qos_weights);
        let mut r = reward(q, metrics.cost, rp.batch_term(&config), rp);
        if repaired {
            r -= rp.repair_penalty;
        }
        let info = StepInfo {
            step: self.step,
            time_s: self.t,
            demand,
            predicted,
            repaired,
            config: config.clone(),
            metrics,
            qos: q,
            objective: objective(q, metrics.cost, &rp.qos_weights),
        };
        self.config = config;
        self.t += self.cfg.interval_s;
        self.step += 1;
        self.state = self.observe_now()?;
        Ok(StepOutcome {
            state: self.state.clone(),
            reward: r,
            done: self.is_done(),
            info,
        })
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.trace.len()
    }

    pub fn episode_len(&self) -> usize {
        self.trace.len().div_ceil(self.cfg.interval_s)
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn spec(&self) -> &PipelineSpec {
        &self.spec
    }

    pub fn capacity(&self) -> &Capacity {
        &self.capacity
    }

    pub fn space(&self) -> &ActionSpace {
        &self.space
    }

    pub fn trace(&self) -> &WorkloadTrace {
        &self.trace
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn time_s(&self) -> usize {
        self.t
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    /// Forecast available at the current decision point.
    pub fn predicted_load(&self) -> f64 {
        self.predictions[self.step.min(self.predictions.len() - 1)]
    }

    pub fn incoming_load(&self) -> f64 {
        self.trace.rates[self.t.min(self.trace.len() - 1)]
    }

    pub fn observation_len(&self) -> usize {
        FEATURES_PER_STAGE * self.spec.num_stages()
    }
}
