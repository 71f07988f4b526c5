use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::policy::{policy_evaluate, PolicyModel, SelectMode};
use crate::baselines::{random_policy, Solver};
use crate::env::{PipelineEnv, StepInfo};
use crate::error::Result;
use crate::pipeline::{Capacity, MetricWeights, PipelineConfig, PipelineSpec};

/// Anything that picks the next configuration from the environment's
/// current observation.
pub trait ConfigPolicy {
    fn name(&self) -> &str;
    fn decide(&mut self, env: &PipelineEnv) -> Result<PipelineConfig>;
}

pub struct OpdPolicy {
    model: PolicyModel,
    mode: SelectMode,
    rng: ChaCha8Rng,
}

impl OpdPolicy {
    pub fn new(model: PolicyModel, mode: SelectMode, seed: u64) -> Self {
        Self {
            model,
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn greedy(model: PolicyModel) -> Self {
        Self::new(model, SelectMode::Greedy, 0)
    }

    pub fn model(&self) -> &PolicyModel {
        &self.model
    }
}

impl ConfigPolicy for OpdPolicy {
    fn name(&self) -> &str {
        "opd"
    }

    fn decide(&mut self, env: &PipelineEnv) -> Result<PipelineConfig> {
        Ok(policy_evaluate(&self.model, env.space(), env.state(), self.mode, &mut self.rng)?.action)
    }
}

pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl ConfigPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, env: &PipelineEnv) -> Result<PipelineConfig> {
        Ok(random_policy(env.space(), &mut self.rng))
    }
}

/// The cheapest feasible configuration, computed once.
pub struct GreedyPolicy {
    config: PipelineConfig,
}

impl GreedyPolicy {
    pub fn new(spec: &PipelineSpec, capacity: &Capacity) -> Result<Self> {
        Ok(Self {
            config: crate::baselines::greedy_policy(spec, capacity)?,
        })
    }
}

impl ConfigPolicy for GreedyPolicy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decide(&mut self, _env: &PipelineEnv) -> Result<PipelineConfig> {
        Ok(self.config.clone())
    }
}

/// Exhaustive search at the forecast load.
pub struct SolverPolicy {
    solver: Solver,
    weights: MetricWeights,
}

impl SolverPolicy {
    pub fn new(spec: &PipelineSpec, capacity: &Capacity, weights: MetricWeights) -> Result<Self> {
        Ok(Self {
            solver: Solver::new(spec, capacity)?,
            weights,
        })
    }
}

impl ConfigPolicy for SolverPolicy {
    fn name(&self) -> &str {
        "solver"
    }

    fn decide(&mut self, env: &PipelineEnv) -> Result<PipelineConfig> {
        Ok(self.solver.solve(env.predicted_load(), &self.weights)?.config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub info: StepInfo,
    pub reward: f64,
    /// Wall-clock time of the decision alone.
    pub decision_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub algorithm: String,
    pub steps: Vec<StepRecord>,
    /// Sum of all per-step decision times.
    pub total_decision_time: Duration,
}

impl EpisodeReport {
    fn mean(&self, f: impl Fn(&StepRecord) -> f64) -> f64 {
        if self.steps.is_empty() {
            return f64::NAN;
        }
        self.steps.iter().map(f).sum::<f64>() / self.steps.len() as f64
    }

    pub fn mean_reward(&self) -> f64 {
        self.mean(|s| s.reward)
    }

    pub fn mean_qos(&self) -> f64 {
        self.mean(|s| s.info.qos)
    }

    pub fn mean_cost(&self) -> f64 {
        self.mean(|s| s.info.metrics.cost)
    }

    pub fn mean_objective(&self) -> f64 {
        self.mean(|s| s.info.objective)
    }
}

/// Resets `env` and runs one episode, timing only `policy.decide`.
pub fn run_online(env: &mut PipelineEnv, policy: &mut dyn ConfigPolicy) -> Result<EpisodeReport> {
    env.reset()?;
    let mut steps = Vec::with_capacity(env.episode_len());
    let mut total = Duration::ZERO;
    while !env.is_done() {
        let start = Instant::now();
        let action = policy.decide(env)?;
        let d = start.elapsed();
        total += d;
        let out = env.step(&action)?;
        steps.push(StepRecord {
            info: out.info,
            reward: out.reward,
            decision_time: d,
        });
    }
    Ok(EpisodeReport {
        algorithm: policy.name().to_string(),
        steps,
        total_decision_time: total,
    })
}
