//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bench;
use crate::agent::PpoHyper;
use crate::env::{BatchAggregate, EnvConfig, RewardParams};
use crate::error::{Error, Result};
use crate::pipeline::{Capacity, MetricWeights, PipelineSpec, StageSpec};
use crate::predictor::PredictorHyper;
use crate::workload::{Pattern, PatternParams};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Random,
    Greedy,
    Solver,
    Opd,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::Greedy => "greedy",
            Algorithm::Solver => "solver",
            Algorithm::Opd => "opd",
        }
    }
}

/// Whether decision times are measured or written as zero. With `off`,
/// every output file is reproducible byte for byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    #[default]
    Wall,
    Off,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSource {
    /// `desk` or `bench-NxN`.
    pub builtin: Option<String>,
    /// TOML file with `[[stages]]` and an optional `[capacity]`.
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    pub stages: Vec<StageSpec>,
    pub capacity: Option<Capacity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub pattern: Pattern,
    pub duration_s: usize,
    /// Rate file for the `from_file` pattern.
    pub file: Option<PathBuf>,
    pub params: PatternParams,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            pattern: Pattern::Fluctuating,
            duration_s: 1200,
            file: None,
            params: PatternParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    pub cost_weight: f64,
    pub batch_penalty: f64,
    pub repair_penalty: f64,
    pub batch_aggregate: BatchAggregate,
}

impl Default for RewardConfig {
    fn default() -> Self {
        let r = RewardParams::default();
        Self {
            cost_weight: r.cost_weight,
            batch_penalty: r.batch_penalty,
            repair_penalty: r.repair_penalty,
            batch_aggregate: r.batch_aggregate,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecasterKind {
    #[default]
    Lstm,
    RecentPeak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub kind: ForecasterKind,
    /// Trained model to load instead of training one.
    pub model: Option<PathBuf>,
    /// Generated traces used when training.
    pub train_traces: usize,
    pub train: PredictorHyper,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            kind: ForecasterKind::Lstm,
            model: None,
            train_traces: 8,
            train: PredictorHyper::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub episodes: usize,
    /// Trained policy to load instead of training one.
    pub policy: Option<PathBuf>,
    /// Distinct generated traces cycled through during training.
    pub train_traces: usize,
    pub ppo: PpoHyper,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            episodes: 200,
            policy: None,
            train_traces: 4,
            ppo: PpoHyper::default(),
        }
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Random, Algorithm::Greedy, Algorithm::Solver, Algorithm::Opd]
}

fn default_interval() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub pipeline: PipelineSource,
    /// Overrides the pipeline file's or built-in's capacity.
    #[serde(default)]
    pub capacity: Option<Capacity>,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default = "default_interval")]
    pub interval_s: usize,
    #[serde(default)]
    pub weights: MetricWeights,
    #[serde(default)]
    pub reward: RewardConfig,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub timing: Timing,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub predictor: PredictorConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    /// Directory relative paths resolve against. Set by `load`.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn config_err(path: &Path, field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_path_buf(),
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let message = e.message().trim().to_string();
        let field = e
            .span()
            .map(|s| {
                let line = text[..s.start].lines().count().max(1);
                format!("line {line}")
            })
            .unwrap_or_else(|| "document".into());
        config_err(path, &field, message)
    })
}

impl ExperimentConfig {
    /// A built-in pipeline with every other setting at its default.
    pub fn builtin(pipeline: &str, seed: u64) -> Self {
        Self {
            version: CONFIG_VERSION,
            name: None,
            seed,
            pipeline: PipelineSource {
                builtin: Some(pipeline.to_string()),
                file: None,
            },
            capacity: None,
            trace: TraceConfig::default(),
            interval_s: default_interval(),
            weights: MetricWeights::default(),
            reward: RewardConfig::default(),
            algorithms: default_algorithms(),
            timing: Timing::Wall,
            output_dir: None,
            predictor: PredictorConfig::default(),
            agent: AgentConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = parse_toml(path, &text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let path = Path::new("<inline>");
        let mut cfg: Self = parse_toml(path, text)?;
        cfg.base_dir = PathBuf::from(".");
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks everything that does not need other files. `path` only
    /// labels errors.
    pub fn validate(&self, path: &Path) -> Result<()> {
        let err = |field: &str, msg: String| config_err(path, field, msg);
        if self.version != CONFIG_VERSION {
            return Err(err(
                "version",
                format!("unsupported version {}, expected {CONFIG_VERSION}", self.version),
            ));
        }
        match (&self.pipeline.builtin, &self.pipeline.file) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => {
                return Err(err(
                    "pipeline",
                    "set exactly one of pipeline.builtin and pipeline.file".into(),
                ))
            }
        }
        if let Some(name) = &self.pipeline.builtin {
            bench::builtin(name).map_err(|e| err("pipeline.builtin", e.to_string()))?;
        }
        if let Some(c) = &self.capacity {
            c.validate().map_err(|e| err("capacity", e.to_string()))?;
        }
        if self.interval_s == 0 {
            return Err(err("interval_s", "must be at least 1".into()));
        }
        if self.trace.duration_s < self.interval_s && self.trace.pattern != Pattern::FromFile {
            return Err(err(
                "trace.duration_s",
                format!("{} s is shorter than one interval", self.trace.duration_s),
            ));
        }
        if self.trace.duration_s % self.interval_s != 0 && self.trace.pattern != Pattern::FromFile {
            return Err(err(
                "trace.duration_s",
                format!("must be a multiple of interval_s = {}", self.interval_s),
            ));
        }
        if self.trace.pattern == Pattern::FromFile && self.trace.file.is_none() {
            return Err(err("trace.file", "from_file pattern needs a rate file".into()));
        }
        self.weights.validate().map_err(|e| err("weights", e.to_string()))?;
        self.reward_params()
            .validate()
            .map_err(|e| err("reward", e.to_string()))?;
        if self.algorithms.is_empty() {
            return Err(err("algorithms", "list at least one algorithm".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return Err(err("algorithms", format!("{} listed twice", a.name())));
            }
        }
        self.agent
            .ppo
            .validate()
            .map_err(|e| err("agent.ppo", e.to_string()))?;
        if self.agent.policy.is_none() && self.algorithms.contains(&Algorithm::Opd) {
            if self.agent.episodes == 0 {
                return Err(err("agent.episodes", "must be at least 1 to train".into()));
            }
            if self.agent.train_traces == 0 {
                return Err(err("agent.train_traces", "must be at least 1".into()));
            }
        }
        if self.predictor.kind == ForecasterKind::Lstm
            && self.predictor.model.is_none()
            && self.predictor.train_traces == 0
        {
            return Err(err("predictor.train_traces", "must be at least 1".into()));
        }
        Ok(())
    }

    pub fn reward_params(&self) -> RewardParams {
        RewardParams {
            qos_weights: self.weights,
            cost_weight: self.reward.cost_weight,
            batch_penalty: self.reward.batch_penalty,
            repair_penalty: self.reward.repair_penalty,
            batch_aggregate: self.reward.batch_aggregate,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            interval_s: self.interval_s,
            reward: self.reward_params(),
        }
    }

    /// The pipeline name used in outputs.
    pub fn pipeline_name(&self) -> String {
        match (&self.pipeline.builtin, &self.pipeline.file) {
            (Some(b), _) => b.clone(),
            (None, Some(f)) => f
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "pipeline".into()),
            (None, None) => "pipeline".into(),
        }
    }

    /// Pipeline spec and effective capacity.
    pub fn load_pipeline(&self) -> Result<(PipelineSpec, Capacity)> {
        let (spec, cap) = match (&self.pipeline.builtin, &self.pipeline.file) {
            (Some(name), _) => {
                let b = bench::builtin(name)?;
                (b.spec, Some(b.capacity))
            }
            (None, Some(file)) => {
                let path = self.resolve_path(file);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let pf: PipelineFile = parse_toml(&path, &text)?;
                let mut stages = pf.stages;
                for s in &mut stages {
                    for (i, v) in s.variants.iter_mut().enumerate() {
                        v.id = i;
                    }
                }
                let spec = PipelineSpec::new(stages)
                    .map_err(|e| config_err(&path, "stages", e.to_string()))?;
                (spec, pf.capacity)
            }
            (None, None) => return Err(Error::invalid("no pipeline source")),
        };
        let cap = self.capacity.or(cap).ok_or_else(|| {
            config_err(&self.base_dir, "capacity", "no capacity in the config or pipeline file")
        })?;
        cap.validate()?;
        Ok((spec, cap))
    }
}
