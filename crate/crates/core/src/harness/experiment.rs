//! Runs every configured algorithm over one shared trace and writes the
//! per-step series, decision times, training curve and summary.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{Algorithm, ExperimentConfig, ForecasterKind, Timing};
use crate::agent::{
    run_online, train_opd, ConfigPolicy, CurvePoint, EpisodeReport, GreedyPolicy, OpdPolicy,
    PolicyModel, RandomPolicy, SolverPolicy, TrainOutcome,
};
use crate::env::PipelineEnv;
use crate::error::{Error, Result};
use crate::pipeline::{ActionSpace, Capacity, MetricWeights, PipelineSpec};
use crate::predictor::{
    train_predictor, LoadForecaster, PredictorModel, PredictorReport, RecentPeak,
};
use crate::workload::{generate_trace, Pattern, WorkloadTrace};

pub const SUMMARY_FILE: &str = "summary.json";
pub const DECISION_TIMES_FILE: &str = "decision_times.csv";
pub const TRAINING_CURVE_FILE: &str = "training_curve.csv";
pub const POLICY_FILE: &str = "policy.json";
pub const PREDICTOR_FILE: &str = "predictor.json";
pub const PREDICTOR_REPORT_FILE: &str = "predictor_report.json";

pub fn steps_file(algorithm: &str) -> String {
    format!("{algorithm}_steps.csv")
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Serde(format!("{other:?}")),
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Everything shared by all algorithms of one run.
pub struct Prepared {
    pub pipeline_name: String,
    pub spec: PipelineSpec,
    pub capacity: Capacity,
    pub trace: WorkloadTrace,
    pub forecaster: Box<dyn LoadForecaster>,
    /// Present when the LSTM was trained during preparation.
    pub trained_predictor: Option<(PredictorModel, PredictorReport)>,
}

impl Prepared {
    pub fn env_for(&self, cfg: &ExperimentConfig, trace: WorkloadTrace) -> Result<PipelineEnv> {
        PipelineEnv::new(
            self.spec.clone(),
            self.capacity,
            trace,
            self.forecaster.as_ref(),
            cfg.env_config(),
        )
    }

    pub fn eval_env(&self, cfg: &ExperimentConfig) -> Result<PipelineEnv> {
        self.env_for(cfg, self.trace.clone())
    }
}

fn generated_pattern(cfg: &ExperimentConfig) -> Pattern {
    match cfg.trace.pattern {
        Pattern::FromFile => Pattern::Fluctuating,
        p => p,
    }
}

/// The evaluation trace: seeded by `cfg.seed`, or read from the rate file.
pub fn evaluation_trace(cfg: &ExperimentConfig) -> Result<WorkloadTrace> {
    match (&cfg.trace.file, cfg.trace.pattern) {
        (Some(f), Pattern::FromFile) => WorkloadTrace::from_csv(&cfg.resolve_path(f)),
        (_, p) => generate_trace(p, cfg.trace.duration_s, cfg.seed, &cfg.trace.params),
    }
}

/// Predictor corpus: rotating through fluctuating, low, high and constant
/// patterns with seeds following the experiment seed.
pub fn predictor_corpus(cfg: &ExperimentConfig) -> Result<Vec<WorkloadTrace>> {
    let patterns = [
        Pattern::Fluctuating,
        Pattern::SteadyLow,
        Pattern::SteadyHigh,
        Pattern::Constant,
    ];
    (0..cfg.predictor.train_traces)
        .map(|i| {
            generate_trace(
                patterns[i % patterns.len()],
                cfg.trace.duration_s.max(600),
                cfg.seed.wrapping_add(1 + i as u64),
                &cfg.trace.params,
            )
        })
        .collect()
}

/// Agent training traces, disjoint in seed from the evaluation trace.
pub fn agent_traces(cfg: &ExperimentConfig) -> Result<Vec<WorkloadTrace>> {
    (0..cfg.agent.train_traces)
        .map(|i| {
            generate_trace(
                generated_pattern(cfg),
                cfg.trace.duration_s,
                cfg.seed.wrapping_add(1000 + i as u64),
                &cfg.trace.params,
            )
        })
        .collect()
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let (spec, capacity) = cfg.load_pipeline()?;
    let trace = evaluation_trace(cfg)?;
    let mut trained_predictor = None;
    let forecaster: Box<dyn LoadForecaster> = match cfg.predictor.kind {
        ForecasterKind::RecentPeak => Box::new(RecentPeak::default()),
        ForecasterKind::Lstm => match &cfg.predictor.model {
            Some(p) => Box::new(PredictorModel::load(&cfg.resolve_path(p))?),
            None => {
                let mut hyper = cfg.predictor.train;
                hyper.seed = cfg.seed;
                let (m, rep) = train_predictor(&predictor_corpus(cfg)?, &hyper)?;
                trained_predictor = Some((m.clone(), rep));
                Box::new(m)
            }
        },
    };
    Ok(Prepared {
        pipeline_name: cfg.pipeline_name(),
        spec,
        capacity,
        trace,
        forecaster,
        trained_predictor,
    })
}

/// Trains OPD with the solver as expert on the agent training traces.
pub fn train_agent(cfg: &ExperimentConfig, prepared: &Prepared) -> Result<TrainOutcome> {
    let envs = agent_traces(cfg)?
        .into_iter()
        .map(|t| prepared.env_for(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let mut expert = SolverPolicy::new(&prepared.spec, &prepared.capacity, cfg.weights)?;
    train_opd(&envs, &mut expert, &cfg.agent.ppo, cfg.agent.episodes, cfg.seed)
}

pub fn write_training_curve(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["episode", "mean_reward", "policy_loss", "value_loss", "expert"])?;
    for c in curve {
        w.write_record([
            c.episode.to_string(),
            c.mean_reward.to_string(),
            c.policy_loss.to_string(),
            c.value_loss.to_string(),
            u8::from(c.expert).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub name: String,
    pub seed: u64,
    pub pipeline: String,
    pub stages: usize,
    pub space_size: u128,
    pub trace_pattern: Pattern,
    pub duration_s: usize,
    pub interval_s: usize,
    pub steps: usize,
    pub weights: MetricWeights,
    pub timing: Timing,
}

impl RunMetadata {
    /// Whether two runs used the same pipeline and trace.
    pub fn comparable(&self, other: &Self) -> bool {
        self.seed == other.seed
            && self.pipeline == other.pipeline
            && self.stages == other.stages
            && self.space_size == other.space_size
            && self.trace_pattern == other.trace_pattern
            && self.duration_s == other.duration_s
            && self.interval_s == other.interval_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: String,
    pub steps: usize,
    pub mean_qos: f64,
    pub mean_cost: f64,
    pub mean_objective: f64,
    pub mean_reward: f64,
    pub mean_latency: f64,
    pub mean_throughput: f64,
    pub mean_excess: f64,
    pub repaired_steps: usize,
    /// Cumulative decision time over the episode, in milliseconds.
    pub total_decision_ms: f64,
    pub mean_decision_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub version: u32,
    pub metadata: RunMetadata,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SUMMARY_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn algorithm(&self, name: &str) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == name)
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// One CSV row per step; returns the decision times as written.
fn write_steps(path: &Path, report: &EpisodeReport, stages: usize, timing: Timing) -> Result<Vec<f64>> {
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = [
        "step", "time_s", "demand", "predicted", "qos", "cost", "reward", "latency",
        "throughput", "excess", "objective", "repaired",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for n in 0..stages {
        header.extend([format!("s{n}_variant"), format!("s{n}_replicas"), format!("s{n}_batch")]);
    }
    header.push("decision_time_ms".into());
    w.write_record(&header)?;
    let mut times = Vec::with_capacity(report.steps.len());
    for s in &report.steps {
        let i = &s.info;
        let d = match timing {
            Timing::Wall => ms(s.decision_time),
            Timing::Off => 0.0,
        };
        times.push(d);
        let mut row = vec![
            i.step.to_string(),
            i.time_s.to_string(),
            i.demand.to_string(),
            i.predicted.to_string(),
            i.qos.to_string(),
            i.metrics.cost.to_string(),
            s.reward.to_string(),
            i.metrics.latency.to_string(),
            i.metrics.throughput.to_string(),
            i.metrics.excess_load.to_string(),
            i.objective.to_string(),
            u8::from(i.repaired).to_string(),
        ];
        for c in &i.config.stages {
            row.extend([c.variant.to_string(), c.replicas.to_string(), c.batch.to_string()]);
        }
        row.push(d.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(times)
}

fn summarize_report(report: &EpisodeReport, times: &[f64]) -> AlgorithmSummary {
    let n = report.steps.len().max(1) as f64;
    let mean = |f: &dyn Fn(&crate::agent::StepRecord) -> f64| report.steps.iter().map(f).sum::<f64>() / n;
    let total: f64 = times.iter().sum();
    AlgorithmSummary {
        algorithm: report.algorithm.clone(),
        steps: report.steps.len(),
        mean_qos: mean(&|s| s.info.qos),
        mean_cost: mean(&|s| s.info.metrics.cost),
        mean_objective: mean(&|s| s.info.objective),
        mean_reward: mean(&|s| s.reward),
        mean_latency: mean(&|s| s.info.metrics.latency),
        mean_throughput: mean(&|s| s.info.metrics.throughput),
        mean_excess: mean(&|s| s.info.metrics.excess_load),
        repaired_steps: report.steps.iter().filter(|s| s.info.repaired).count(),
        total_decision_ms: total,
        mean_decision_ms: total / n,
    }
}

/// What a run produced, besides the files.
pub struct RunOutput {
    pub summary: RunSummary,
    pub reports: Vec<EpisodeReport>,
    pub training: Option<TrainOutcome>,
    pub out_dir: PathBuf,
}

/// The output directory: `override_dir`, else the config's, else `runs/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, override_dir: Option<&Path>) -> PathBuf {
    match (override_dir, &cfg.output_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => cfg.resolve_path(d),
        (None, None) => PathBuf::from("runs").join(cfg.name.clone().unwrap_or_else(|| cfg.pipeline_name())),
    }
}

fn make_policy(
    alg: Algorithm,
    cfg: &ExperimentConfig,
    prepared: &Prepared,
    trained: &Option<TrainOutcome>,
) -> Result<Box<dyn ConfigPolicy>> {
    Ok(match alg {
        Algorithm::Random => Box::new(RandomPolicy::new(cfg.seed)),
        Algorithm::Greedy => Box::new(GreedyPolicy::new(&prepared.spec, &prepared.capacity)?),
        Algorithm::Solver => Box::new(SolverPolicy::new(&prepared.spec, &prepared.capacity, cfg.weights)?),
        Algorithm::Opd => {
            let model = match (&cfg.agent.policy, trained) {
                (Some(p), _) => PolicyModel::load(&cfg.resolve_path(p))?,
                (None, Some(t)) => t.model.clone(),
                (None, None) => return Err(Error::State("OPD has neither a policy file nor training".into())),
            };
            Box::new(OpdPolicy::greedy(model))
        }
    })
}

pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let prepared = prepare(cfg)?;
    if let Some((m, rep)) = &prepared.trained_predictor {
        m.save(&out_dir.join(PREDICTOR_FILE))?;
        rep.save(&out_dir.join(PREDICTOR_REPORT_FILE))?;
    }
    let training = if cfg.algorithms.contains(&Algorithm::Opd) && cfg.agent.policy.is_none() {
        let t = train_agent(cfg, &prepared)?;
        write_training_curve(&out_dir.join(TRAINING_CURVE_FILE), &t.curve)?;
        t.model.save(&out_dir.join(POLICY_FILE))?;
        Some(t)
    } else {
        None
    };

    let mut env = prepared.eval_env(cfg)?;
    let stages = prepared.spec.num_stages();
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    let mut time_columns = Vec::new();
    for &alg in &cfg.algorithms {
        let mut policy = make_policy(alg, cfg, &prepared, &training)?;
        let report = run_online(&mut env, policy.as_mut())?;
        let times = write_steps(&out_dir.join(steps_file(alg.name())), &report, stages, cfg.timing)?;
        summaries.push(summarize_report(&report, &times));
        time_columns.push(times);
        reports.push(report);
    }

    let dt_path = out_dir.join(DECISION_TIMES_FILE);
    let mut w = csv_writer(&dt_path)?;
    let mut header = vec!["step".to_string()];
    header.extend(cfg.algorithms.iter().map(|a| format!("{}_ms", a.name())));
    w.write_record(&header)?;
    for t in 0..env.episode_len() {
        let mut row = vec![t.to_string()];
        row.extend(time_columns.iter().map(|c| c.get(t).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(&dt_path, e))?;

    let summary = RunSummary {
        version: super::config::CONFIG_VERSION,
        metadata: RunMetadata {
            name: cfg.name.clone().unwrap_or_else(|| prepared.pipeline_name.clone()),
            seed: cfg.seed,
            pipeline: prepared.pipeline_name.clone(),
            stages,
            space_size: ActionSpace::new(&prepared.spec, &prepared.capacity).size(),
            trace_pattern: prepared.trace.pattern,
            duration_s: prepared.trace.len(),
            interval_s: cfg.interval_s,
            steps: env.episode_len(),
            weights: cfg.weights,
            timing: cfg.timing,
        },
        algorithms: summaries,
    };
    write_json(&out_dir.join(SUMMARY_FILE), &summary)?;
    Ok(RunOutput {
        summary,
        reports,
        training,
        out_dir: out_dir.to_path_buf(),
    })
}

/// Trains the predictor (when configured to) and the agent, and writes
/// their checkpoints and curves to `out_dir`.
pub fn train_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrainOutcome> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let prepared = prepare(cfg)?;
    if let Some((m, rep)) = &prepared.trained_predictor {
        m.save(&out_dir.join(PREDICTOR_FILE))?;
        rep.save(&out_dir.join(PREDICTOR_REPORT_FILE))?;
    }
    let t = train_agent(cfg, &prepared)?;
    write_training_curve(&out_dir.join(TRAINING_CURVE_FILE), &t.curve)?;
    t.model.save(&out_dir.join(POLICY_FILE))?;
    Ok(t)
}
