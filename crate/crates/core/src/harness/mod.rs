//! Experiment configuration, runs, artifacts and comparison reports.

pub mod bench;
mod config;
mod experiment;
mod summary;

pub use config::{
    AgentConfig, Algorithm, ExperimentConfig, ForecasterKind, PipelineFile, PipelineSource,
    PredictorConfig, RewardConfig, Timing, TraceConfig, CONFIG_VERSION,
};
pub use experiment::{
    agent_traces, evaluation_trace, output_dir, predictor_corpus, prepare, run_experiment,
    steps_file, train_agent, train_experiment, write_training_curve, AlgorithmSummary, Prepared,
    RunMetadata, RunOutput, RunSummary, DECISION_TIMES_FILE, POLICY_FILE, PREDICTOR_FILE,
    PREDICTOR_REPORT_FILE, SUMMARY_FILE, TRAINING_CURVE_FILE,
};
pub use summary::{
    compare, decision_time_improvement, format_delta, format_percent, relative_delta, summarize,
    ComparisonReport, DecisionTimeRow, Deltas, ReportRow,
};
