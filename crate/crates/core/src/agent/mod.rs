//! The learning agent: policy network, advantage estimation, clipped PPO
//! updates with expert episodes, and the online decision loop.

mod gae;
mod online;
mod policy;
mod ppo;
mod train;

pub use gae::{compute_advantages, normalize, Advantages};
pub use online::{
    run_online, ConfigPolicy, EpisodeReport, GreedyPolicy, OpdPolicy, RandomPolicy, SolverPolicy,
    StepRecord,
};
pub use policy::{
    joint_log_prob, log_prob_of, policy_evaluate, Decision, ForwardCache, PolicyArch, PolicyModel,
    PolicyOutput, SelectMode,
};
pub use ppo::{
    clip_ratio, clipped_objective, ppo_loss, ppo_update, ExpertMode, LossBreakdown, PpoHyper, Sample,
};
pub use train::{is_expert_episode, train_opd, CurvePoint, TrainOutcome};
