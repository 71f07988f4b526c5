use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gae::{compute_advantages, normalize};
use super::online::ConfigPolicy;
use super::policy::{log_prob_of, policy_evaluate, PolicyModel, SelectMode};
use super::ppo::{ppo_update, PpoHyper, Sample};
use crate::env::PipelineEnv;
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Module};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub expert: bool,
    /// Mean unscaled environment reward over the episode.
    pub mean_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PolicyModel,
    pub curve: Vec<CurvePoint>,
    /// Expert steps where the expert failed and the policy acted instead.
    pub expert_fallbacks: usize,
    pub elapsed: Duration,
}

impl TrainOutcome {
    /// Curve points of episodes driven by the learned policy.
    pub fn policy_curve(&self) -> Vec<CurvePoint> {
        self.curve.iter().filter(|c| !c.expert).copied().collect()
    }
}

/// Whether 1-based episode `episode + 1` is an expert episode.
pub fn is_expert_episode(episode: usize, frequency: usize) -> bool {
    (episode + 1) % frequency.max(1) == 0
}

/// PPO with periodic expert episodes. Episode `k` runs on
/// `envs[k % envs.len()]`; one update follows every episode and its
/// transitions are then discarded.
pub fn train_opd(
    envs: &[PipelineEnv],
    expert: &mut dyn ConfigPolicy,
    hyper: &PpoHyper,
    episodes: usize,
    seed: u64,
) -> Result<TrainOutcome> {
    hyper.validate()?;
    if episodes == 0 {
        return Err(Error::invalid("training needs at least one episode"));
    }
    let first = envs
        .first()
        .ok_or_else(|| Error::invalid("training needs at least one environment"))?;
    if envs.iter().any(|e| e.space().head_sizes() != first.space().head_sizes()) {
        return Err(Error::shape("all training environments must share one action space"));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = PolicyModel::for_space(first.space(), hyper.arch, seed)?;
    let mut adam = AdamState::new(AdamConfig::with_lr(hyper.learning_rate), &model.params_mut());
    let mut curve = Vec::with_capacity(episodes);
    let mut fallbacks = 0;

    for ep in 0..episodes {
        let mut env = envs[ep % envs.len()].clone();
        let expert_ep = is_expert_episode(ep, hyper.expert_frequency);
        let mut state = env.reset()?;
        let mut states = Vec::new();
        let mut choices = Vec::new();
        let mut old_lp = Vec::new();
        let mut values = Vec::new();
        let mut rewards = Vec::new();
        let mut flags = Vec::new();
        while !env.is_done() {
            let d = policy_evaluate(&model, env.space(), &state, SelectMode::Sample, &mut rng)?;
            let mut action = d.action.clone();
            let mut ch = d.choices.clone();
            let mut lp = d.log_prob;
            let mut flag = false;
            if expert_ep {
                let guided = expert
                    .decide(&env)
                    .ok()
                    .and_then(|a| env.space().encode_config(&a).map(|c| (a, c)));
                match guided {
                    Some((a, c)) => {
                        lp = log_prob_of(&model, &state, &c)?;
                        action = a;
                        ch = c;
                        flag = true;
                    }
                    None => fallbacks += 1,
                }
            }
            let out = env.step(&action)?;
            states.push(state.features);
            choices.push(ch);
            old_lp.push(lp);
            values.push(d.value);
            rewards.push(out.reward);
            flags.push(flag);
            state = out.state;
        }
        // the trace ends by time limit, so bootstrap from the last state
        values.push(model.forward(&state.features)?.value);
        let scaled: Vec<f64> = rewards.iter().map(|r| r * hyper.reward_scale).collect();
        let adv = compute_advantages(&scaled, &values, hyper.discount, hyper.gae_lambda)?;
        let norm = normalize(&adv.raw);
        let samples: Vec<Sample> = states
            .into_iter()
            .enumerate()
            .map(|(t, s)| Sample {
                state: s,
                choices: std::mem::take(&mut choices[t]),
                old_log_prob: old_lp[t],
                advantage: norm[t],
                value_target: adv.targets[t],
                expert: flags[t],
            })
            .collect();
        let loss = ppo_update(&mut model, &mut adam, &samples, hyper, &mut rng)?;
        curve.push(CurvePoint {
            episode: ep,
            expert: expert_ep,
            mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
            policy_loss: loss.policy(hyper),
            value_loss: loss.value,
            entropy: loss.entropy,
        });
    }
    Ok(TrainOutcome {
        model,
        curve,
        expert_fallbacks: fallbacks,
        elapsed: start.elapsed(),
    })
}
