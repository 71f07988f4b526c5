use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::policy::{PolicyArch, PolicyModel};
use crate::error::{Error, Result};
use crate::nn::{clip_grad_norm, entropy, log_softmax, softmax, AdamState, Module};

/// How expert-flagged samples enter the loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpertMode {
    /// Weighted negative log-likelihood of the expert action.
    #[default]
    Imitation,
    /// Treated like any other sample in the clipped ratio term.
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoHyper {
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub discount: f64,
    pub gae_lambda: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub expert_frequency: usize,
    pub imitation_weight: f64,
    pub expert_mode: ExpertMode,
    pub learning_rate: f64,
    pub max_grad_norm: f64,
    /// Rewards are multiplied by this before computing advantages.
    pub reward_scale: f64,
    pub arch: PolicyArch,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            clip_eps: 0.2,
            value_coef: 0.5,
            entropy_coef: 0.01,
            discount: 0.99,
            gae_lambda: 0.95,
            epochs: 4,
            minibatch_size: 64,
            expert_frequency: 4,
            imitation_weight: 1.0,
            expert_mode: ExpertMode::Imitation,
            learning_rate: 3e-4,
            max_grad_norm: 0.5,
            reward_scale: 1.0,
            arch: PolicyArch::default(),
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<()> {
        let coefs = [
            self.value_coef,
            self.entropy_coef,
            self.imitation_weight,
            self.learning_rate,
            self.max_grad_norm,
            self.reward_scale,
        ];
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::invalid("clip epsilon must lie in (0, 1)"));
        }
        if coefs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("PPO coefficients must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&self.discount) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::invalid("discount and gae_lambda must lie in [0, 1]"));
        }
        if self.expert_frequency == 0 || self.epochs == 0 || self.minibatch_size == 0 {
            return Err(Error::invalid(
                "expert frequency, epochs and minibatch size must be at least 1",
            ));
        }
        Ok(())
    }
}

/// One stored transition, ready for an update.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub state: Vec<f64>,
    pub choices: Vec<[usize; 3]>,
    /// Log-probability of `choices` under the policy that was frozen before
    /// this update round.
    pub old_log_prob: f64,
    /// Normalized advantage.
    pub advantage: f64,
    pub value_target: f64,
    pub expert: bool,
}

/// Batch means of each loss component. `clip` and `entropy` are objective
/// terms (larger is better); `value` and `imitation` are losses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub clip: f64,
    pub value: f64,
    pub entropy: f64,
    pub imitation: f64,
    /// The minimized quantity:
    /// `-clip + imitation_weight * imitation + c1 * value - c2 * entropy`.
    pub total: f64,
}

impl LossBreakdown {
    /// The policy part of the loss: `imitation_weight * imitation - clip`.
    pub fn policy(&self, hyper: &PpoHyper) -> f64 {
        hyper.imitation_weight * self.imitation - self.clip
    }
}

pub fn clip_ratio(ratio: f64, eps: f64) -> f64 {
    ratio.clamp(1.0 - eps, 1.0 + eps)
}

/// `min(r * adv, clip(r, 1 - eps, 1 + eps) * adv)`.
pub fn clipped_objective(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(clip_ratio(ratio, eps) * advantage)
}

fn uses_ratio(s: &Sample, hyper: &PpoHyper) -> bool {
    !s.expert || hyper.expert_mode == ExpertMode::Ratio
}

/// Loss over `batch`, with gradients accumulated into `model` when `grad`
/// is set. Every term is averaged over the whole batch.
pub fn ppo_loss(
    model: &mut PolicyModel,
    batch: &[&Sample],
    hyper: &PpoHyper,
    grad: bool,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::invalid("PPO batch is empty"));
    }
    let w = 1.0 / batch.len() as f64;
    let mut out = LossBreakdown::default();
    for s in batch {
        let fwd = model.forward(&s.state)?;
        if fwd.logits.len() != 3 * s.choices.len() {
            return Err(Error::shape("sample choices do not match the policy heads"));
        }
        let mut log_prob = 0.0;
        let mut probs = Vec::with_capacity(fwd.logits.len());
        let mut ent = Vec::with_capacity(fwd.logits.len());
        for (h, l) in fwd.logits.iter().enumerate() {
            let c = s.choices[h / 3][h % 3];
            if c >= l.len() {
                return Err(Error::invalid(format!("choice {c} out of range for head {h}")));
            }
            log_prob += log_softmax(l)[c];
            let p = softmax(l);
            ent.push(entropy(&p));
            probs.push(p);
        }
        let h_sum: f64 = ent.iter().sum();

        // d(loss)/d(log_prob)
        let mut d_logp = 0.0;
        if uses_ratio(s, hyper) {
            let ratio = (log_prob - s.old_log_prob).exp();
            let obj = clipped_objective(ratio, s.advantage, hyper.clip_eps);
            out.clip += w * obj;
            let unclipped = ratio * s.advantage;
            let inside = ratio > 1.0 - hyper.clip_eps && ratio < 1.0 + hyper.clip_eps;
            if unclipped <= clip_ratio(ratio, hyper.clip_eps) * s.advantage || inside {
                d_logp = -w * unclipped;
            }
        } else {
            out.imitation += -w * log_prob;
            d_logp = -w * hyper.imitation_weight;
        }
        let diff = fwd.value - s.value_target;
        out.value += w * diff * diff;
        out.entropy += w * h_sum;

        if grad {
            let d_logits: Vec<Vec<f64>> = probs
                .iter()
                .enumerate()
                .map(|(h, p)| {
                    let c = s.choices[h / 3][h % 3];
                    p.iter()
                        .enumerate()
                        .map(|(j, &pj)| {
                            let onehot = if j == c { 1.0 } else { 0.0 };
                            let lp = if pj > 0.0 { pj.ln() } else { 0.0 };
                            d_logp * (onehot - pj) + w * hyper.entropy_coef * pj * (lp + ent[h])
                        })
                        .collect()
                })
                .collect();
            let d_value = w * hyper.value_coef * 2.0 * diff;
            model.backward(&fwd.cache, &d_logits, d_value);
        }
    }
    out.total = -out.clip + hyper.imitation_weight * out.imitation + hyper.value_coef * out.value
        - hyper.entropy_coef * out.entropy;
    if !out.total.is_finite() {
        return Err(Error::Numeric(format!("PPO loss is not finite: {out:?}")));
    }
    Ok(out)
}

/// `epochs` passes of shuffled minibatches with one Adam step each. Returns
/// the batch means over all minibatches, measured before each step.
pub fn ppo_update<R: Rng + ?Sized>(
    model: &mut PolicyModel,
    adam: &mut AdamState,
    samples: &[Sample],
    hyper: &PpoHyper,
    rng: &mut R,
) -> Result<LossBreakdown> {
    hyper.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("PPO batch is empty"));
    }
    let backup = model.clone();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut sum = LossBreakdown::default();
    let mut count = 0usize;
    for _ in 0..hyper.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(hyper.minibatch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &samples[i]).collect();
            model.zero_grad();
            let l = match ppo_loss(model, &batch, hyper, true) {
                Ok(l) => l,
                Err(e) => {
                    *model = backup;
                    return Err(e);
                }
            };
            let mut params = model.params_mut();
            clip_grad_norm(&mut params, hyper.max_grad_norm);
            if let Err(e) = adam.step(&mut params) {
                *model = backup;
                return Err(e);
            }
            sum.clip += l.clip;
            sum.value += l.value;
            sum.entropy += l.entropy;
            sum.imitation += l.imitation;
            sum.total += l.total;
            count += 1;
        }
    }
    let n = count as f64;
    Ok(LossBreakdown {
        clip: sum.clip / n,
        value: sum.value / n,
        entropy: sum.entropy / n,
        imitation: sum.imitation / n,
        total: sum.total / n,
    })
}
