use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EnvState, FEATURES_PER_STAGE};
use crate::error::{Error, Result};
use crate::nn::{
    argmax, entropy, log_softmax, relu, sample_index, softmax, Linear, Module, Param, ParamFile,
    ResidualBlock, ResidualCache,
};
use crate::pipeline::{ActionSpace, PipelineConfig};

/// Width of the feature extractor and number of residual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyArch {
    pub width: usize,
    pub blocks: usize,
}

impl Default for PolicyArch {
    fn default() -> Self {
        Self {
            width: 64,
            blocks: 2,
        }
    }
}

/// Residual feature extractor with three categorical heads per stage
/// (variant, replicas, batch) and a scalar value head.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub input: Linear,
    pub blocks: Vec<ResidualBlock>,
    /// Stage-major: `heads[3 * n + k]` is head `k` of stage `n`.
    pub heads: Vec<Linear>,
    pub value: Linear,
    head_sizes: Vec<[usize; 3]>,
    arch: PolicyArch,
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    blocks: Vec<ResidualCache>,
    features: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PolicyOutput {
    /// One logit vector per head, stage-major.
    pub logits: Vec<Vec<f64>>,
    pub value: f64,
    pub cache: ForwardCache,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectMode {
    Sample,
    Greedy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub choices: Vec<[usize; 3]>,
    pub action: PipelineConfig,
    /// Sum of the per-head log-probabilities of `choices`.
    pub log_prob: f64,
    pub value: f64,
    pub entropies: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PolicyMeta {
    obs_len: usize,
    head_sizes: Vec<[usize; 3]>,
    arch: PolicyArch,
}

impl PolicyModel {
    pub fn new(head_sizes: Vec<[usize; 3]>, arch: PolicyArch, seed: u64) -> Result<Self> {
        if head_sizes.is_empty() || head_sizes.iter().flatten().any(|&k| k == 0) {
            return Err(Error::invalid("every head needs at least one choice"));
        }
        if arch.width == 0 {
            return Err(Error::invalid("extractor width must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs_len = FEATURES_PER_STAGE * head_sizes.len();
        let input = Linear::new(obs_len, arch.width, &mut rng);
        let blocks = (0..arch.blocks)
            .map(|_| {
                let mut b = ResidualBlock::new(arch.width, &mut rng);
                // start close to the identity
                b.fc2.scale_weights(0.1);
                b
            })
            .collect();
        let heads = head_sizes
            .iter()
            .flatten()
            .map(|&k| {
                let mut h = Linear::new(arch.width, k, &mut rng);
                h.scale_weights(0.01);
                h
            })
            .collect();
        let value = Linear::new(arch.width, 1, &mut rng);
        Ok(Self {
            input,
            blocks,
            heads,
            value,
            head_sizes,
            arch,
        })
    }

    pub fn for_space(space: &ActionSpace, arch: PolicyArch, seed: u64) -> Result<Self> {
        Self::new(space.head_sizes(), arch, seed)
    }

    pub fn head_sizes(&self) -> &[[usize; 3]] {
        &self.head_sizes
    }

    pub fn arch(&self) -> PolicyArch {
        self.arch
    }

    pub fn obs_len(&self) -> usize {
        self.input.input_dim()
    }

    pub fn num_stages(&self) -> usize {
        self.head_sizes.len()
    }

    pub fn forward(&self, state: &[f64]) -> Result<PolicyOutput> {
        if state.len() != self.obs_len() {
            return Err(Error::shape(format!(
                "policy expects a state of length {}, got {}",
                self.obs_len(),
                state.len()
            )));
        }
        let pre = self.input.forward(state)?;
        let mut x = relu(&pre);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (y, c) = b.forward(&x)?;
            caches.push(c);
            x = y;
        }
        let logits = self
            .heads
            .iter()
            .map(|h| h.forward(&x))
            .collect::<Result<Vec<_>>>()?;
        let value = self.value.forward(&x)?[0];
        Ok(PolicyOutput {
            logits,
            value,
            cache: ForwardCache {
                input: state.to_vec(),
                pre,
                blocks: caches,
                features: x,
            },
        })
    }

    /// Accumulates gradients for upstream gradients on every head's logits
    /// and on the value output.
    pub fn backward(&mut self, cache: &ForwardCache, d_logits: &[Vec<f64>], d_value: f64) {
        let mut dx = vec![0.0; self.arch.width];
        for (h, g) in self.heads.iter_mut().zip(d_logits) {
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            let d = h.backward(&cache.features, g);
            dx.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        if d_value != 0.0 {
            let d = self.value.backward(&cache.features, &[d_value]);
            dx.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            dx = b.backward(c, &dx);
        }
        let dpre: Vec<f64> = dx
            .iter()
            .zip(&cache.pre)
            .map(|(g, p)| if *p > 0.0 { *g } else { 0.0 })
            .collect();
        self.input.backward(&cache.input, &dpre);
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = PolicyMeta {
            obs_len: self.obs_len(),
            head_sizes: self.head_sizes.clone(),
            arch: self.arch,
        };
        ParamFile::from_module("policy", serde_json::to_value(meta)?, self).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = ParamFile::load(path)?;
        f.check_header("policy")?;
        let meta: PolicyMeta = serde_json::from_value(f.meta.clone())?;
        let mut m = Self::new(meta.head_sizes, meta.arch, 0)?;
        if m.obs_len() != meta.obs_len {
            return Err(Error::shape("policy file observation length is inconsistent"));
        }
        f.load_into(&mut m)?;
        Ok(m)
    }
}

impl Module for PolicyModel {
    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = Vec::new();
        for (n, p) in self.input.named_params() {
            out.push((format!("input.{n}"), p));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            for (n, p) in b.named_params() {
                out.push((format!("block{i}.{n}"), p));
            }
        }
        for (i, h) in self.heads.iter().enumerate() {
            for (n, p) in h.named_params() {
                out.push((format!("head{}_{}.{n}", i / 3, i % 3), p));
            }
        }
        for (n, p) in self.value.named_params() {
            out.push((format!("value.{n}"), p));
        }
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        for (n, p) in self.input.named_params_mut() {
            out.push((format!("input.{n}"), p));
        }
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (n, p) in b.named_params_mut() {
                out.push((format!("block{i}.{n}"), p));
            }
        }
        for (i, h) in self.heads.iter_mut().enumerate() {
            for (n, p) in h.named_params_mut() {
                out.push((format!("head{}_{}.{n}", i / 3, i % 3), p));
            }
        }
        for (n, p) in self.value.named_params_mut() {
            out.push((format!("value.{n}"), p));
        }
        out
    }
}

/// Joint log-probability of `choices` under the given head logits.
pub fn joint_log_prob(logits: &[Vec<f64>], choices: &[[usize; 3]]) -> Result<f64> {
    if logits.len() != 3 * choices.len() {
        return Err(Error::shape("choice list does not match the policy heads"));
    }
    let mut lp = 0.0;
    for (n, c) in choices.iter().enumerate() {
        for k in 0..3 {
            let l = &logits[3 * n + k];
            if c[k] >= l.len() {
                return Err(Error::invalid(format!("choice {} out of range for head {n}.{k}", c[k])));
            }
            lp += log_softmax(l)[c[k]];
        }
    }
    Ok(lp)
}

pub fn log_prob_of(model: &PolicyModel, state: &EnvState, choices: &[[usize; 3]]) -> Result<f64> {
    joint_log_prob(&model.forward(&state.features)?.logits, choices)
}

pub fn policy_evaluate<R: Rng + ?Sized>(
    model: &PolicyModel,
    space: &ActionSpace,
    state: &EnvState,
    mode: SelectMode,
    rng: &mut R,
) -> Result<Decision> {
    if space.head_sizes() != model.head_sizes {
        return Err(Error::shape("policy heads do not match the action space"));
    }
    let out = model.forward(&state.features)?;
    let mut choices = Vec::with_capacity(model.num_stages());
    let mut entropies = Vec::with_capacity(out.logits.len());
    let mut log_prob = 0.0;
    for n in 0..model.num_stages() {
        let mut c = [0usize; 3];
        for (k, slot) in c.iter_mut().enumerate() {
            let logits = &out.logits[3 * n + k];
            let probs = softmax(logits);
            *slot = match mode {
                SelectMode::Greedy => argmax(&probs),
                SelectMode::Sample => sample_index(&probs, rng),
            };
            log_prob += log_softmax(logits)[*slot];
            entropies.push(entropy(&probs));
        }
        choices.push(c);
    }
    let action = PipelineConfig::new(
        choices
            .iter()
            .enumerate()
            .map(|(n, c)| space.decode(n, *c))
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(Decision {
        choices,
        action,
        log_prob,
        value: out.value,
        entropies,
    })
}
