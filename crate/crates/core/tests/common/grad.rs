//! Finite-difference checks for each differentiable building block.

use opd::agent::{joint_log_prob, ppo_loss, PolicyArch, PolicyModel, PpoHyper, Sample};
use opd::nn::{Linear, Lstm, Module, ResidualBlock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{input_fd_error, param_fd_error};

const H: f64 = 1e-6;

fn vec_in<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// `sum(c * y^2 / 2 + d * y)`, so gradients differ per output.
fn probe_loss(y: &[f64], c: &[f64], d: &[f64]) -> (f64, Vec<f64>) {
    let l = y.iter().zip(c).zip(d).map(|((y, c), d)| 0.5 * c * y * y + d * y).sum();
    let g = y.iter().zip(c).zip(d).map(|((y, c), d)| c * y + d).collect();
    (l, g)
}

pub fn linear_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Linear::new(5, 4, &mut rng);
    m.bias.value = vec_in(&mut rng, 4);
    let x = vec_in(&mut rng, 5);
    let (c, d) = (vec_in(&mut rng, 4), vec_in(&mut rng, 4));
    let loss = |m: &Linear, x: &[f64]| probe_loss(&m.forward(x).unwrap(), &c, &d).0;
    let mut dx = Vec::new();
    let p = param_fd_error(
        &mut m,
        |m| loss(m, &x),
        |m| {
            m.zero_grad();
            let (_, g) = probe_loss(&m.forward(&x).unwrap(), &c, &d);
            dx = m.backward(&x, &g);
        },
        H,
    );
    p.max(input_fd_error(&x, &dx, |xs| loss(&m, xs), H))
}

pub fn residual_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = ResidualBlock::new(6, &mut rng);
    m.fc1.bias.value = vec_in(&mut rng, 6);
    m.fc2.bias.value = vec_in(&mut rng, 6);
    let x = vec_in(&mut rng, 6);
    let (c, d) = (vec_in(&mut rng, 6), vec_in(&mut rng, 6));
    let loss = |m: &ResidualBlock, x: &[f64]| probe_loss(&m.forward(x).unwrap().0, &c, &d).0;
    let mut dx = Vec::new();
    let p = param_fd_error(
        &mut m,
        |m| loss(m, &x),
        |m| {
            m.zero_grad();
            let (y, cache) = m.forward(&x).unwrap();
            let (_, g) = probe_loss(&y, &c, &d);
            dx = m.backward(&cache, &g);
        },
        H,
    );
    p.max(input_fd_error(&x, &dx, |xs| loss(&m, xs), H))
}

pub fn lstm_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Lstm::new(2, 4, &mut rng);
    m.bias.value = vec_in(&mut rng, 16);
    let x = vec_in(&mut rng, 2 * 7);
    let (c, d) = (vec_in(&mut rng, 4), vec_in(&mut rng, 4));
    let loss = |m: &Lstm, x: &[f64]| probe_loss(&m.forward(x).unwrap().0, &c, &d).0;
    let mut dx = Vec::new();
    let p = param_fd_error(
        &mut m,
        |m| loss(m, &x),
        |m| {
            m.zero_grad();
            let (h, cache) = m.forward(&x).unwrap();
            let (_, g) = probe_loss(&h, &c, &d);
            dx = m.backward(&cache, &g);
        },
        H,
    );
    p.max(input_fd_error(&x, &dx, |xs| loss(&m, xs), H))
}

/// Two-sample batch over the full policy network. One sample always sits
/// inside the clip range; the other is an expert sample on even seeds and
/// a ratio outside the clip range on odd seeds.
pub fn ppo_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let heads = vec![[3, 2, 2], [2, 3, 2]];
    let mut model = PolicyModel::new(heads.clone(), PolicyArch { width: 8, blocks: 2 }, seed).unwrap();
    for h in &mut model.heads {
        h.scale_weights(50.0);
    }
    let hyper = PpoHyper::default();
    let mut samples = Vec::new();
    for k in 0..2 {
        let state = vec_in(&mut rng, 18);
        let choices: Vec<[usize; 3]> = heads
            .iter()
            .map(|h| [rng.gen_range(0..h[0]), rng.gen_range(0..h[1]), rng.gen_range(0..h[2])])
            .collect();
        let lp = joint_log_prob(&model.forward(&state).unwrap().logits, &choices).unwrap();
        let advantage = rng.gen_range(-1.5..1.5);
        let (offset, expert) = match (k, seed % 2) {
            (0, _) => (rng.gen_range(-0.1..0.1), false),
            (_, 0) => (0.0, true),
            _ => (-0.5, false),
        };
        samples.push(Sample {
            state,
            choices,
            old_log_prob: lp + offset,
            advantage,
            value_target: rng.gen_range(-2.0..2.0),
            expert,
        });
    }
    let batch: Vec<&Sample> = samples.iter().collect();
    param_fd_error(
        &mut model,
        |m| ppo_loss(&mut m.clone(), &batch, &hyper, false).unwrap().total,
        |m| {
            m.zero_grad();
            ppo_loss(m, &batch, &hyper, true).unwrap();
        },
        H,
    )
}
