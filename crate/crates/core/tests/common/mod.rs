//! Independent re-implementations used as test oracles.
#![allow(dead_code)]

use opd::nn::{Module, Param};
use opd::pipeline::{
    Capacity, MetricWeights, ModelVariant, PipelineConfig, PipelineSpec, StageConfig, StageSpec,
};
use rand::Rng;

/// A variant as plain numbers: (accuracy, cost, resource, base, per_item).
pub type Profile = (f64, f64, f64, f64, f64);

pub fn profiles(spec: &PipelineSpec) -> Vec<Vec<Profile>> {
    spec.stages
        .iter()
        .map(|s| {
            s.variants
                .iter()
                .map(|v| {
                    (
                        v.accuracy,
                        v.cost_per_replica,
                        v.resource_per_replica,
                        v.base_latency,
                        v.per_item_latency,
                    )
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct HandMetrics {
    pub accuracy: f64,
    pub cost: f64,
    pub latency: f64,
    pub throughput: f64,
    pub excess: f64,
}

/// Metrics straight from the definitions, one stage at a time.
pub fn hand_metrics(p: &[Vec<Profile>], cfg: &[(usize, usize, usize)], demand: f64) -> HandMetrics {
    let mut accuracy = 0.0;
    let mut cost = 0.0;
    let mut latency = 0.0;
    let mut throughput = f64::INFINITY;
    for (n, &(v, f, b)) in cfg.iter().enumerate() {
        let (acc, c, _, base, per) = p[n][v];
        let l = base + per * b as f64;
        accuracy += acc;
        cost += f as f64 * c;
        latency += l;
        let t = f as f64 * b as f64 / l;
        if t < throughput {
            throughput = t;
        }
    }
    HandMetrics {
        accuracy,
        cost,
        latency,
        throughput,
        excess: demand - throughput,
    }
}

pub fn hand_qos(m: &HandMetrics, w: &MetricWeights) -> f64 {
    if m.excess >= 0.0 {
        w.alpha * m.accuracy + w.beta_q * m.throughput - m.latency - w.gamma_q * m.excess
    } else {
        w.alpha * m.accuracy + w.beta_q * m.throughput - m.latency - w.delta_q * (-m.excess)
    }
}

pub fn hand_objective(m: &HandMetrics, w: &MetricWeights) -> f64 {
    hand_qos(m, w) - w.lambda_obj * m.cost
}

pub fn hand_feasible(p: &[Vec<Profile>], cfg: &[(usize, usize, usize)], cap: &Capacity) -> bool {
    let mut used = 0.0;
    for (n, &(v, f, b)) in cfg.iter().enumerate() {
        if v >= p[n].len() || f < 1 || f > cap.f_max || b < 1 || b > cap.b_max {
            return false;
        }
        used += p[n][v].2 * f as f64;
    }
    used <= cap.w_max
}

/// Every (variant, replicas, batch) tuple per stage with batch in
/// `1..=b_max`, in lexicographic order.
pub fn all_tuples(p: &[Vec<Profile>], cap: &Capacity) -> Vec<Vec<(usize, usize, usize)>> {
    let mut out: Vec<Vec<(usize, usize, usize)>> = vec![vec![]];
    for stage in p {
        let mut next = Vec::new();
        for prefix in &out {
            for v in 0..stage.len() {
                for f in 1..=cap.f_max {
                    for b in 1..=cap.b_max {
                        let mut c = prefix.clone();
                        c.push((v, f, b));
                        next.push(c);
                    }
                }
            }
        }
        out = next;
    }
    out
}

/// First strict maximum of the objective over feasible tuples.
pub fn brute_force_best(
    p: &[Vec<Profile>],
    cap: &Capacity,
    demand: f64,
    w: &MetricWeights,
) -> Option<(Vec<(usize, usize, usize)>, f64, u64)> {
    let mut best: Option<(Vec<(usize, usize, usize)>, f64)> = None;
    let mut feasible = 0u64;
    for c in all_tuples(p, cap) {
        if !hand_feasible(p, &c, cap) {
            continue;
        }
        feasible += 1;
        let score = hand_objective(&hand_metrics(p, &c, demand), w);
        if best.as_ref().map_or(true, |(_, b)| score > *b) {
            best = Some((c, score));
        }
    }
    best.map(|(c, s)| (c, s, feasible))
}

pub fn to_config(c: &[(usize, usize, usize)]) -> PipelineConfig {
    PipelineConfig::new(c.iter().map(|&(v, f, b)| StageConfig::new(v, f, b)).collect())
}

pub fn random_variant<R: Rng>(rng: &mut R) -> ModelVariant {
    ModelVariant::new(
        0,
        rng.gen_range(0.3..1.0),
        rng.gen_range(0.25..3.0),
        rng.gen_range(0.25..3.0),
        rng.gen_range(0.001..0.08),
        rng.gen_range(0.0005..0.02),
    )
}

/// Random pipeline with the given variant count per stage. With
/// `duplicate`, the last variant of each multi-variant stage copies the
/// first, which creates exact objective ties.
pub fn random_spec<R: Rng>(rng: &mut R, variants: &[usize], duplicate: bool) -> PipelineSpec {
    PipelineSpec::new(
        variants
            .iter()
            .enumerate()
            .map(|(n, &k)| {
                let mut vs: Vec<ModelVariant> = (0..k).map(|_| random_variant(rng)).collect();
                if duplicate && k > 1 {
                    vs[k - 1] = vs[0].clone();
                }
                StageSpec::new(format!("s{n}"), vs)
            })
            .collect(),
    )
    .expect("random spec is valid")
}

pub fn random_weights<R: Rng>(rng: &mut R) -> MetricWeights {
    MetricWeights {
        alpha: rng.gen_range(0.0..2.0),
        beta_q: rng.gen_range(0.0..0.05),
        gamma_q: rng.gen_range(0.0..0.3),
        delta_q: rng.gen_range(0.0..0.1),
        lambda_obj: rng.gen_range(0.0..0.5),
    }
}

/// Worst relative error between analytic gradients and central
/// differences, over every scalar parameter of `model`.
///
/// `loss` evaluates the scalar loss; `grads` must zero the gradients and
/// accumulate d(loss)/d(param) for the current values.
pub fn param_fd_error<M, L, G>(model: &mut M, loss: L, mut grads: G, h: f64) -> f64
where
    M: Module + Clone,
    L: Fn(&M) -> f64,
    G: FnMut(&mut M),
{
    grads(model);
    let analytic: Vec<Vec<f64>> = model.named_params().iter().map(|(_, p)| p.grad.clone()).collect();
    let mut worst: f64 = 0.0;
    let count = analytic.len();
    for pi in 0..count {
        let len = analytic[pi].len();
        for k in 0..len {
            let shifted = |delta: f64| {
                let mut m = model.clone();
                let p: &mut Param = m.named_params_mut().into_iter().nth(pi).unwrap().1;
                p.value[k] += delta;
                loss(&m)
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            worst = worst.max(rel_err(analytic[pi][k], fd));
        }
    }
    worst
}

/// `|a - b| / max(|a|, |b|, 1e-4)`: relative for ordinary magnitudes,
/// absolute for gradients near zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

/// Worst relative error of an input gradient.
pub fn input_fd_error<L: Fn(&[f64]) -> f64>(x: &[f64], dx: &[f64], loss: L, h: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut xp = x.to_vec();
        xp[i] += h;
        let mut xm = x.to_vec();
        xm[i] -= h;
        let fd = (loss(&xp) - loss(&xm)) / (2.0 * h);
        worst = worst.max(rel_err(dx[i], fd));
    }
    worst
}

pub mod grad;
