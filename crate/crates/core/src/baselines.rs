//! Comparison policies: uniform random, cost-greedy and exhaustive search.

use std::cmp::Ordering;
use std::time::{Duration, Instant};

use rand::Rng;

use crate::error::{Error, Result};
use crate::pipeline::space::{for_each_feasible, option_tables, StageOption};
use crate::pipeline::{
    objective, qos, ActionSpace, Capacity, MetricWeights, PipelineConfig, PipelineMetrics,
    PipelineSpec,
};

/// Draws each stage's variant, replica count and batch uniformly from the
/// grid. The result may overrun the resource budget.
pub fn random_policy<R: Rng + ?Sized>(space: &ActionSpace, rng: &mut R) -> PipelineConfig {
    PipelineConfig::new(
        space
            .stages
            .iter()
            .map(|s| crate::pipeline::StageConfig {
                variant: rng.gen_range(0..s.variants),
                replicas: s.replicas[rng.gen_range(0..s.replicas.len())],
                batch: s.batches[rng.gen_range(0..s.batches.len())],
            })
            .collect(),
    )
}

/// Exhaustive enumeration over a fixed pipeline and capacity.
#[derive(Debug, Clone)]
pub struct Solver {
    tables: Vec<Vec<StageOption>>,
    w_max: f64,
    space_size: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub config: PipelineConfig,
    pub objective: f64,
    /// Feasible configurations scored.
    pub evaluated: u64,
    pub elapsed: Duration,
}

impl Solver {
    pub fn new(spec: &PipelineSpec, capacity: &Capacity) -> Result<Self> {
        spec.validate()?;
        capacity.validate()?;
        let space = ActionSpace::new(spec, capacity);
        Ok(Self {
            tables: option_tables(spec, &space)?,
            w_max: capacity.w_max,
            space_size: space.size(),
        })
    }

    pub fn space_size(&self) -> u128 {
        self.space_size
    }

    fn config_of(&self, idx: &[usize]) -> PipelineConfig {
        PipelineConfig::new(
            idx.iter()
                .enumerate()
                .map(|(n, &i)| self.tables[n][i].config)
                .collect(),
        )
    }

    /// Maximises `objective(qos(...), cost)` at `demand`; the first maximum
    /// in (stage, variant, replicas, batch) order wins.
    pub fn solve(&self, demand: f64, weights: &MetricWeights) -> Result<SolverOutcome> {
        if !(demand >= 0.0) || !demand.is_finite() {
            return Err(Error::invalid(format!("demand {demand} must be finite and >= 0")));
        }
        weights.validate()?;
        let start = Instant::now();
        let mut best: Option<(f64, Vec<usize>)> = None;
        let mut evaluated = 0u64;
        for_each_feasible(&self.tables, self.w_max, |idx, t| {
            evaluated += 1;
            let m = PipelineMetrics {
                accuracy_sum: t.accuracy,
                cost: t.cost,
                latency: t.latency,
                throughput: t.throughput,
                excess_load: demand - t.throughput,
            };
            let score = objective(qos(&m, weights), m.cost, weights);
            match &mut best {
                Some((b, bi)) => {
                    if score > *b {
                        *b = score;
                        bi.copy_from_slice(idx);
                    }
                }
                None => best = Some((score, idx.to_vec())),
            }
        });
        let elapsed = start.elapsed();
        let (objective, idx) = best.ok_or_else(|| {
            Error::Infeasible("no configuration satisfies the resource budget".into())
        })?;
        Ok(SolverOutcome {
            config: self.config_of(&idx),
            objective,
            evaluated,
            elapsed,
        })
    }

    /// Minimum-cost feasible configuration; ties prefer higher throughput,
    /// then lower variant indices, then smaller batches.
    pub fn cheapest(&self) -> Result<PipelineConfig> {
        struct Best {
            cost: f64,
            throughput: f64,
            idx: Vec<usize>,
        }
        let mut best: Option<Best> = None;
        let tables = &self.tables;
        let key = |idx: &[usize]| -> (Vec<usize>, Vec<usize>) {
            let cfgs = idx.iter().enumerate().map(|(n, &i)| tables[n][i].config);
            (cfgs.clone().map(|c| c.variant).collect(), cfgs.map(|c| c.batch).collect())
        };
        for_each_feasible(tables, self.w_max, |idx, t| {
            let better = match &best {
                None => true,
                Some(b) => match t.cost.partial_cmp(&b.cost) {
                    Some(Ordering::Less) => true,
                    Some(Ordering::Greater) | None => false,
                    Some(Ordering::Equal) => match t.throughput.partial_cmp(&b.throughput) {
                        Some(Ordering::Greater) => true,
                        Some(Ordering::Less) | None => false,
                        Some(Ordering::Equal) => key(idx) < key(&b.idx),
                    },
                },
            };
            if better {
                best = Some(Best {
                    cost: t.cost,
                    throughput: t.throughput,
                    idx: idx.to_vec(),
                });
            }
        });
        best.map(|b| self.config_of(&b.idx))
            .ok_or_else(|| Error::Infeasible("no configuration satisfies the resource budget".into()))
    }
}

pub fn greedy_policy(spec: &PipelineSpec, capacity: &Capacity) -> Result<PipelineConfig> {
    Solver::new(spec, capacity)?.cheapest()
}

pub fn solver_policy(
    spec: &PipelineSpec,
    capacity: &Capacity,
    demand: f64,
    weights: &MetricWeights,
) -> Result<SolverOutcome> {
    let start = Instant::now();
    let mut out = Solver::new(spec, capacity)?.solve(demand, weights)?;
    out.elapsed = start.elapsed();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{check_feasible, pipeline_metrics, ModelVariant, StageConfig, StageSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_by_two(costs: [f64; 2]) -> PipelineSpec {
        let stage = |name: &str| {
            StageSpec::new(
                name,
                vec![
                    ModelVariant::new(0, 0.9, costs[1], costs[1], 0.02, 0.01),
                    ModelVariant::new(1, 0.7, costs[0], costs[0], 0.02, 0.01),
                ],
            )
        };
        PipelineSpec::new(vec![stage("a"), stage("b")]).unwrap()
    }

    /// Every grid point of the space, in lexicographic order.
    fn all_configs(spec: &PipelineSpec, cap: &Capacity) -> Vec<PipelineConfig> {
        let space = ActionSpace::new(spec, cap);
        let mut out = vec![vec![]];
        for s in &space.stages {
            let mut next = Vec::new();
            for prefix in &out {
                for v in 0..s.variants {
                    for &r in &s.replicas {
                        for &b in &s.batches {
                            let mut p: Vec<StageConfig> = prefix.clone();
                            p.push(StageConfig::new(v, r, b));
                            next.push(p);
                        }
                    }
                }
            }
            out = next;
        }
        out.into_iter().map(PipelineConfig::new).collect()
    }

    #[test]
    fn random_draws_stay_on_grid_and_are_uniform() {
        let spec = two_by_two([0.5, 1.0]);
        let cap = Capacity::new(3, 8, 10.0);
        let space = ActionSpace::new(&spec, &cap);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut v0 = 0usize;
        for _ in 0..10_000 {
            let a = random_policy(&space, &mut rng);
            assert!(space.contains(&a));
            if a.stages[0].variant == 0 {
                v0 += 1;
            }
        }
        let frac = v0 as f64 / 10_000.0;
        assert!((0.49..=0.51).contains(&frac), "{frac}");

        let mut r1 = ChaCha8Rng::seed_from_u64(4);
        let mut r2 = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            assert_eq!(random_policy(&space, &mut r1), random_policy(&space, &mut r2));
        }
    }

    #[test]
    fn greedy_picks_cheapest_variants() {
        let spec = two_by_two([0.5, 1.0]);
        let cap = Capacity::new(2, 2, 10.0);
        let g = greedy_policy(&spec, &cap).unwrap();
        // cheapest variants at one replica; throughput tie-break prefers batch 2
        assert_eq!(g.stages, vec![StageConfig::new(1, 1, 2); 2]);
        let g_cost = pipeline_metrics(&spec, &g, 0.0).unwrap().cost;
        for c in all_configs(&spec, &cap) {
            if check_feasible(&spec, &c, &cap).unwrap().is_ok() {
                assert!(g_cost <= pipeline_metrics(&spec, &c, 0.0).unwrap().cost);
            }
        }
    }

    #[test]
    fn greedy_singleton() {
        let spec = PipelineSpec::new(vec![StageSpec::new(
            "only",
            vec![ModelVariant::new(0, 0.5, 1.0, 1.0, 0.01, 0.0)],
        )])
        .unwrap();
        let g = greedy_policy(&spec, &Capacity::new(1, 1, 1.0)).unwrap();
        assert_eq!(g.stages, vec![StageConfig::new(0, 1, 1)]);
    }

    #[test]
    fn greedy_equal_cost_prefers_throughput() {
        let spec = PipelineSpec::new(vec![StageSpec::new(
            "s",
            vec![
                ModelVariant::new(0, 0.9, 1.0, 1.0, 0.05, 0.01),
                ModelVariant::new(1, 0.6, 1.0, 1.0, 0.01, 0.01),
            ],
        )])
        .unwrap();
        let g = greedy_policy(&spec, &Capacity::new(2, 1, 4.0)).unwrap();
        assert_eq!(g.stages, vec![StageConfig::new(1, 1, 1)]);
    }

    #[test]
    fn infeasible_space() {
        let spec = two_by_two([5.0, 6.0]);
        let cap = Capacity::new(2, 2, 1.0);
        assert!(matches!(greedy_policy(&spec, &cap), Err(Error::Infeasible(_))));
        assert!(matches!(
            solver_policy(&spec, &cap, 10.0, &MetricWeights::default()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn solver_matches_hand_enumeration() {
        let spec = PipelineSpec::new(vec![StageSpec::new(
            "s",
            vec![
                ModelVariant::new(0, 0.6, 0.5, 0.5, 0.01, 0.01),
                ModelVariant::new(1, 0.9, 1.5, 1.5, 0.03, 0.02),
            ],
        )])
        .unwrap();
        let cap = Capacity::new(2, 2, 10.0);
        let w = MetricWeights::default();
        let configs = all_configs(&spec, &cap);
        assert_eq!(configs.len(), 8);
        let mut best: Option<(f64, &PipelineConfig)> = None;
        for c in &configs {
            let m = pipeline_metrics(&spec, c, 40.0).unwrap();
            let o = objective(qos(&m, &w), m.cost, &w);
            if best.map_or(true, |(b, _)| o > b) {
                best = Some((o, c));
            }
        }
        let out = solver_policy(&spec, &cap, 40.0, &w).unwrap();
        assert_eq!(&out.config, best.unwrap().1);
        assert_eq!(out.objective, best.unwrap().0);
        assert_eq!(out.evaluated, 8);
    }

    #[test]
    fn huge_cost_weight_reduces_to_greedy() {
        let spec = PipelineSpec::new(vec![
            StageSpec::new(
                "a",
                vec![
                    ModelVariant::new(0, 0.9, 2.0, 2.0, 0.03, 0.01),
                    ModelVariant::new(1, 0.6, 0.5, 0.5, 0.01, 0.004),
                ],
            ),
            StageSpec::new(
                "b",
                vec![
                    ModelVariant::new(0, 0.8, 1.0, 1.0, 0.02, 0.01),
                    ModelVariant::new(1, 0.85, 1.2, 1.2, 0.02, 0.005),
                ],
            ),
        ])
        .unwrap();
        let cap = Capacity::new(3, 4, 6.0);
        let w = MetricWeights {
            lambda_obj: 1e6,
            ..Default::default()
        };
        let s = solver_policy(&spec, &cap, 50.0, &w).unwrap();
        let g = greedy_policy(&spec, &cap).unwrap();
        let cost = |c: &PipelineConfig| pipeline_metrics(&spec, c, 0.0).unwrap().cost;
        assert_eq!(cost(&s.config), cost(&g));
        assert_eq!(s.config.stages.iter().map(|c| (c.variant, c.replicas)).collect::<Vec<_>>(),
                   g.stages.iter().map(|c| (c.variant, c.replicas)).collect::<Vec<_>>());
    }

    #[test]
    fn free_slack_picks_most_accurate() {
        let spec = two_by_two([0.5, 1.0]);
        let cap = Capacity::new(2, 2, 10.0);
        let w = MetricWeights {
            alpha: 10.0,
            beta_q: 0.0,
            gamma_q: 0.0,
            delta_q: 0.0,
            lambda_obj: 0.0,
        };
        let s = solver_policy(&spec, &cap, 0.0, &w).unwrap();
        assert!(s.config.stages.iter().all(|c| c.variant == 0));
    }
}
