use super::{stage_latency, stage_throughput, Capacity, PipelineConfig, PipelineSpec, StageConfig};
use crate::error::{Error, Result};

/// Enumerated choices for one stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageChoices {
    pub variants: usize,
    pub replicas: Vec<usize>,
    pub batches: Vec<usize>,
}

impl StageChoices {
    pub fn len(&self) -> usize {
        self.variants * self.replicas.len() * self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The discrete per-stage action space derived from a pipeline and its
/// capacity bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSpace {
    pub stages: Vec<StageChoices>,
}

impl ActionSpace {
    pub fn new(spec: &PipelineSpec, capacity: &Capacity) -> Self {
        let replicas: Vec<usize> = (1..=capacity.f_max).collect();
        let batches = capacity.batch_choices();
        Self {
            stages: spec
                .stages
                .iter()
                .map(|s| StageChoices {
                    variants: s.variants.len(),
                    replicas: replicas.clone(),
                    batches: batches.clone(),
                })
                .collect(),
        }
    }

    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    /// Number of joint configurations, ignoring the resource constraint.
    pub fn size(&self) -> u128 {
        self.stages.iter().map(|s| s.len() as u128).product()
    }

    /// Head cardinalities `[variants, replica choices, batch choices]` per stage.
    pub fn head_sizes(&self) -> Vec<[usize; 3]> {
        self.stages
            .iter()
            .map(|s| [s.variants, s.replicas.len(), s.batches.len()])
            .collect()
    }

    pub fn decode(&self, stage: usize, idx: [usize; 3]) -> Result<StageConfig> {
        let s = self
            .stages
            .get(stage)
            .ok_or_else(|| Error::shape(format!("stage {stage} out of range")))?;
        if idx[0] >= s.variants || idx[1] >= s.replicas.len() || idx[2] >= s.batches.len() {
            return Err(Error::invalid(format!("choice {idx:?} out of range at stage {stage}")));
        }
        Ok(StageConfig::new(idx[0], s.replicas[idx[1]], s.batches[idx[2]]))
    }

    /// Inverse of [`decode`](Self::decode); `None` when the config is not on the grid.
    pub fn encode(&self, stage: usize, cfg: &StageConfig) -> Option<[usize; 3]> {
        let s = self.stages.get(stage)?;
        if cfg.variant >= s.variants {
            return None;
        }
        let r = s.replicas.iter().position(|&r| r == cfg.replicas)?;
        let b = s.batches.iter().position(|&b| b == cfg.batch)?;
        Some([cfg.variant, r, b])
    }

    pub fn encode_config(&self, config: &PipelineConfig) -> Option<Vec<[usize; 3]>> {
        if config.stages.len() != self.stages.len() {
            return None;
        }
        config
            .stages
            .iter()
            .enumerate()
            .map(|(n, c)| self.encode(n, c))
            .collect()
    }

    pub fn contains(&self, config: &PipelineConfig) -> bool {
        self.encode_config(config).is_some()
    }
}

/// Precomputed per-option quantities for fast enumeration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StageOption {
    pub config: StageConfig,
    pub accuracy: f64,
    pub cost: f64,
    pub resource: f64,
    pub latency: f64,
    pub throughput: f64,
}

/// Running totals over a prefix of stages, accumulated in stage order so
/// they match [`pipeline_metrics`](super::pipeline_metrics) bit for bit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Totals {
    pub accuracy: f64,
    pub cost: f64,
    pub resource: f64,
    pub latency: f64,
    pub throughput: f64,
}

impl Totals {
    const ZERO: Totals = Totals {
        accuracy: 0.0,
        cost: 0.0,
        resource: 0.0,
        latency: 0.0,
        throughput: f64::INFINITY,
    };

    fn add(&self, o: &StageOption) -> Totals {
        Totals {
            accuracy: self.accuracy + o.accuracy,
            cost: self.cost + o.cost,
            resource: self.resource + o.resource,
            latency: self.latency + o.latency,
            throughput: self.throughput.min(o.throughput),
        }
    }
}

pub(crate) fn option_tables(
    spec: &PipelineSpec,
    space: &ActionSpace,
) -> Result<Vec<Vec<StageOption>>> {
    spec.stages
        .iter()
        .zip(&space.stages)
        .map(|(stage, choices)| {
            let mut out = Vec::with_capacity(choices.len());
            for v in &stage.variants {
                for &r in &choices.replicas {
                    for &b in &choices.batches {
                        out.push(StageOption {
                            config: StageConfig::new(v.id, r, b),
                            accuracy: v.accuracy,
                            cost: r as f64 * v.cost_per_replica,
                            resource: v.resource_per_replica * r as f64,
                            latency: stage_latency(v, b)?,
                            throughput: stage_throughput(v, b, r)?,
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect()
}

/// Visits every configuration satisfying the resource bound in
/// lexicographic (stage, variant, replicas, batch) order.
///
/// Subtrees are skipped only when they cannot contain a feasible leaf; the
/// leaf test itself is the exact `used <= w_max` comparison.
pub(crate) fn for_each_feasible<F>(tables: &[Vec<StageOption>], w_max: f64, mut visit: F)
where
    F: FnMut(&[usize], &Totals),
{
    let n = tables.len();
    // min_rest[k] = smallest possible resource of stages k..n
    let mut min_rest = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let m = tables[k].iter().map(|o| o.resource).fold(f64::INFINITY, f64::min);
        min_rest[k] = min_rest[k + 1] + m;
    }
    let margin = 1e-9 * w_max.abs().max(1.0);
    let mut idx = vec![0usize; n];
    let mut totals = vec![Totals::ZERO; n + 1];
    descend(tables, w_max, margin, &min_rest, 0, &mut idx, &mut totals, &mut visit);
}

#[allow(clippy::too_many_arguments)]
fn descend<F>(
    tables: &[Vec<StageOption>],
    w_max: f64,
    margin: f64,
    min_rest: &[f64],
    depth: usize,
    idx: &mut [usize],
    totals: &mut [Totals],
    visit: &mut F,
) where
    F: FnMut(&[usize], &Totals),
{
    let last = depth + 1 == tables.len();
    for (i, opt) in tables[depth].iter().enumerate() {
        let t = totals[depth].add(opt);
        if last {
            if t.resource > w_max {
                continue;
            }
            idx[depth] = i;
            visit(idx, &t);
        } else {
            if t.resource + min_rest[depth + 1] > w_max + margin {
                continue;
            }
            idx[depth] = i;
            totals[depth + 1] = t;
            descend(tables, w_max, margin, min_rest, depth + 1, idx, totals, visit);
        }
    }
}
