//! The acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p opd --test acceptance -- --nocapture` to see
//! the report.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use common::grad::{linear_error, lstm_error, ppo_error, residual_error};
use common::{
    all_tuples, brute_force_best, hand_feasible, hand_metrics, hand_objective, hand_qos, profiles,
    random_spec, random_weights, to_config, HandMetrics,
};
use opd::agent::{
    run_online, ConfigPolicy, CurvePoint, OpdPolicy, PolicyArch, PolicyModel,
    RandomPolicy, SolverPolicy,
};
use opd::baselines::Solver;
use opd::env::{reward, BatchAggregate, EnvConfig, PipelineEnv, RewardParams};
use opd::harness::bench::decision_time_family;
use opd::harness::{
    prepare, run_experiment, train_agent, ExperimentConfig, ForecasterKind, Timing,
};
use opd::pipeline::{
    check_feasible, objective, pipeline_metrics, qos, BatchGrid, Capacity,
};
use opd::predictor::{
    evaluate_smape, train_predictor, training_pairs, PredictorHyper, RecentPeak,
};
use opd::workload::{generate_trace, Pattern, PatternParams, WorkloadTrace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed < limit
}

// 1. metric oracles

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let stages = rng.gen_range(1..=5);
        let counts: Vec<usize> = (0..stages).map(|_| rng.gen_range(1..=4)).collect();
        let spec = random_spec(&mut rng, &counts, false);
        let p = profiles(&spec);
        let tuples: Vec<(usize, usize, usize)> = counts
            .iter()
            .map(|&k| (rng.gen_range(0..k), rng.gen_range(1..=6), rng.gen_range(1..=16)))
            .collect();
        let demand = rng.gen_range(0.0..300.0);
        let w = random_weights(&mut rng);
        let rp = RewardParams {
            qos_weights: w,
            cost_weight: rng.gen_range(0.0..1.0),
            batch_penalty: rng.gen_range(0.0..0.1),
            repair_penalty: 0.5,
            batch_aggregate: if rng.gen_bool(0.5) {
                BatchAggregate::Max
            } else {
                BatchAggregate::Sum
            },
        };
        let cfg = to_config(&tuples);
        let m = pipeline_metrics(&spec, &cfg, demand).unwrap();
        let h: HandMetrics = hand_metrics(&p, &tuples, demand);
        let q = qos(&m, &w);
        let batch_term = match rp.batch_aggregate {
            BatchAggregate::Max => tuples.iter().map(|t| t.2).max().unwrap(),
            BatchAggregate::Sum => tuples.iter().map(|t| t.2).sum(),
        };
        let hand_reward =
            hand_qos(&h, &w) - rp.cost_weight * h.cost - rp.batch_penalty * batch_term as f64;
        let pairs = [
            (m.accuracy_sum, h.accuracy),
            (m.cost, h.cost),
            (m.latency, h.latency),
            (m.throughput, h.throughput),
            (m.excess_load, h.excess),
            (q, hand_qos(&h, &w)),
            (objective(q, m.cost, &w), hand_objective(&h, &w)),
            (reward(q, m.cost, rp.batch_term(&cfg), &rp), hand_reward),
        ];
        for (a, b) in pairs {
            worst = worst.max((a - b).abs());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && within(elapsed, Duration::from_secs(10)),
        format!("1000 instances, max abs error {worst:e}, {elapsed:.2?}"),
    )
}

// 2. constraint and solver oracle

fn constraint_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut shapes = 0;
    let mut configs_checked = 0u64;
    let mut largest = 0usize;
    let mut mismatches = Vec::new();
    let mut variant_lists: Vec<Vec<usize>> = Vec::new();
    for stages in 1..=3u32 {
        for code in 0..3usize.pow(stages) {
            let counts: Vec<usize> = (0..stages).map(|i| code / 3usize.pow(i) % 3 + 1).collect();
            variant_lists.push(counts);
        }
    }
    for counts in &variant_lists {
        for f_max in 1..=3 {
            for b_max in 1..=4 {
                shapes += 1;
                let duplicate = shapes % 2 == 0;
                let spec = random_spec(&mut rng, counts, duplicate);
                let p = profiles(&spec);
                let min_res: f64 = p
                    .iter()
                    .map(|s| s.iter().map(|v| v.2).fold(f64::INFINITY, f64::min))
                    .sum();
                let w_max = min_res * rng.gen_range(1.0..4.0);
                let cap = Capacity::new(f_max, b_max, w_max).with_batch_grid(BatchGrid::All);
                let demand = rng.gen_range(0.0..150.0);
                let w = random_weights(&mut rng);

                let tuples = all_tuples(&p, &cap);
                largest = largest.max(tuples.len());
                for t in &tuples {
                    let lib = check_feasible(&spec, &to_config(t), &cap).unwrap().is_ok();
                    configs_checked += 1;
                    if lib != hand_feasible(&p, t, &cap) {
                        mismatches.push(format!("feasibility of {t:?}"));
                    }
                }
                // out-of-range probes
                for s in 0..counts.len() {
                    for bad in [(counts[s], 1, 1), (0, 0, 1), (0, f_max + 1, 1), (0, 1, 0), (0, 1, b_max + 1)] {
                        let mut t: Vec<_> = counts.iter().map(|_| (0, 1, 1)).collect();
                        t[s] = bad;
                        let lib = check_feasible(&spec, &to_config(&t), &cap).unwrap().is_ok();
                        if lib || hand_feasible(&p, &t, &cap) {
                            mismatches.push(format!("out-of-range {t:?} accepted"));
                        }
                    }
                }
                let oracle = brute_force_best(&p, &cap, demand, &w);
                let solver = Solver::new(&spec, &cap).unwrap().solve(demand, &w);
                match (oracle, solver) {
                    (Some((best, score, feasible)), Ok(out)) => {
                        if out.config != to_config(&best)
                            || (out.objective - score).abs() > 1e-12
                            || out.evaluated != feasible
                        {
                            mismatches.push(format!(
                                "solver {:?} ({}) vs oracle {best:?} ({score})",
                                out.config, out.objective
                            ));
                        }
                    }
                    (None, Err(_)) => {}
                    (o, s) => mismatches.push(format!("infeasibility disagrees: {o:?} {s:?}")),
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches.is_empty() && largest == 46_656 && within(elapsed, Duration::from_secs(60)),
        format!(
            "{shapes} pipelines, {configs_checked} configurations (largest {largest}), \
             {} mismatches{}, {elapsed:.2?}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" e.g. {m}")).unwrap_or_default()
        ),
    )
}

// 3. gradient checks

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let seeds = 0..5u64;
    let worst = |f: fn(u64) -> f64| seeds.clone().map(f).fold(0.0, f64::max);
    let lin = worst(linear_error);
    let res = worst(residual_error);
    let lstm = worst(lstm_error);
    let ppo = worst(ppo_error);
    let elapsed = start.elapsed();
    outcome(
        lin < 1e-4 && res < 1e-4 && lstm < 1e-4 && ppo < 1e-3 && within(elapsed, Duration::from_secs(60)),
        format!(
            "5 seeds: affine {lin:.1e}, residual {res:.1e}, lstm {lstm:.1e}, ppo {ppo:.1e}, {elapsed:.2?}"
        ),
    )
}

// 4. predictor

/// Sinusoid, step and constant traces for seeds `first..first + n`.
fn predictor_corpus(first: u64, n: u64) -> Vec<(&'static str, WorkloadTrace)> {
    let mut out = Vec::new();
    for s in first..first + n {
        let sine = PatternParams {
            step_mix: 0.0,
            phase_s: 37.0 * s as f64,
            ..Default::default()
        };
        let step = PatternParams {
            step_mix: 1.0,
            phase_s: 53.0 * s as f64,
            ..Default::default()
        };
        let flat = PatternParams {
            level: 20.0 + 15.0 * (s % 6) as f64,
            ..Default::default()
        };
        out.push(("sinusoid", generate_trace(Pattern::Fluctuating, 1200, s, &sine).unwrap()));
        out.push(("step", generate_trace(Pattern::Fluctuating, 1200, s + 500, &step).unwrap()));
        out.push(("constant", generate_trace(Pattern::Constant, 1200, s + 900, &flat).unwrap()));
    }
    out
}

fn predictor_quality() -> Outcome {
    let train: Vec<WorkloadTrace> = predictor_corpus(1, 4).into_iter().map(|(_, t)| t).collect();
    let held_out = predictor_corpus(100, 2);
    let start = Instant::now();
    let (model, _) = train_predictor(&train, &PredictorHyper::default()).unwrap();
    let train_time = start.elapsed();

    let all: Vec<WorkloadTrace> = held_out.iter().map(|(_, t)| t.clone()).collect();
    let pairs = training_pairs(&all, 1).unwrap();
    let pooled = evaluate_smape(&model, &pairs).unwrap();
    let family = |name: &str| {
        let ts: Vec<WorkloadTrace> =
            held_out.iter().filter(|(n, _)| *n == name).map(|(_, t)| t.clone()).collect();
        evaluate_smape(&model, &training_pairs(&ts, 1).unwrap()).unwrap()
    };
    let mut slowest = Duration::ZERO;
    for (h, _) in pairs.iter().step_by(pairs.len() / 200) {
        let t = Instant::now();
        model.predict_peak(h).unwrap();
        slowest = slowest.max(t.elapsed());
    }
    outcome(
        pooled <= 15.0 && slowest < Duration::from_millis(50) && within(train_time, Duration::from_secs(600)),
        format!(
            "held-out SMAPE {pooled:.2}% (sinusoid {:.2}%, step {:.2}%, constant {:.2}%), \
             slowest prediction {slowest:.2?}, training {train_time:.1?}",
            family("sinusoid"),
            family("step"),
            family("constant"),
        ),
    )
}

// 5 and 6. training and policy quality on the desk pipeline

fn desk_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::builtin("desk", 7);
    cfg.agent.episodes = 2000;
    cfg.agent.ppo.discount = 0.9;
    cfg
}

fn mean(points: &[CurvePoint], f: fn(&CurvePoint) -> f64) -> f64 {
    points.iter().map(f).sum::<f64>() / points.len() as f64
}

/// Relative gain measured against the magnitude of the starting value.
fn gain(first: f64, last: f64) -> f64 {
    (last - first) / first.abs()
}

fn convergence_and_quality() -> (Outcome, Outcome) {
    let cfg = desk_config();
    let prepared = prepare(&cfg).unwrap();
    let start = Instant::now();
    let trained = train_agent(&cfg, &prepared).unwrap();
    let train_time = start.elapsed();

    let policy_eps: Vec<CurvePoint> = trained.policy_curve();
    let k = (policy_eps.len() / 10).max(1);
    let (head, tail) = (&policy_eps[..k], &policy_eps[policy_eps.len() - k..]);
    let r0 = mean(head, |c| c.mean_reward);
    let r1 = mean(tail, |c| c.mean_reward);
    let ka = (trained.curve.len() / 10).max(1);
    let (ah, at) = (&trained.curve[..ka], &trained.curve[trained.curve.len() - ka..]);
    let (p0, p1) = (mean(ah, |c| c.policy_loss), mean(at, |c| c.policy_loss));
    let (v0, v1) = (mean(ah, |c| c.value_loss), mean(at, |c| c.value_loss));
    let c5 = outcome(
        gain(r0, r1) >= 0.5 && p1 < p0 && v1 < v0 && within(train_time, Duration::from_secs(1800)),
        format!(
            "{} episodes in {train_time:.1?}: reward {r0:.3} -> {r1:.3} ({:+.0}%), \
             policy loss {p0:.3} -> {p1:.3}, value loss {v0:.2} -> {v1:.2}",
            trained.curve.len(),
            100.0 * gain(r0, r1)
        ),
    );

    let mut env = prepared.eval_env(&cfg).unwrap();
    let mut run = |p: &mut dyn ConfigPolicy| run_online(&mut env, p).unwrap();
    let random = run(&mut RandomPolicy::new(cfg.seed));
    let solver = run(&mut SolverPolicy::new(&prepared.spec, &prepared.capacity, cfg.weights).unwrap());
    let opd = run(&mut OpdPolicy::greedy(trained.model.clone()));
    let (o_r, o_s, o_o) = (random.mean_objective(), solver.mean_objective(), opd.mean_objective());
    let (c_s, c_o) = (solver.mean_cost(), opd.mean_cost());
    // "x% of a baseline" is taken as baseline + (x - 100)% of its magnitude,
    // which reads the same for positive baselines and stays meaningful for
    // negative ones.
    let vs_random = o_o >= o_r + 0.2 * o_r.abs();
    let vs_solver = o_o >= o_s - 0.1 * o_s.abs();
    let c6 = outcome(
        vs_random && vs_solver && c_o <= 1.05 * c_s,
        format!(
            "objective opd {o_o:.4}, random {o_r:.4}, solver {o_s:.4} ({:.1}% of solver); \
             cost opd {c_o:.3} vs solver {c_s:.3} ({:.3}x)",
            100.0 * o_o / o_s,
            c_o / c_s
        ),
    );
    (c5, c6)
}

// 7. decision-time scaling

fn decision_time_scaling() -> Outcome {
    let start = Instant::now();
    let mut solver_ms = Vec::new();
    let mut opd_ms = Vec::new();
    let mut h = (0.0, 0.0);
    let mut sizes = Vec::new();
    for b in decision_time_family() {
        let trace = generate_trace(Pattern::Fluctuating, 1200, 7, &PatternParams::default()).unwrap();
        let mut env = PipelineEnv::new(
            b.spec.clone(),
            b.capacity,
            trace,
            &RecentPeak::default(),
            EnvConfig::default(),
        )
        .unwrap();
        sizes.push(env.space().size());
        let model = PolicyModel::for_space(env.space(), PolicyArch::default(), 7).unwrap();
        let s = run_online(
            &mut env,
            &mut SolverPolicy::new(&b.spec, &b.capacity, Default::default()).unwrap(),
        )
        .unwrap();
        let o = run_online(&mut env, &mut OpdPolicy::greedy(model)).unwrap();
        let per = |r: &opd::agent::EpisodeReport| {
            r.total_decision_time.as_secs_f64() * 1e3 / r.steps.len() as f64
        };
        solver_ms.push(per(&s));
        opd_ms.push(per(&o));
        h = (s.total_decision_time.as_secs_f64() * 1e3, o.total_decision_time.as_secs_f64() * 1e3);
    }
    let elapsed = start.elapsed();
    let monotone = solver_ms.windows(2).all(|w| w[1] > w[0]);
    let spread = opd_ms.iter().cloned().fold(0.0, f64::max) / opd_ms.iter().cloned().fold(f64::INFINITY, f64::min);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    outcome(
        monotone && spread < 3.0 && h.1 < h.0 && within(elapsed, Duration::from_secs(900)),
        format!(
            "sizes {sizes:?}; solver ms/decision [{}]; opd ms/decision [{}] (spread {spread:.2}x); \
             largest H solver {:.1} ms vs opd {:.2} ms; {elapsed:.1?}",
            fmt(&solver_ms),
            fmt(&opd_ms),
            h.0,
            h.1
        ),
    )
}

// 8. determinism

fn small_run_config(timing: Timing) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::builtin("desk", 3);
    cfg.timing = timing;
    cfg.agent.episodes = 24;
    cfg.agent.train_traces = 2;
    cfg.predictor.kind = ForecasterKind::Lstm;
    cfg.predictor.train_traces = 2;
    cfg.predictor.train.epochs = 2;
    cfg
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let name = e.unwrap().file_name().to_string_lossy().into_owned();
            name.ends_with(".csv").then_some(name)
        })
        .collect();
    v.sort();
    v
}

/// Drops every column whose header mentions decision time.
fn without_timing(text: &str) -> String {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let keep: Vec<bool> = header.iter().map(|h| !h.ends_with("_ms")).collect();
    std::iter::once(header.join(","))
        .chain(lines.map(str::to_string))
        .map(|l| {
            l.split(',')
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(c, _)| c)
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let mut compared = 0;
    for (label, timing) in [("off", Timing::Off), ("wall", Timing::Wall)] {
        let cfg = small_run_config(timing);
        let a = dir.path().join(format!("{label}-a"));
        let b = dir.path().join(format!("{label}-b"));
        run_experiment(&cfg, &a).unwrap();
        run_experiment(&cfg, &b).unwrap();
        let files = csv_files(&a);
        if files != csv_files(&b) || files.len() < 6 {
            problems.push(format!("file sets differ: {files:?}"));
        }
        for f in files {
            let x = std::fs::read(a.join(&f)).unwrap();
            let y = std::fs::read(b.join(&f)).unwrap();
            compared += 1;
            let same = match timing {
                Timing::Off => x == y,
                Timing::Wall => {
                    without_timing(&String::from_utf8(x).unwrap())
                        == without_timing(&String::from_utf8(y).unwrap())
                }
            };
            if !same {
                problems.push(format!("{label}/{f}"));
            }
        }
    }
    outcome(
        problems.is_empty(),
        format!(
            "{compared} CSV files compared: byte-identical with timing off, identical outside the \
             decision-time columns with wall-clock timing; differing: {problems:?}"
        ),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    })
}

// Runs without the libtest harness so the report is never captured.
fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("{} criterion {n} ({name}): {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "metric oracles", guarded(metric_oracles));
    report(2, "constraint and solver oracle", guarded(constraint_oracle));
    report(3, "gradient checks", guarded(gradient_checks));
    report(4, "predictor", guarded(predictor_quality));
    let (c5, c6) = catch_unwind(AssertUnwindSafe(convergence_and_quality)).unwrap_or_else(|_| {
        (
            outcome(false, "panicked during training".into()),
            outcome(false, "not evaluated".into()),
        )
    });
    report(5, "PPO convergence", c5);
    report(6, "policy quality", c6);
    report(7, "decision-time scaling", guarded(decision_time_scaling));
    report(8, "determinism", guarded(determinism));

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
