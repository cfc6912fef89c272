//! Acceptance checks. Runs as a plain binary so that every criterion prints
//! one PASS/FAIL line; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use modelsearch::executor::{DECISION_TREE, LOGISTIC_REGRESSION, RANDOM_FOREST, SYNTHETIC};
use modelsearch::scheduler::{self, makespan_lower_bound};
use modelsearch::search::Splits as GenericSplits;
use modelsearch::{
    auc, grid_enumerate, makespan, profile_all, run_configs, run_schedule, run_search, schedule_greedy,
    schedule_optimal, schedule_random, synth, Dataset, Durations, GridSpec, Metric, ModelConfig, ParamValue,
    SchedulerKind, SearchOptions, SearchSpace, Splits, TrainerRegistry,
};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn three_grid_space() -> SearchSpace {
    SearchSpace::new()
        .add_space(
            GridSpec::new(RANDOM_FOREST)
                .add_grid("n_trees", [5i64, 10, 20])
                .unwrap()
                .add_grid("max_depth", [4i64, 6, 8])
                .unwrap()
                .add_grid("feature_fraction", [0.5, 0.75, 1.0])
                .unwrap(),
        )
        .add_space(
            GridSpec::new(LOGISTIC_REGRESSION)
                .add_grid("learning_rate", [0.01, 0.1, 0.5, 1.0])
                .unwrap()
                .add_grid("iterations", [50i64, 100, 200])
                .unwrap(),
        )
        .add_space(GridSpec::new(DECISION_TREE).add_grid("max_depth", [2i64, 4, 6, 8, 10]).unwrap())
}

fn grid_enumeration() -> Check {
    let n = grid_enumerate(&three_grid_space()).map_err(|e| e.to_string())?.len();
    ensure(n == 44, || format!("three grids gave {n} configs, expected 44"))?;

    let big = GridSpec::new("gbm")
        .add_grid("eta", [0.01, 0.05, 0.1, 0.3])
        .and_then(|g| g.add_grid("max_depth", [3i64, 6, 9]))
        .and_then(|g| g.add_grid("subsample", [0.5, 0.75, 1.0]))
        .and_then(|g| g.add_grid("colsample", [0.5, 0.75, 1.0]))
        .and_then(|g| g.add_grid("gamma", [0.0, 1.0]))
        .and_then(|g| g.add_grid("min_child_weight", [1i64, 3, 5, 7]))
        .map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let configs = grid_enumerate(&SearchSpace::new().add_space(big)).map_err(|e| e.to_string())?;
    let took = t0.elapsed();
    ensure(configs.len() == 864, || format!("6-parameter grid gave {}", configs.len()))?;
    ensure(took < Duration::from_secs(1), || format!("864 configs took {took:?}"))?;
    Ok(format!("44 configs; 864 configs in {took:?}"))
}

/// Durations in whole microseconds, held as exact rationals so the bound
/// comparison involves no rounding.
fn log_uniform_instance(rng: &mut ChaCha8Rng, n: usize) -> scheduler::Durations<Ratio<i64>> {
    (0..n)
        .map(|i| {
            let secs = 10f64.powf(rng.random_range(-2.0..=2.0));
            (i, Ratio::from_integer((secs * 1e6).round() as i64))
        })
        .collect()
}

fn scheduler_bound() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let instances = 1000;
    let mut worst = 1.0f64;
    for k in 0..instances {
        let n = rng.random_range(1..=12);
        let m = rng.random_range(1..=4usize);
        let d = log_uniform_instance(&mut rng, n);
        let greedy = makespan(&schedule_greedy(&d, m).unwrap(), &d).unwrap();
        let opt = makespan(&schedule_optimal(&d, m).unwrap(), &d).unwrap();
        let lb = makespan_lower_bound(&d, m);
        let bound = Ratio::new(4 * m as i64 - 1, 3 * m as i64);
        ensure(greedy <= bound * opt, || format!("instance {k}: greedy {greedy} > bound x opt {opt} (m={m})"))?;
        ensure(greedy >= lb && opt >= lb, || format!("instance {k}: below lower bound {lb}"))?;
        let ratio = greedy / opt;
        worst = worst.max(*ratio.numer() as f64 / *ratio.denom() as f64);
    }
    let took = t0.elapsed();
    ensure(took < Duration::from_secs(120), || format!("took {took:?}"))?;
    Ok(format!("{instances} instances, 0 violations, worst ratio {worst:.4}, {took:.2?}"))
}

fn fixed_instance() -> Check {
    let d: Durations = [5.0, 4.0, 3.0, 3.0, 3.0].into_iter().enumerate().collect();
    let g = makespan(&schedule_greedy(&d, 2).unwrap(), &d).unwrap();
    let o = makespan(&schedule_optimal(&d, 2).unwrap(), &d).unwrap();
    ensure(g == 10.0 && o == 9.0, || format!("greedy {g}, optimal {o}"))?;
    Ok("greedy 10, optimal 9".into())
}

fn dominance() -> Check {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dist = LogNormal::new(0.0, 1.5).unwrap();
    let (instances, n, m) = (200, 64, 8);
    let mut wins = 0;
    let mut improvements = Vec::with_capacity(instances);
    for k in 0..instances {
        let d: Durations = (0..n).map(|i| (i, dist.sample(&mut rng))).collect();
        let ids: Vec<usize> = d.keys().copied().collect();
        let g = makespan(&schedule_greedy(&d, m).unwrap(), &d).unwrap();
        let r = makespan(&schedule_random(&ids, m, k as u64).unwrap(), &d).unwrap();
        if g <= r {
            wins += 1;
        }
        improvements.push((r - g) / r);
    }
    improvements.sort_by(f64::total_cmp);
    let median = (improvements[instances / 2 - 1] + improvements[instances / 2]) / 2.0;
    let share = wins as f64 / instances as f64;
    let took = t0.elapsed();
    let detail = format!("greedy <= random in {:.1}%, median improvement {:.1}%, {took:.2?}", share * 100.0, median * 100.0);
    ensure(share >= 0.95 && median >= 0.15 && took < Duration::from_secs(60), || detail.clone())?;
    Ok(detail)
}

fn synthetic_config(id: usize, params: &[(&str, f64)]) -> ModelConfig {
    ModelConfig {
        config_id: id,
        algorithm: SYNTHETIC.into(),
        params: params.iter().map(|&(k, v)| (k.to_string(), ParamValue::Real(v))).collect(),
    }
}

fn profiling_overhead() -> Check {
    let t0 = Instant::now();
    let configs: Vec<ModelConfig> = (0..64)
        .map(|i| synthetic_config(i, &[("seconds_per_row", 1e-6 * (1 + i % 8) as f64)]))
        .collect();
    let splits = GenericSplits {
        train: synth::linear(20_000, 2.0, 1),
        validate: synth::linear(2_000, 2.0, 2),
        test: None,
    };
    let options = SearchOptions {
        workers: 8,
        scheduler: SchedulerKind::Profile,
        sample_rate: 0.01,
        seed: 3,
        metric: Metric::Auc,
    };
    let report = run_configs(&configs, &splits, &TrainerRegistry::with_builtins(), &options).map_err(|e| e.to_string())?;
    let ratio = report.overhead_ratio.ok_or("no overhead ratio")?;
    let took = t0.elapsed();
    let detail = format!(
        "profiling {:.3}s of {:.3}s total, ratio {ratio:.4}, {took:.2?}",
        report.profiling_wall_seconds, report.total_wall_seconds
    );
    ensure(ratio < 0.10 && took < Duration::from_secs(120), || detail.clone())?;
    Ok(detail)
}

fn estimate_fidelity() -> Check {
    let configs: Vec<ModelConfig> = (0..8)
        .map(|i| synthetic_config(i, &[("seconds_per_row", 2e-5 * (1 + i) as f64)]))
        .collect();
    let train: Dataset = synth::linear(2_000, 2.0, 1);
    let registry = TrainerRegistry::with_builtins();
    let profile = profile_all(&configs, &train, 0.10, 5, &registry, 4).map_err(|e| e.to_string())?;
    let schedule = schedule_greedy(&profile.entries, 4).map_err(|e| e.to_string())?;
    let outcome = run_schedule(&schedule, &configs, &train, &registry);
    ensure(outcome.failures.is_empty(), || format!("{:?}", outcome.failures))?;
    let mut worst = 0.0f64;
    for m in &outcome.models {
        let est = profile.entries[&m.config_id];
        let err = (est - m.train_seconds).abs() / m.train_seconds;
        worst = worst.max(err);
        ensure(err <= 0.25, || {
            format!("config {}: estimate {est:.4}s vs measured {:.4}s", m.config_id, m.train_seconds)
        })?;
    }
    Ok(format!("{} configs, worst relative error {:.1}%", outcome.models.len(), worst * 100.0))
}

fn brute_auc(scores: &[f64], labels: &[f64]) -> f64 {
    let (mut credit, mut pairs) = (0.0, 0.0);
    for (i, &yi) in labels.iter().enumerate() {
        for (j, &yj) in labels.iter().enumerate() {
            if yi == 1.0 && yj == 0.0 {
                pairs += 1.0;
                credit += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    credit / pairs
}

fn auc_oracle() -> Check {
    let fixed = auc(&[0.1, 0.4, 0.35, 0.8], &[0.0, 0.0, 1.0, 1.0]).map_err(|e| e.to_string())?;
    ensure(fixed == 0.75, || format!("fixed case gave {fixed}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for k in 0..500 {
        let n = rng.random_range(2..=200);
        let mut labels: Vec<f64> = (0..n).map(|_| f64::from(rng.random_bool(0.4))).collect();
        labels[0] = 1.0;
        labels[1] = 0.0;
        let mut scores: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        // inject ties: copy existing scores and snap some to a coarse grid
        for _ in 0..n / 3 {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            scores[a] = scores[b];
        }
        for s in scores.iter_mut().filter(|_| rng.random_bool(0.2)) {
            *s = (*s * 4.0).round() / 4.0;
        }
        let diff = (auc(&scores, &labels).unwrap() - brute_auc(&scores, &labels)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-9, || format!("vector {k}: differs by {diff}"))?;
    }
    Ok(format!("fixed case 0.75; 500 vectors, max deviation {worst:e}"))
}

fn xor_splits() -> Splits {
    let all: Dataset = synth::xor(2_000, 0, 0.0, 17);
    let idx: Vec<usize> = (0..all.n_rows()).collect();
    GenericSplits {
        train: all.select_rows(&idx[..1_000]),
        validate: all.select_rows(&idx[1_000..1_500]),
        test: Some(all.select_rows(&idx[1_500..])),
    }
}

fn multi_algorithm() -> Check {
    let t0 = Instant::now();
    let splits = xor_splits();
    let registry = TrainerRegistry::with_builtins();
    let options = SearchOptions {
        workers: 4,
        scheduler: SchedulerKind::Profile,
        sample_rate: 0.05,
        seed: 1,
        metric: Metric::Auc,
    };
    let full = run_search(&three_grid_space(), &splits, &registry, &options).map_err(|e| e.to_string())?;
    let logistic_only = SearchSpace::new().add_space(three_grid_space().grids[1].clone());
    let lr = run_search(&logistic_only, &splits, &registry, &options).map_err(|e| e.to_string())?;
    let took = t0.elapsed();

    let (full_val, lr_val) = (full.best_value.ok_or("no winner")?, lr.best_value.ok_or("no logistic winner")?);
    let (full_test, lr_test) = (full.best_test_value.unwrap_or(0.0), lr.best_test_value.unwrap_or(1.0));
    let winner = &full.configs[full.best_config_id.unwrap()];
    let detail = format!(
        "{} configs; union val {full_val:.4} vs logistic val {lr_val:.4}; selected {} test {full_test:.4}; logistic test {lr_test:.4}; {took:.2?}",
        full.configs.len(),
        winner.algorithm
    );
    ensure(
        full.results.len() == 44 && full_val >= lr_val && full_test >= 0.95 && lr_test <= 0.6 && took < Duration::from_secs(60),
        || detail.clone(),
    )?;
    Ok(detail)
}

fn parallel_speedup() -> Check {
    let configs: Vec<ModelConfig> = (0..16).map(|i| synthetic_config(i, &[("base_seconds", 0.5)])).collect();
    let splits = GenericSplits {
        train: synth::linear(100, 1.0, 1),
        validate: synth::linear(100, 1.0, 2),
        test: None,
    };
    let registry = TrainerRegistry::with_builtins();
    let wall = |workers| -> Result<f64, String> {
        let options = SearchOptions {
            workers,
            scheduler: SchedulerKind::Random,
            seed: 0,
            ..SearchOptions::default()
        };
        let t0 = Instant::now();
        let report = run_configs(&configs, &splits, &registry, &options).map_err(|e| e.to_string())?;
        ensure(report.results.len() == 16, || format!("{:?}", report.failures))?;
        Ok(t0.elapsed().as_secs_f64())
    };
    let (one, four) = (wall(1)?, wall(4)?);
    let detail = format!("m=1 {one:.3}s, m=4 {four:.3}s, ratio {:.3}", four / one);
    ensure(four <= 0.45 * one, || detail.clone())?;
    Ok(detail)
}

fn determinism() -> Check {
    let splits = xor_splits();
    let registry = TrainerRegistry::with_builtins();
    let space = SearchSpace::new().add_space(three_grid_space().grids[2].clone()).add_space(three_grid_space().grids[1].clone());
    let mut checked = Vec::new();
    for scheduler in [SchedulerKind::Random, SchedulerKind::Profile] {
        let options = SearchOptions {
            workers: 3,
            scheduler,
            sample_rate: 0.1,
            seed: 42,
            metric: Metric::Auc,
        };
        let a = run_search(&space, &splits, &registry, &options).map_err(|e| e.to_string())?;
        let b = run_search(&space, &splits, &registry, &options).map_err(|e| e.to_string())?;
        ensure(a.normalized().to_json() == b.normalized().to_json(), || format!("{scheduler} reports differ"))?;
        checked.push(scheduler.to_string());
    }
    Ok(format!("identical normalized reports under {}", checked.join(" and ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("grid enumeration", grid_enumeration),
        ("scheduler optimality bound", scheduler_bound),
        ("fixed scheduling instance", fixed_instance),
        ("profile vs random dominance", dominance),
        ("profiling overhead", profiling_overhead),
        ("estimate fidelity", estimate_fidelity),
        ("auc oracle", auc_oracle),
        ("multi-algorithm benefit", multi_algorithm),
        ("parallel speedup", parallel_speedup),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut results = BTreeMap::new();
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match &outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => println!("FAIL  {name}: {detail}"),
        }
        results.insert(name, outcome.is_ok());
    }
    let failed = results.values().filter(|ok| !**ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
