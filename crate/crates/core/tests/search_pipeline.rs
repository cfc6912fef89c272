use std::fs;

use modelsearch::executor::{DECISION_TREE, LOGISTIC_REGRESSION, SYNTHETIC};
use modelsearch::search::Splits as GenericSplits;
use modelsearch::synth;
use modelsearch::{
    run_configs, run_search, GridSpec, Metric, ModelConfig, ParamValue, PluginOptions, SchedulerKind, SearchConfig,
    SearchError, SearchOptions, SearchSpace, Splits, TrainerRegistry,
};

fn xor_splits() -> Splits {
    GenericSplits {
        train: synth::xor(600, 1, 0.0, 1),
        validate: synth::xor(300, 1, 0.0, 2),
        test: Some(synth::xor(300, 1, 0.0, 3)),
    }
}

fn small_space() -> SearchSpace {
    SearchSpace::new()
        .add_space(
            GridSpec::new(LOGISTIC_REGRESSION)
                .add_grid("learning_rate", [0.1, 0.5])
                .unwrap()
                .add_grid("iterations", [50i64])
                .unwrap(),
        )
        .add_space(GridSpec::new(DECISION_TREE).add_grid("max_depth", [1i64, 3, 5]).unwrap())
}

fn synthetic(id: usize, params: &[(&str, ParamValue)]) -> ModelConfig {
    ModelConfig {
        config_id: id,
        algorithm: SYNTHETIC.into(),
        params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
    }
}

fn opts(scheduler: SchedulerKind, workers: usize) -> SearchOptions {
    SearchOptions {
        workers,
        scheduler,
        sample_rate: 0.1,
        seed: 11,
        metric: Metric::Auc,
    }
}

#[test]
fn every_config_is_accounted_for() {
    let registry = TrainerRegistry::with_builtins();
    let report = run_search(&small_space(), &xor_splits(), &registry, &opts(SchedulerKind::Profile, 2)).unwrap();
    assert_eq!(report.configs.len(), 5);
    assert_eq!(report.results.len() + report.failures.len(), 5);
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(report.schedule.task_count(), 5);
    assert_eq!(report.worker_loads.len(), 2);

    let best = report.best().unwrap();
    assert!(report.results.iter().all(|r| r.value <= best.value));
    assert_eq!(report.configs[best.config_id].algorithm, DECISION_TREE);
    assert!(best.value > 0.9, "{}", best.value);
    assert!(report.best_test_value.unwrap() > 0.9);
    assert!(report.results.iter().all(|r| r.test_value.is_some()));

    let ratio = report.overhead_ratio.unwrap();
    assert!((0.0..=1.0).contains(&ratio));
    assert_eq!(report.estimated_seconds.as_ref().unwrap().len(), 5);
}

#[test]
fn failing_configs_do_not_stop_the_run() {
    let registry = TrainerRegistry::with_builtins();
    let configs = vec![
        synthetic(0, &[]),
        synthetic(1, &[("fail", ParamValue::Int(1))]),
        synthetic(2, &[("weight", ParamValue::Real(-1.0))]),
        synthetic(3, &[("bogus", ParamValue::Int(1))]),
    ];
    let splits = GenericSplits {
        train: synth::linear(100, 3.0, 1),
        validate: synth::linear(100, 3.0, 2),
        test: None,
    };
    let report = run_configs(&configs, &splits, &registry, &opts(SchedulerKind::Profile, 2)).unwrap();
    let failed: Vec<usize> = report.failures.iter().map(|f| f.config_id).collect();
    assert_eq!(failed, [1, 3]);
    assert!(report.failures[1].message.contains("bogus"));
    assert_eq!(report.profiling_failures.len(), 2);
    // the profiler charges failed configs the largest successful estimate
    let est = report.estimated_seconds.as_ref().unwrap();
    assert_eq!(est[&1], est[&0].max(est[&2]));
    assert_eq!(report.best_config_id, Some(0));
    assert_eq!(report.best_test_value, None);
}

#[test]
fn all_failures_leave_no_winner() {
    let registry = TrainerRegistry::with_builtins();
    let configs = vec![synthetic(0, &[("fail", ParamValue::Int(1))])];
    let splits = GenericSplits {
        train: synth::linear(50, 1.0, 1),
        validate: synth::linear(50, 1.0, 2),
        test: None,
    };
    let report = run_configs(&configs, &splits, &registry, &opts(SchedulerKind::Random, 1)).unwrap();
    assert_eq!(report.best_config_id, None);
    assert_eq!(report.failures.len(), 1);
    let err = run_configs(&configs, &splits, &registry, &opts(SchedulerKind::Profile, 1)).unwrap_err();
    assert!(matches!(err, SearchError::Profile(_)), "{err}");
}

#[test]
fn unregistered_algorithms_are_reported_up_front() {
    let space = SearchSpace::new().add_space(GridSpec::new("svm").add_grid("c", [1.0]).unwrap());
    let err = run_search(&space, &xor_splits(), &TrainerRegistry::with_builtins(), &SearchOptions::default())
        .unwrap_err();
    assert!(matches!(err, SearchError::Unregistered(ref v) if v == &["svm"]), "{err}");
}

#[test]
fn repeated_runs_agree() {
    let registry = TrainerRegistry::with_builtins();
    let splits = xor_splits();
    for scheduler in [SchedulerKind::Profile, SchedulerKind::Random] {
        let a = run_search(&small_space(), &splits, &registry, &opts(scheduler, 3)).unwrap();
        let b = run_search(&small_space(), &splits, &registry, &opts(scheduler, 3)).unwrap();
        assert_eq!(a.normalized(), b.normalized());
        if scheduler == SchedulerKind::Random {
            assert_eq!(a.schedule, b.schedule);
        }
    }
}

#[test]
fn report_json_round_trips() {
    let registry = TrainerRegistry::with_builtins();
    let report = run_search(&small_space(), &xor_splits(), &registry, &opts(SchedulerKind::Random, 2)).unwrap();
    let back: modelsearch::SearchReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn config_file_drives_builtins_and_plugins() {
    let dir = tempfile::tempdir().unwrap();
    let label = "target";
    synth::xor::<f64>(300, 0, 0.0, 1).to_csv_path(dir.path().join("train.csv"), label).unwrap();
    synth::xor::<f64>(200, 0, 0.0, 2).to_csv_path(dir.path().join("validate.csv"), label).unwrap();
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/toy_plugin.py");
    let config = serde_json::json!({
        "train_csv": "train.csv",
        "validate_csv": "validate.csv",
        "label_column": label,
        "standardize": true,
        "grids": [
            {"algorithm": "logistic_regression", "params": {"iterations": [20, 40]}},
            {"algorithm": "decision_tree", "params": {"max_depth": [4]}}
        ],
        "plugins": [{"command": ["python3", script], "algorithms": ["logistic_regression"]}]
    });
    let path = dir.path().join("search.json");
    fs::write(&path, config.to_string()).unwrap();

    let config = SearchConfig::from_path(&path).unwrap();
    assert_eq!(config.train_csv, dir.path().join("train.csv"));
    let splits = config.load_data::<f64>().unwrap();
    let registry = config.registry::<f64>(2, &PluginOptions::default()).unwrap();
    let report = run_search(&config.space(), &splits, &registry, &opts(SchedulerKind::Profile, 2)).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    assert_eq!(report.results.len(), 3);
    assert_eq!(report.best_config_id, Some(2));
}

#[test]
fn plugin_must_advertise_declared_algorithms() {
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/toy_plugin.py");
    let config: SearchConfig = serde_json::json!({
        "train_csv": "a.csv",
        "validate_csv": "b.csv",
        "label_column": "y",
        "grids": [],
        "plugins": [{"command": ["python3", script], "algorithms": ["gbm"]}]
    })
    .to_string()
    .parse()
    .unwrap();
    let err = config.registry::<f64>(1, &PluginOptions::default()).unwrap_err();
    assert!(matches!(err, SearchError::PluginAlgorithm { ref algorithm, .. } if algorithm == "gbm"), "{err}");
}
