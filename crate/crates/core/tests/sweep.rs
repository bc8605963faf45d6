use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use infoplane::estimators::{EstimatorKind, EstimatorSpec};
use infoplane::network::{train, TrainMetrics};
use infoplane::sweep::{estimates_file, run_dir, run_sweep, run_sweep_with, RunStatus, SweepSpec};
use infoplane::trace::MANIFEST_FILE;
use infoplane::{ActivationKind, ActivationTrace, Dataset, Error, NetworkConfig, Result, Split};

fn small_spec(seeds: Vec<u64>) -> SweepSpec {
    let base = NetworkConfig {
        epochs: 4,
        batch_size: 1024,
        learning_rate: 1e-2,
        snapshot_epochs: Some(vec![0, 2, 4]),
        ..Default::default()
    };
    let mut spec = SweepSpec::new(vec![ActivationKind::Tanh], base);
    spec.seeds = seeds;
    spec.l2_lambdas = vec![0.0];
    spec.workers = 1;
    spec
}

fn count_dirs(path: &Path) -> usize {
    std::fs::read_dir(path)
        .map(|it| it.filter(|e| e.as_ref().unwrap().path().is_dir()).count())
        .unwrap_or(0)
}

#[test]
fn two_seeds_give_two_traces_and_one_plane() {
    let out = tempfile::tempdir().unwrap();
    let spec = small_spec(vec![0, 1]);
    let report = run_sweep(&spec, out.path()).unwrap();

    assert_eq!(report.runs.len(), 2);
    assert!(report.runs.iter().all(|r| r.status == RunStatus::Completed));
    let group = out.path().join("runs").join("tanh_l2-0");
    assert_eq!(count_dirs(&group), 2);
    for key in spec.keys() {
        let dir = run_dir(out.path(), &key);
        assert!(dir.join("trace").join(MANIFEST_FILE).is_file());
        assert!(dir.join("metrics.json").is_file());
        assert!(estimates_file(&dir, EstimatorKind::Ebab).is_file());
        assert!(estimates_file(&dir, EstimatorKind::Uniform).is_file());
    }

    assert_eq!(count_dirs(&out.path().join("aggregate")), 1);
    let agg = out.path().join("aggregate").join("tanh_l2-0");
    for name in [
        "plane_ebab.csv",
        "plane_ebab.svg",
        "compression_ebab.json",
        "plane_uniform.csv",
    ] {
        assert!(agg.join(name).is_file(), "{name}");
    }
    assert!(out.path().join("aggregate").join("scores_ebab.csv").is_file());
    assert!(out.path().join("sweep_report.json").is_file());

    let summary = report.group("tanh_l2-0", EstimatorKind::Ebab).unwrap();
    assert_eq!(summary.runs, 2);
    assert!((0.0..=1.0).contains(&summary.averaged.network_score));
    assert_eq!(report.accuracy, "final-epoch test accuracy");
}

#[test]
fn report_enumerates_every_run_once() {
    let out = tempfile::tempdir().unwrap();
    let mut spec = small_spec(vec![3, 4]);
    spec.activations.push(ActivationKind::Relu);
    spec.l2_lambdas = vec![0.0, 0.01];
    spec.estimators = vec![EstimatorSpec::Ebab { n_bins: 10 }];
    let report = run_sweep(&spec, out.path()).unwrap();

    let mut ids: Vec<_> = report.runs.iter().map(|r| r.run_id.clone()).collect();
    assert_eq!(ids.len(), 8);
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), 8);
    assert_eq!(report.groups.len(), 4);
}

#[test]
fn rerun_skips_completed_runs() {
    let out = tempfile::tempdir().unwrap();
    let spec = small_spec(vec![0, 1]);
    run_sweep(&spec, out.path()).unwrap();
    let before = std::fs::read(out.path().join("aggregate/tanh_l2-0/plane_ebab.csv")).unwrap();

    let calls = AtomicUsize::new(0);
    let counting = |c: &NetworkConfig, d: &Dataset, s: &Split| -> Result<(ActivationTrace, TrainMetrics)> {
        calls.fetch_add(1, Ordering::SeqCst);
        train(c, d, s)
    };
    let report = run_sweep_with(&spec, out.path(), &counting).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 0);
    assert!(report.runs.iter().all(|r| r.status == RunStatus::Skipped));
    assert!(report.runs.iter().all(|r| r.final_test_accuracy.is_some()));
    let after = std::fs::read(out.path().join("aggregate/tanh_l2-0/plane_ebab.csv")).unwrap();
    assert_eq!(before, after);
}

#[test]
fn interrupted_run_is_retrained() {
    let out = tempfile::tempdir().unwrap();
    let spec = small_spec(vec![0, 1]);
    run_sweep(&spec, out.path()).unwrap();
    // simulate a crash before metrics were written
    let victim = run_dir(out.path(), &spec.keys()[1]);
    std::fs::remove_file(victim.join("metrics.json")).unwrap();

    let calls = AtomicUsize::new(0);
    let counting = |c: &NetworkConfig, d: &Dataset, s: &Split| -> Result<(ActivationTrace, TrainMetrics)> {
        calls.fetch_add(1, Ordering::SeqCst);
        train(c, d, s)
    };
    let report = run_sweep_with(&spec, out.path(), &counting).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 1);
    assert_eq!(report.runs[0].status, RunStatus::Skipped);
    assert_eq!(report.runs[1].status, RunStatus::Completed);
}

#[test]
fn injected_fault_is_isolated() {
    let out = tempfile::tempdir().unwrap();
    let spec = small_spec(vec![0, 1, 2]);
    let faulty = |c: &NetworkConfig, d: &Dataset, s: &Split| -> Result<(ActivationTrace, TrainMetrics)> {
        if c.seed == 1 {
            return Err(Error::Numerical {
                layer: 2,
                epoch: Some(3),
            });
        }
        train(c, d, s)
    };
    let report = run_sweep_with(&spec, out.path(), &faulty).unwrap();

    let failed: Vec<_> = report.failures().collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].key.seed, 1);
    match &failed[0].status {
        RunStatus::Failed { error } => assert!(error.contains("layer 2"), "{error}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(
        report
            .runs
            .iter()
            .filter(|r| r.status == RunStatus::Completed)
            .count(),
        2
    );
    assert_eq!(report.group("tanh_l2-0", EstimatorKind::Ebab).unwrap().runs, 2);

    let json = std::fs::read_to_string(out.path().join("sweep_report.json")).unwrap();
    assert!(json.contains("\"failed\""));
}

#[test]
fn dropping_traces_keeps_manifest_and_resume() {
    let out = tempfile::tempdir().unwrap();
    let mut spec = small_spec(vec![0]);
    spec.keep_traces = false;
    run_sweep(&spec, out.path()).unwrap();
    let trace_dir = run_dir(out.path(), &spec.keys()[0]).join("trace");
    let names: Vec<_> = std::fs::read_dir(&trace_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names, vec![MANIFEST_FILE.to_string()]);

    let report = run_sweep(&spec, out.path()).unwrap();
    assert_eq!(report.runs[0].status, RunStatus::Skipped);
}

#[test]
fn sweep_is_deterministic_across_worker_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut spec = small_spec(vec![0, 1, 2]);
    run_sweep(&spec, a.path()).unwrap();
    spec.workers = 3;
    run_sweep(&spec, b.path()).unwrap();
    for rel in [
        "aggregate/scores_ebab.csv",
        "aggregate/tanh_l2-0/plane_uniform.svg",
        "sweep_report.json",
    ] {
        assert_eq!(
            std::fs::read(a.path().join(rel)).unwrap(),
            std::fs::read(b.path().join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn spec_rejects_empty_grid_and_unknown_fields() {
    let out = tempfile::tempdir().unwrap();
    let spec = small_spec(vec![]);
    assert!(matches!(
        run_sweep(&spec, out.path()),
        Err(Error::InvalidArgument(_))
    ));

    let bad = r#"{"activations": [{"kind": "relu"}], "bogus": 1}"#;
    assert!(serde_json::from_str::<SweepSpec>(bad).is_err());
    let ok = r#"{"activations": [{"kind": "relu"}]}"#;
    let spec: SweepSpec = serde_json::from_str(ok).unwrap();
    assert_eq!(spec.seeds, (0..50).collect::<Vec<_>>());
    assert_eq!(spec.l2_lambdas, vec![0.0, 0.005, 0.015, 0.025]);
}
