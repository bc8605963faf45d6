//! Grids of training runs over activation functions, L2 penalties and seeds.
//!
//! Layout under the output directory:
//!
//! ```text
//! runs/<activation>_l2-<λ>/seed-<s>/trace/           activation trace
//! runs/<activation>_l2-<λ>/seed-<s>/metrics.json     per-snapshot accuracy and loss
//! runs/<activation>_l2-<λ>/seed-<s>/estimates_<e>.csv
//! aggregate/<activation>_l2-<λ>/plane_<e>.csv        plane averaged over seeds
//! aggregate/<activation>_l2-<λ>/plane_<e>.svg
//! aggregate/<activation>_l2-<λ>/compression_<e>.json
//! aggregate/scores_<e>.csv                           run_id, layer, score, accuracy
//! sweep_report.json
//! ```
//!
//! A run whose manifest, metrics and estimate files are all present is not
//! retrained, so an interrupted sweep can be restarted with the same command.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    average_planes, compression_score, correlate, CompressionReport, Correlation, InfoPlane,
};
use crate::dataset::{generate_dataset, load_dataset, make_split, Dataset, Split};
use crate::estimators::{
    estimate_trace, read_estimates_csv, write_estimates_csv, EstimatorKind, EstimatorSpec, MIEstimate,
    DEFAULT_BINS,
};
use crate::network::{train, ActivationKind, NetworkConfig, TrainMetrics};
use crate::plot::{render_information_plane, PlotStyle};
use crate::trace::{read_manifest, write_trace, ActivationTrace, MANIFEST_FILE};
use crate::{Error, Result};

/// Which accuracy is paired with compression scores.
pub const ACCURACY_CHOICE: &str = "final-epoch test accuracy";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Generated { seed: u64 },
    File { path: PathBuf },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Generated { seed: 0 }
    }
}

impl DataSpec {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DataSpec::Generated { seed } => Ok(generate_dataset(*seed)),
            DataSpec::File { path } => load_dataset(path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub activations: Vec<ActivationKind>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_l2_lambdas")]
    pub l2_lambdas: Vec<f64>,
    /// Shared settings; `activation`, `l2_lambda` and `seed` are overridden per run.
    #[serde(default)]
    pub base: NetworkConfig,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorSpec>,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Delete snapshot files once a run's estimates are written.
    #[serde(default = "default_keep_traces")]
    pub keep_traces: bool,
}

fn default_seeds() -> Vec<u64> {
    (0..50).collect()
}
fn default_l2_lambdas() -> Vec<f64> {
    vec![0.0, 0.005, 0.015, 0.025]
}
fn default_estimators() -> Vec<EstimatorSpec> {
    vec![
        EstimatorSpec::Ebab { n_bins: DEFAULT_BINS },
        EstimatorSpec::Uniform {
            n_bins: DEFAULT_BINS,
            range: None,
        },
    ]
}
fn default_train_fraction() -> f64 {
    0.8
}
fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}
fn default_keep_traces() -> bool {
    true
}

impl SweepSpec {
    pub fn new(activations: Vec<ActivationKind>, base: NetworkConfig) -> Self {
        SweepSpec {
            activations,
            seeds: default_seeds(),
            l2_lambdas: default_l2_lambdas(),
            base,
            estimators: default_estimators(),
            data: DataSpec::default(),
            train_fraction: default_train_fraction(),
            split_seed: 0,
            workers: default_workers(),
            keep_traces: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.activations.is_empty() || self.seeds.is_empty() || self.l2_lambdas.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep needs at least one activation, seed and L2 penalty".into(),
            ));
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidArgument(
                "sweep needs at least one estimator".into(),
            ));
        }
        let mut kinds: Vec<EstimatorKind> = self.estimators.iter().map(EstimatorSpec::kind).collect();
        kinds.sort_by_key(|k| k.name());
        kinds.dedup();
        if kinds.len() != self.estimators.len() {
            return Err(Error::InvalidArgument("estimator kinds must be distinct".into()));
        }
        for key in self.keys() {
            self.config_for(&key).validate()?;
        }
        Ok(())
    }

    /// Every (activation, λ, seed) in a fixed order.
    pub fn keys(&self) -> Vec<RunKey> {
        let mut keys = Vec::new();
        for &activation in &self.activations {
            for &l2_lambda in &self.l2_lambdas {
                for &seed in &self.seeds {
                    keys.push(RunKey {
                        activation,
                        l2_lambda,
                        seed,
                    });
                }
            }
        }
        keys
    }

    pub fn config_for(&self, key: &RunKey) -> NetworkConfig {
        NetworkConfig {
            activation: key.activation,
            l2_lambda: key.l2_lambda,
            seed: key.seed,
            ..self.base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunKey {
    pub activation: ActivationKind,
    pub l2_lambda: f64,
    pub seed: u64,
}

impl RunKey {
    pub fn group(&self) -> String {
        format!("{}_l2-{}", self.activation.label(), self.l2_lambda)
    }

    pub fn run_id(&self) -> String {
        format!("{}/seed-{}", self.group(), self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// Found complete on disk and left untouched.
    Skipped,
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: RunKey,
    pub run_id: String,
    #[serde(flatten)]
    pub status: RunStatus,
    pub final_test_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub activation: ActivationKind,
    pub l2_lambda: f64,
    pub estimator: EstimatorKind,
    pub runs: usize,
    /// Score of the seed-averaged plane over hidden layers.
    pub averaged: CompressionReport,
    pub mean_test_accuracy: f64,
    /// Final-epoch `I(T;X)` range across hidden layers of the averaged plane.
    pub final_itx_spread: f64,
    pub network_score_vs_accuracy: CorrelationOutcome,
    pub last_layer_score_vs_accuracy: CorrelationOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CorrelationOutcome {
    Value(Correlation),
    Undefined { undefined: String },
}

impl From<Result<Correlation>> for CorrelationOutcome {
    fn from(r: Result<Correlation>) -> Self {
        match r {
            Ok(c) => CorrelationOutcome::Value(c),
            Err(e) => CorrelationOutcome::Undefined {
                undefined: e.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub runs: Vec<RunRecord>,
    pub groups: Vec<GroupSummary>,
    /// Averaged-plane hidden-layer score against mean accuracy across groups,
    /// one entry per estimator.
    pub across_groups: Vec<(EstimatorKind, CorrelationOutcome)>,
    pub accuracy: String,
}

impl SweepReport {
    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs
            .iter()
            .filter(|r| matches!(r.status, RunStatus::Failed { .. }))
    }

    pub fn group(&self, group: &str, estimator: EstimatorKind) -> Option<&GroupSummary> {
        self.groups
            .iter()
            .find(|g| g.group == group && g.estimator == estimator)
    }
}

pub fn run_dir(out_dir: &Path, key: &RunKey) -> PathBuf {
    out_dir
        .join("runs")
        .join(key.group())
        .join(format!("seed-{}", key.seed))
}

pub fn estimates_file(run_dir: &Path, kind: EstimatorKind) -> PathBuf {
    run_dir.join(format!("estimates_{}.csv", kind.name()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn read_metrics(run_dir: &Path) -> Result<TrainMetrics> {
    read_json(&run_dir.join("metrics.json"))
}

/// Training function used by the sweep; replaceable for testing.
pub type TrainFn<'a> =
    dyn Fn(&NetworkConfig, &Dataset, &Split) -> Result<(ActivationTrace, TrainMetrics)> + Sync + 'a;

pub fn run_sweep(spec: &SweepSpec, out_dir: &Path) -> Result<SweepReport> {
    run_sweep_with(spec, out_dir, &train)
}

pub fn run_sweep_with(spec: &SweepSpec, out_dir: &Path, train_fn: &TrainFn<'_>) -> Result<SweepReport> {
    spec.validate()?;
    let dataset = spec.data.load()?;
    let split = make_split(&dataset, spec.train_fraction, spec.split_seed)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start workers: {e}")))?;
    let keys = spec.keys();
    let runs: Vec<RunRecord> = pool.install(|| {
        keys.par_iter()
            .map(|key| {
                let status = match execute_run(spec, out_dir, key, &dataset, &split, train_fn) {
                    Ok(true) => RunStatus::Completed,
                    Ok(false) => RunStatus::Skipped,
                    Err(e) => RunStatus::Failed { error: e.to_string() },
                };
                let final_test_accuracy = match status {
                    RunStatus::Failed { .. } => None,
                    _ => read_metrics(&run_dir(out_dir, key))
                        .ok()
                        .and_then(|m| m.last().map(|r| r.test_accuracy)),
                };
                RunRecord {
                    key: *key,
                    run_id: key.run_id(),
                    status,
                    final_test_accuracy,
                }
            })
            .collect()
    });

    let (groups, across_groups) = aggregate(spec, out_dir, &runs)?;
    let report = SweepReport {
        runs,
        groups,
        across_groups,
        accuracy: ACCURACY_CHOICE.into(),
    };
    write_json(&out_dir.join("sweep_report.json"), &report)?;
    Ok(report)
}

fn run_is_complete(spec: &SweepSpec, dir: &Path) -> bool {
    read_manifest(&dir.join("trace")).is_ok()
        && read_metrics(dir).is_ok()
        && spec
            .estimators
            .iter()
            .all(|e| estimates_file(dir, e.kind()).is_file())
}

/// Trains and estimates one run. Returns `Ok(false)` when it was already done.
fn execute_run(
    spec: &SweepSpec,
    out_dir: &Path,
    key: &RunKey,
    dataset: &Dataset,
    split: &Split,
    train_fn: &TrainFn<'_>,
) -> Result<bool> {
    let dir = run_dir(out_dir, key);
    if run_is_complete(spec, &dir) {
        return Ok(false);
    }
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let config = spec.config_for(key);
    let (trace, metrics) = train_fn(&config, dataset, split)?;
    let trace_dir = dir.join("trace");
    write_trace(&trace, &trace_dir)?;
    for est in &spec.estimators {
        let estimates = estimate_trace(&trace, est)?;
        write_estimates_csv(&estimates_file(&dir, est.kind()), &key.run_id(), &estimates)?;
    }
    if !spec.keep_traces {
        for entry in fs::read_dir(&trace_dir).map_err(|e| Error::io(&trace_dir, e))? {
            let path = entry.map_err(|e| Error::io(&trace_dir, e))?.path();
            if path.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    // metrics last: its presence marks the run as finished
    write_json(&dir.join("metrics.json"), &metrics)?;
    Ok(true)
}

fn load_plane(path: &Path) -> Result<InfoPlane> {
    let estimates: Vec<MIEstimate> = read_estimates_csv(path)?.into_iter().map(|(_, e)| e).collect();
    InfoPlane::from_estimates(&estimates)
}

#[derive(Debug, Serialize)]
struct ScoreRow<'a> {
    run_id: &'a str,
    layer: String,
    score: f64,
    accuracy: f64,
}

#[derive(Debug, Serialize)]
struct GroupFile<'a> {
    summary: &'a GroupSummary,
    per_run: Vec<(&'a str, &'a CompressionReport)>,
}

#[allow(clippy::type_complexity)]
fn aggregate(
    spec: &SweepSpec,
    out_dir: &Path,
    runs: &[RunRecord],
) -> Result<(Vec<GroupSummary>, Vec<(EstimatorKind, CorrelationOutcome)>)> {
    let agg_dir = out_dir.join("aggregate");
    fs::create_dir_all(&agg_dir).map_err(|e| Error::io(&agg_dir, e))?;
    let mut groups = Vec::new();
    let mut across = Vec::new();

    for est in &spec.estimators {
        let kind = est.kind();
        let scores_path = agg_dir.join(format!("scores_{}.csv", kind.name()));
        let mut scores = csv::Writer::from_path(&scores_path).map_err(|e| Error::csv(&scores_path, e))?;
        let mut group_points = (Vec::new(), Vec::new());

        for &activation in &spec.activations {
            for &l2_lambda in &spec.l2_lambdas {
                let members: Vec<&RunRecord> = runs
                    .iter()
                    .filter(|r| {
                        r.key.activation == activation
                            && r.key.l2_lambda == l2_lambda
                            && !matches!(r.status, RunStatus::Failed { .. })
                    })
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let mut planes = Vec::new();
                let mut reports = Vec::new();
                let mut accuracies = Vec::new();
                for r in &members {
                    let plane = load_plane(&estimates_file(&run_dir(out_dir, &r.key), kind))?;
                    let report = compression_score(&plane, &plane.hidden_layers())?;
                    let acc = r.final_test_accuracy.unwrap_or(f64::NAN);
                    for (layer, s) in plane.layers.iter().zip(&report.per_layer_scores) {
                        scores
                            .serialize(ScoreRow {
                                run_id: &r.run_id,
                                layer: layer.to_string(),
                                score: *s,
                                accuracy: acc,
                            })
                            .map_err(|e| Error::csv(&scores_path, e))?;
                    }
                    scores
                        .serialize(ScoreRow {
                            run_id: &r.run_id,
                            layer: "network".into(),
                            score: report.network_score,
                            accuracy: acc,
                        })
                        .map_err(|e| Error::csv(&scores_path, e))?;
                    planes.push(plane);
                    reports.push(report);
                    accuracies.push(acc);
                }

                let mean_plane = average_planes(&planes)?;
                let averaged = compression_score(&mean_plane, &mean_plane.hidden_layers())?;
                let mean_test_accuracy = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
                let network: Vec<f64> = reports.iter().map(|r| r.network_score).collect();
                let last: Vec<f64> = reports.iter().map(|r| r.last_layer_score).collect();
                let key = members[0].key;
                let summary = GroupSummary {
                    group: key.group(),
                    activation,
                    l2_lambda,
                    estimator: kind,
                    runs: members.len(),
                    final_itx_spread: mean_plane.final_itx_spread(&mean_plane.hidden_layers())?,
                    averaged,
                    mean_test_accuracy,
                    network_score_vs_accuracy: correlate(&network, &accuracies).into(),
                    last_layer_score_vs_accuracy: correlate(&last, &accuracies).into(),
                };

                let gdir = agg_dir.join(key.group());
                fs::create_dir_all(&gdir).map_err(|e| Error::io(&gdir, e))?;
                let mean_estimates = plane_estimates(&mean_plane, kind);
                write_estimates_csv(
                    &gdir.join(format!("plane_{}.csv", kind.name())),
                    "mean",
                    &mean_estimates,
                )?;
                let style = PlotStyle {
                    title: Some(format!(
                        "{} ({}, {} seeds)",
                        key.group(),
                        kind.name(),
                        members.len()
                    )),
                    ..Default::default()
                };
                let svg_path = gdir.join(format!("plane_{}.svg", kind.name()));
                fs::write(&svg_path, render_information_plane(&mean_plane, &style))
                    .map_err(|e| Error::io(&svg_path, e))?;
                write_json(
                    &gdir.join(format!("compression_{}.json", kind.name())),
                    &GroupFile {
                        summary: &summary,
                        per_run: members.iter().map(|r| r.run_id.as_str()).zip(&reports).collect(),
                    },
                )?;

                group_points.0.push(summary.averaged.network_score);
                group_points.1.push(mean_test_accuracy);
                groups.push(summary);
            }
        }
        scores.flush().map_err(|e| Error::io(&scores_path, e))?;
        across.push((kind, correlate(&group_points.0, &group_points.1).into()));
    }
    Ok((groups, across))
}

/// Flattens a plane back into per-(layer, epoch) estimates.
pub fn plane_estimates(plane: &InfoPlane, kind: EstimatorKind) -> Vec<MIEstimate> {
    let mut out = Vec::with_capacity(plane.n_layers() * plane.n_epochs());
    for (c, &epoch) in plane.epochs.iter().enumerate() {
        for (r, &layer) in plane.layers.iter().enumerate() {
            out.push(MIEstimate {
                layer,
                epoch,
                itx_bits: plane.itx.get(r, c),
                ity_bits: plane.ity.get(r, c),
                estimator: kind,
            });
        }
    }
    out
}
