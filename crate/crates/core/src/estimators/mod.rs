//! Mutual-information estimators for layer activity.
//!
//! Four estimators are available: equal-width binning over a fixed range,
//! entropy-based adaptive binning (EBAB), Gaussian KDE with fixed noise, and
//! adaptive KDE whose noise follows the layer's activation magnitude.

mod binning;
mod kde;

pub use binning::{
    bin_index, discrete_entropy, discretize_layer, ebab_boundaries, mi_binned, uniform_boundaries,
    BinIndices, BinnedMi, BinningMode, BinningSpec,
};
pub use kde::{adaptive_sigma2, kde_mixture_mi, mi_kde, KdeSpec, NoiseScaling, DEFAULT_SIGMA0_SQ};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::trace::ActivationTrace;
use crate::{Error, Matrix, Result};

/// Default bin count for both binning estimators.
pub const DEFAULT_BINS: usize = 30;

/// `I(T;X)` and `I(T;Y)` in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiBits {
    pub itx: f64,
    pub ity: f64,
}

/// Estimator family, as named on the command line and in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Uniform,
    Ebab,
    KdeFixed,
    KdeAdaptive,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Uniform => "uniform",
            EstimatorKind::Ebab => "ebab",
            EstimatorKind::KdeFixed => "kde-fixed",
            EstimatorKind::KdeAdaptive => "kde-adaptive",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(EstimatorKind::Uniform),
            "ebab" => Ok(EstimatorKind::Ebab),
            "kde-fixed" => Ok(EstimatorKind::KdeFixed),
            "kde-adaptive" => Ok(EstimatorKind::KdeAdaptive),
            _ => Err(Error::InvalidArgument(format!("unknown estimator {s:?}"))),
        }
    }
}

/// A fully parameterized estimator for whole traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorSpec {
    /// Equal-width bins. Without an explicit range, the range spans
    /// `[min(0, global min), global max]` over every layer and epoch of the trace.
    Uniform {
        n_bins: usize,
        #[serde(default)]
        range: Option<(f64, f64)>,
    },
    Ebab {
        n_bins: usize,
    },
    KdeFixed {
        sigma2: f64,
    },
    KdeAdaptive {
        sigma0_sq: f64,
        #[serde(default)]
        scaling: NoiseScaling,
    },
}

impl EstimatorSpec {
    pub fn kind(&self) -> EstimatorKind {
        match self {
            EstimatorSpec::Uniform { .. } => EstimatorKind::Uniform,
            EstimatorSpec::Ebab { .. } => EstimatorKind::Ebab,
            EstimatorSpec::KdeFixed { .. } => EstimatorKind::KdeFixed,
            EstimatorSpec::KdeAdaptive { .. } => EstimatorKind::KdeAdaptive,
        }
    }

    /// The spec for `kind` with the given bin count and noise settings.
    pub fn from_kind(kind: EstimatorKind, n_bins: usize, sigma0_sq: f64, scaling: NoiseScaling) -> Self {
        match kind {
            EstimatorKind::Uniform => EstimatorSpec::Uniform { n_bins, range: None },
            EstimatorKind::Ebab => EstimatorSpec::Ebab { n_bins },
            EstimatorKind::KdeFixed => EstimatorSpec::KdeFixed { sigma2: sigma0_sq },
            EstimatorKind::KdeAdaptive => EstimatorSpec::KdeAdaptive { sigma0_sq, scaling },
        }
    }
}

/// One estimate for a (layer, epoch) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MIEstimate {
    pub layer: usize,
    pub epoch: u64,
    pub itx_bits: f64,
    pub ity_bits: f64,
    pub estimator: EstimatorKind,
}

pub(crate) fn check_inputs(activations: &Matrix, labels: &[u8]) -> Result<()> {
    if activations.rows() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} activation rows for {} labels",
            activations.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    if !activations.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument("activations must be finite".into()));
    }
    Ok(())
}

/// Estimates every (layer, epoch) of a trace, ordered by epoch then layer.
pub fn estimate_trace(trace: &ActivationTrace, spec: &EstimatorSpec) -> Result<Vec<MIEstimate>> {
    let labels = trace.manifest().label_vec()?;
    let binning = match *spec {
        EstimatorSpec::Uniform { n_bins, range } => {
            let (lo, hi) = range.unwrap_or_else(|| global_range(trace));
            Some(BinningSpec::uniform(lo, hi, n_bins))
        }
        EstimatorSpec::Ebab { n_bins } => Some(BinningSpec::ebab(n_bins)),
        _ => None,
    };
    let kde = match *spec {
        EstimatorSpec::KdeFixed { sigma2 } => Some(KdeSpec::Fixed { sigma2 }),
        EstimatorSpec::KdeAdaptive { sigma0_sq, scaling } => Some(KdeSpec::Adaptive { sigma0_sq, scaling }),
        _ => None,
    };

    let jobs: Vec<(u64, usize, &Matrix)> = trace
        .snapshots()
        .iter()
        .flat_map(|s| s.layers.iter().enumerate().map(move |(k, m)| (s.epoch, k, m)))
        .collect();
    jobs.into_par_iter()
        .map(|(epoch, layer, acts)| {
            let bits = if let Some(b) = &binning {
                mi_binned(acts, &labels, b)?.bits
            } else {
                mi_kde(acts, &labels, kde.as_ref().unwrap())?
            };
            Ok(MIEstimate {
                layer,
                epoch,
                itx_bits: bits.itx,
                ity_bits: bits.ity,
                estimator: spec.kind(),
            })
        })
        .collect()
}

/// `[min(0, smallest activation), largest activation]` over the whole trace.
pub fn global_range(trace: &ActivationTrace) -> (f64, f64) {
    let mut lo = 0.0f64;
    let mut hi = f64::NEG_INFINITY;
    for v in trace
        .snapshots()
        .iter()
        .flat_map(|s| &s.layers)
        .flat_map(|m| m.as_slice())
    {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if hi <= lo || hi.is_nan() || lo.is_nan() {
        hi = lo + 1.0;
    }
    (lo, hi)
}

#[derive(Debug, Serialize, Deserialize)]
struct EstimateRow {
    run_id: String,
    estimator: EstimatorKind,
    layer: usize,
    epoch: u64,
    itx_bits: f64,
    ity_bits: f64,
}

/// Writes estimates as CSV with columns
/// `run_id,estimator,layer,epoch,itx_bits,ity_bits`.
pub fn write_estimates_csv(path: &Path, run_id: &str, estimates: &[MIEstimate]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for e in estimates {
        w.serialize(EstimateRow {
            run_id: run_id.to_string(),
            estimator: e.estimator,
            layer: e.layer,
            epoch: e.epoch,
            itx_bits: e.itx_bits,
            ity_bits: e.ity_bits,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an estimates CSV, returning `(run_id, estimate)` pairs in file order.
pub fn read_estimates_csv(path: &Path) -> Result<Vec<(String, MIEstimate)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize::<EstimateRow>()
        .map(|row| {
            let row = row.map_err(|e| Error::csv(path, e))?;
            Ok((
                row.run_id,
                MIEstimate {
                    layer: row.layer,
                    epoch: row.epoch,
                    itx_bits: row.itx_bits,
                    ity_bits: row.ity_bits,
                    estimator: row.estimator,
                },
            ))
        })
        .collect()
}
