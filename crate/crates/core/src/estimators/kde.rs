//! Gaussian-noise estimators.
//!
//! Each activation vector is treated as the centre of an isotropic Gaussian
//! with variance `σ²`. The mixture entropy is bounded above with the pairwise
//! KL bound; subtracting the component entropy leaves
//!
//! ```text
//! I = -(1/P) Σ_i log2[ (1/P) Σ_j exp(-‖t_i - t_j‖² / (2σ²)) ]
//! ```

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_inputs, MiBits};
use crate::{Error, Matrix, Result};

/// Reference noise variance for the adaptive estimator.
pub const DEFAULT_SIGMA0_SQ: f64 = 1e-3;

// exp(-x) is exactly zero in f64 beyond this point, so skipped terms cannot
// change the sum
const EXP_UNDERFLOW: f64 = 746.0;

/// How the adaptive variance follows the layer's maximum magnitude `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// `σ² = σ0² · m²`: noise standard deviation proportional to activity scale.
    #[default]
    Quadratic,
    /// `σ² = σ0² · m`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KdeSpec {
    Fixed { sigma2: f64 },
    Adaptive { sigma0_sq: f64, scaling: NoiseScaling },
}

impl KdeSpec {
    pub fn adaptive() -> Self {
        KdeSpec::Adaptive {
            sigma0_sq: DEFAULT_SIGMA0_SQ,
            scaling: NoiseScaling::Quadratic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            KdeSpec::Fixed { sigma2 } => sigma2,
            KdeSpec::Adaptive { sigma0_sq, .. } => sigma0_sq,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {v}"
            )));
        }
        Ok(())
    }
}

/// Noise variance for a layer whose maximum is `max`.
pub fn adaptive_sigma2(max: f64, sigma0_sq: f64, scaling: NoiseScaling) -> Result<f64> {
    match scaling {
        NoiseScaling::Quadratic => Ok(sigma0_sq * max * max),
        NoiseScaling::Literal if max < 0.0 => Err(Error::ScalingMode { max }),
        NoiseScaling::Literal => Ok(sigma0_sq * max),
    }
}

/// Pairwise upper bound on the information carried by the points, in bits.
pub fn kde_mixture_mi(points: &Matrix, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be positive, got {sigma2}"
        )));
    }
    let n = points.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("no points".into()));
    }
    if !points.as_slice().iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical {
            layer: 0,
            epoch: None,
        });
    }
    let inv = 1.0 / (2.0 * sigma2);

    // The j = i term contributes exp(0) = 1 and is the largest exponent, so
    // each inner sum is ≥ 1 and its log needs no max-shift.
    let log_sums: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ti = points.row(i);
            let mut sum = 0.0;
            for j in 0..n {
                let d2: f64 = ti.iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                let arg = d2 * inv;
                if arg < EXP_UNDERFLOW {
                    sum += (-arg).exp();
                }
            }
            sum.ln()
        })
        .collect();

    let mean_log: f64 = log_sums.iter().sum::<f64>() / n as f64;
    let bits = (n as f64).log2() - mean_log / std::f64::consts::LN_2;
    Ok(bits.clamp(0.0, (n as f64).log2()))
}

/// KDE estimate of `I(T;X)` and `I(T;Y)` for one layer at one epoch.
pub fn mi_kde(activations: &Matrix, labels: &[u8], spec: &KdeSpec) -> Result<MiBits> {
    spec.validate()?;
    check_inputs(activations, labels)?;
    let sigma2 = match *spec {
        KdeSpec::Fixed { sigma2 } => sigma2,
        KdeSpec::Adaptive { sigma0_sq, scaling } => {
            let max = activations.max_abs();
            if max == 0.0 {
                return Ok(MiBits { itx: 0.0, ity: 0.0 });
            }
            adaptive_sigma2(max, sigma0_sq, scaling)?
        }
    };

    let itx = kde_mixture_mi(activations, sigma2)?;
    let n = labels.len() as f64;
    let mut conditional = 0.0;
    for y in [0u8, 1] {
        let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == y).collect();
        if rows.is_empty() {
            continue;
        }
        let p = rows.len() as f64 / n;
        conditional += p * kde_mixture_mi(&activations.select_rows(&rows), sigma2)?;
    }
    Ok(MiBits {
        itx,
        ity: (itx - conditional).max(0.0),
    })
}
