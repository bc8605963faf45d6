//! Information planes, compression scores, activation maxima and correlations.

use serde::{Deserialize, Serialize};

use crate::estimators::MIEstimate;
use crate::trace::ActivationTrace;
use crate::{Error, Matrix, Result};

/// `I(T;X)` and `I(T;Y)` for `N` layers over `M` snapshot epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoPlane {
    pub layers: Vec<usize>,
    pub epochs: Vec<u64>,
    /// `N × M`, bits.
    pub itx: Matrix,
    /// `N × M`, bits.
    pub ity: Matrix,
}

impl InfoPlane {
    pub fn new(layers: Vec<usize>, epochs: Vec<u64>, itx: Matrix, ity: Matrix) -> Result<Self> {
        let shape = (layers.len(), epochs.len());
        if itx.shape() != shape || ity.shape() != shape {
            return Err(Error::InvalidArgument(format!(
                "plane matrices must be {}x{}",
                shape.0, shape.1
            )));
        }
        if epochs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "plane epochs must be strictly increasing".into(),
            ));
        }
        Ok(InfoPlane {
            layers,
            epochs,
            itx,
            ity,
        })
    }

    /// Assembles a plane from estimates covering a full layer × epoch grid.
    pub fn from_estimates(estimates: &[MIEstimate]) -> Result<Self> {
        let mut layers: Vec<usize> = estimates.iter().map(|e| e.layer).collect();
        layers.sort_unstable();
        layers.dedup();
        let mut epochs: Vec<u64> = estimates.iter().map(|e| e.epoch).collect();
        epochs.sort_unstable();
        epochs.dedup();

        let (n, m) = (layers.len(), epochs.len());
        let mut itx = Matrix::from_vec(n, m, vec![f64::NAN; n * m])?;
        let mut ity = itx.clone();
        let mut filled = vec![false; n * m];
        for e in estimates {
            let r = layers.binary_search(&e.layer).unwrap();
            let c = epochs.binary_search(&e.epoch).unwrap();
            if std::mem::replace(&mut filled[r * m + c], true) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate estimate for layer {} epoch {}",
                    e.layer, e.epoch
                )));
            }
            itx.set(r, c, e.itx_bits);
            ity.set(r, c, e.ity_bits);
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            return Err(Error::InvalidArgument(format!(
                "no estimate for layer {} epoch {}",
                layers[missing / m],
                epochs[missing % m]
            )));
        }
        InfoPlane::new(layers, epochs, itx, ity)
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn n_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty() || self.epochs.is_empty()
    }

    /// All layers except the last (the softmax output in a network plane).
    pub fn hidden_layers(&self) -> Vec<usize> {
        self.layers[..self.layers.len().saturating_sub(1)].to_vec()
    }

    fn row_of(&self, layer: usize) -> Result<usize> {
        self.layers
            .iter()
            .position(|&l| l == layer)
            .ok_or_else(|| Error::InvalidArgument(format!("layer {layer} is not in the plane")))
    }

    /// Largest minus smallest final-epoch `I(T;X)` among `layers`.
    pub fn final_itx_spread(&self, layers: &[usize]) -> Result<f64> {
        if layers.is_empty() || self.epochs.is_empty() {
            return Err(Error::InvalidArgument("spread needs layers and epochs".into()));
        }
        let last = self.epochs.len() - 1;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &l in layers {
            let v = self.itx.get(self.row_of(l)?, last);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(hi - lo)
    }
}

/// Entrywise mean of planes that share layers and epochs.
pub fn average_planes(planes: &[InfoPlane]) -> Result<InfoPlane> {
    let first = planes
        .first()
        .ok_or_else(|| Error::InvalidArgument("no planes to average".into()))?;
    for p in planes {
        if p.layers != first.layers || p.epochs != first.epochs {
            return Err(Error::InvalidArgument("planes differ in layers or epochs".into()));
        }
    }
    let k = planes.len() as f64;
    let mean = |pick: fn(&InfoPlane) -> &Matrix| -> Result<Matrix> {
        let len = first.itx.as_slice().len();
        let data = (0..len)
            .map(|i| planes.iter().map(|p| pick(p).as_slice()[i]).sum::<f64>() / k)
            .collect();
        Matrix::from_vec(first.n_layers(), first.n_epochs(), data)
    };
    InfoPlane::new(
        first.layers.clone(),
        first.epochs.clone(),
        mean(|p| &p.itx)?,
        mean(|p| &p.ity)?,
    )
}

/// Compression of a network's layers, each `1 - final / max` over epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionReport {
    /// Mean of `per_layer_scores` over `included_layers`.
    pub network_score: f64,
    /// One score per plane layer, in plane order.
    pub per_layer_scores: Vec<f64>,
    pub last_layer_score: f64,
    pub included_layers: Vec<usize>,
}

fn layer_score(row: &[f64]) -> f64 {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    if max <= 0.0 {
        return 0.0;
    }
    (1.0 - row[row.len() - 1] / max).clamp(0.0, 1.0)
}

/// Scores every layer and averages over `layer_subset`.
pub fn compression_score(plane: &InfoPlane, layer_subset: &[usize]) -> Result<CompressionReport> {
    if plane.is_empty() {
        return Err(Error::InvalidArgument("empty information plane".into()));
    }
    if layer_subset.is_empty() {
        return Err(Error::InvalidArgument("empty layer subset".into()));
    }
    let per_layer_scores: Vec<f64> = (0..plane.n_layers())
        .map(|r| layer_score(plane.itx.row(r)))
        .collect();
    let mut total = 0.0;
    for &l in layer_subset {
        total += per_layer_scores[plane.row_of(l)?];
    }
    Ok(CompressionReport {
        network_score: total / layer_subset.len() as f64,
        last_layer_score: *per_layer_scores.last().unwrap(),
        per_layer_scores,
        included_layers: layer_subset.to_vec(),
    })
}

/// Largest absolute activation per epoch, per layer and network-wide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxActivationReport {
    pub epochs: Vec<u64>,
    /// `per_layer[e][k]` is layer `k`'s maximum at `epochs[e]`.
    pub per_layer: Vec<Vec<f64>>,
    pub network: Vec<f64>,
}

pub fn max_activation_report(trace: &ActivationTrace) -> Result<MaxActivationReport> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("trace has no snapshots".into()));
    }
    let per_layer: Vec<Vec<f64>> = trace
        .snapshots()
        .iter()
        .map(|s| s.layers.iter().map(Matrix::max_abs).collect())
        .collect();
    let network = per_layer
        .iter()
        .map(|row| row.iter().fold(0.0f64, |m, &v| m.max(v)))
        .collect();
    Ok(MaxActivationReport {
        epochs: trace.epochs().to_vec(),
        per_layer,
        network,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub n: usize,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Ranks starting at 1; ties share their average rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Pearson and Spearman correlation between paired sequences.
pub fn correlate(scores: &[f64], accuracies: &[f64]) -> Result<Correlation> {
    if scores.len() != accuracies.len() {
        return Err(Error::InvalidArgument(format!(
            "{} scores but {} accuracies",
            scores.len(),
            accuracies.len()
        )));
    }
    if scores.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 3 pairs, got {}",
            scores.len()
        )));
    }
    if scores.iter().chain(accuracies).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "non-finite value in correlation input".into(),
        ));
    }
    let zero_variance = || Error::UndefinedCorrelation("an input has zero variance".into());
    let pearson_r = pearson(scores, accuracies).ok_or_else(zero_variance)?;
    let spearman_rho = pearson(&ranks(scores), &ranks(accuracies)).ok_or_else(zero_variance)?;
    Ok(Correlation {
        pearson_r,
        spearman_rho,
        n: scores.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(rows: &[&[f64]]) -> InfoPlane {
        let m = rows[0].len();
        let itx = Matrix::from_rows(rows).unwrap();
        InfoPlane::new(
            (0..rows.len()).collect(),
            (0..m as u64).collect(),
            itx.clone(),
            itx.map(|v| v / 10.0),
        )
        .unwrap()
    }

    #[test]
    fn eq6_unit_cases() {
        let p = plane(&[&[1.0, 2.0, 3.0], &[0.5, 0.5, 4.0]]);
        assert_eq!(compression_score(&p, &[0, 1]).unwrap().network_score, 0.0);
        let p = plane(&[&[4.0, 2.0]]);
        assert_eq!(compression_score(&p, &[0]).unwrap().network_score, 0.5);
        let p = plane(&[&[4.0, 2.0], &[3.0, 3.0]]);
        let r = compression_score(&p, &[0, 1]).unwrap();
        assert_eq!(r.network_score, 0.25);
        assert_eq!(r.per_layer_scores, vec![0.5, 0.0]);
        assert_eq!(r.last_layer_score, 0.0);
    }

    #[test]
    fn zero_layer_scores_zero_and_empty_subset_errors() {
        let p = plane(&[&[0.0, 0.0], &[4.0, 1.0]]);
        let r = compression_score(&p, &[0, 1]).unwrap();
        assert_eq!(r.per_layer_scores, vec![0.0, 0.75]);
        assert!(compression_score(&p, &[]).is_err());
        assert!(compression_score(&p, &[7]).is_err());
    }

    #[test]
    fn averaging() {
        let a = plane(&[&[2.0]]);
        let b = plane(&[&[4.0]]);
        let avg = average_planes(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(avg.itx.as_slice(), &[3.0]);
        assert_eq!(average_planes(&[a.clone(), a.clone()]).unwrap(), a);
        assert_eq!(
            average_planes(&[b.clone(), a.clone()]).unwrap(),
            average_planes(&[a.clone(), b]).unwrap()
        );
        let wider = plane(&[&[1.0, 2.0]]);
        assert!(average_planes(&[a, wider]).is_err());
    }

    #[test]
    fn plane_from_estimates_requires_full_grid() {
        use crate::estimators::EstimatorKind;
        let est = |layer, epoch, v| MIEstimate {
            layer,
            epoch,
            itx_bits: v,
            ity_bits: v / 2.0,
            estimator: EstimatorKind::Ebab,
        };
        let p =
            InfoPlane::from_estimates(&[est(1, 10, 3.0), est(0, 10, 1.0), est(0, 0, 2.0), est(1, 0, 4.0)])
                .unwrap();
        assert_eq!(p.layers, vec![0, 1]);
        assert_eq!(p.epochs, vec![0, 10]);
        assert_eq!(p.itx.as_slice(), &[2.0, 1.0, 4.0, 3.0]);
        assert!(InfoPlane::from_estimates(&[est(0, 0, 1.0), est(1, 10, 1.0)]).is_err());
        assert!(InfoPlane::from_estimates(&[est(0, 0, 1.0), est(0, 0, 1.0)]).is_err());
    }

    #[test]
    fn correlation_cases() {
        let acc = [0.7, 0.9, 0.8, 0.95];
        let r = correlate(&acc, &acc).unwrap();
        assert!((r.pearson_r - 1.0).abs() < 1e-15 && (r.spearman_rho - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = acc.iter().map(|v| -v).collect();
        let r = correlate(&neg, &acc).unwrap();
        assert!((r.pearson_r + 1.0).abs() < 1e-15);
        assert!(matches!(
            correlate(&[0.3; 4], &acc),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(correlate(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(correlate(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn spearman_uses_average_ranks() {
        assert_eq!(ranks(&[10.0, 20.0, 20.0, 5.0]), vec![2.0, 3.5, 3.5, 1.0]);
        // monotone but nonlinear
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [1.0, 4.0, 9.0, 16.0, 100.0];
        let r = correlate(&x, &y).unwrap();
        assert!((r.spearman_rho - 1.0).abs() < 1e-15);
        assert!(r.pearson_r < 1.0);
    }
}
