//! Discretization-based estimators.
//!
//! A layer's activity is discretized unit by unit and the vector of bin
//! indices is treated as one symbol. Because the network is deterministic,
//! `I(T;X) = H(T̂)`, and `I(T;Y) = H(T̂) - Σ_y p(y) H(T̂ | Y=y)`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_inputs, MiBits};
use crate::{Error, Matrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BinningMode {
    /// Equal-width bins over a fixed `[lo, hi]`.
    UniformFixedRange { lo: f64, hi: f64 },
    /// Equal counts of distinct values per bin, recomputed for every layer and epoch.
    Ebab,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub mode: BinningMode,
    pub n_bins: usize,
}

impl BinningSpec {
    pub fn ebab(n_bins: usize) -> Self {
        BinningSpec {
            mode: BinningMode::Ebab,
            n_bins,
        }
    }

    pub fn uniform(lo: f64, hi: f64, n_bins: usize) -> Self {
        BinningSpec {
            mode: BinningMode::UniformFixedRange { lo, hi },
            n_bins,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 bins, got {}",
                self.n_bins
            )));
        }
        if let BinningMode::UniformFixedRange { lo, hi } = self.mode {
            if !lo.is_finite() || !hi.is_finite() || lo >= hi {
                return Err(Error::InvalidArgument(format!(
                    "uniform range needs finite lo < hi, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Result of a binned estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinnedMi {
    pub bits: MiBits,
    /// Values outside a uniform range; they were counted in the edge bins.
    pub range_violations: usize,
}

/// Sorted distinct values.
fn unique_sorted(values: &[f64]) -> Vec<f64> {
    let mut u = values.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup_by(|a, b| a == b);
    u
}

/// Bin boundaries that give every bin the same number of distinct values.
///
/// Repeated values count once. With `u` distinct values the result has
/// `min(n_bins, u) - 1` boundaries, each strictly above the last value of
/// its lower group and at most the first value of its upper group (the
/// midpoint when representable).
pub fn ebab_boundaries(values: &[f64], n_bins: usize) -> Vec<f64> {
    let uniques = unique_sorted(values);
    let groups = n_bins.min(uniques.len());
    (1..groups)
        .map(|k| {
            let start = k * uniques.len() / groups;
            let (a, b) = (uniques[start - 1], uniques[start]);
            let mid = 0.5 * a + 0.5 * b;
            if mid > a && mid <= b {
                mid
            } else {
                b
            }
        })
        .collect()
}

/// `n_bins - 1` equally spaced interior boundaries of `[lo, hi]`.
pub fn uniform_boundaries(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    let width = (hi - lo) / n_bins as f64;
    (1..n_bins).map(|k| lo + k as f64 * width).collect()
}

/// Bin index of one value: the number of boundaries at or below it.
#[inline]
pub fn bin_index(value: f64, boundaries: &[f64]) -> u32 {
    boundaries.partition_point(|&b| b <= value) as u32
}

/// Row-major matrix of bin indices, one row per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinIndices {
    cols: usize,
    data: Vec<u32>,
}

impl BinIndices {
    pub fn rows(&self) -> usize {
        self.data.len().checked_div(self.cols).unwrap_or(0)
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u32]> {
        self.data.chunks_exact(self.cols.max(1))
    }
}

pub fn discretize_layer(activations: &Matrix, boundaries: &[f64]) -> BinIndices {
    BinIndices {
        cols: activations.cols(),
        data: activations
            .as_slice()
            .iter()
            .map(|&v| bin_index(v, boundaries))
            .collect(),
    }
}

/// Plug-in entropy in bits of the empirical distribution over whole rows.
pub fn discrete_entropy<'a, I, R>(rows: I) -> f64
where
    I: IntoIterator<Item = &'a R>,
    R: AsRef<[u32]> + ?Sized + 'a,
{
    let mut counts: HashMap<&[u32], usize> = HashMap::new();
    let mut total = 0usize;
    for r in rows {
        *counts.entry(r.as_ref()).or_default() += 1;
        total += 1;
    }
    entropy_of_counts(counts.into_values().collect(), total)
}

/// Entropy in bits from symbol counts. Counts are summed in sorted order so
/// the result does not depend on hash iteration order.
fn entropy_of_counts(mut counts: Vec<usize>, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    counts.sort_unstable();
    let n = total as f64;
    // log2 n - Σ c log2 c / n is exact when every count is a power of two
    let weighted: f64 = counts
        .iter()
        .filter(|&&c| c > 1)
        .map(|&c| c as f64 * (c as f64).log2())
        .sum();
    (n.log2() - weighted / n).clamp(0.0, n.log2())
}

/// Entropy of the rows and the label-conditional entropies, as
/// `(H(T), [(p(y), H(T|y))])`.
fn entropies(bins: &BinIndices, labels: &[u8]) -> (f64, Vec<(f64, f64)>) {
    let all: Vec<&[u32]> = bins.iter_rows().collect();
    let h = discrete_entropy(all.iter().copied());
    let n = labels.len() as f64;
    let conditional = [0u8, 1]
        .iter()
        .filter_map(|&y| {
            let rows: Vec<&[u32]> = all
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l == y)
                .map(|(r, _)| *r)
                .collect();
            if rows.is_empty() {
                None
            } else {
                Some((rows.len() as f64 / n, discrete_entropy(rows.iter().copied())))
            }
        })
        .collect();
    (h, conditional)
}

/// Binned estimate of `I(T;X)` and `I(T;Y)` for one layer at one epoch.
pub fn mi_binned(activations: &Matrix, labels: &[u8], spec: &BinningSpec) -> Result<BinnedMi> {
    spec.validate()?;
    check_inputs(activations, labels)?;
    let (boundaries, range_violations) = match spec.mode {
        BinningMode::Ebab => (ebab_boundaries(activations.as_slice(), spec.n_bins), 0),
        BinningMode::UniformFixedRange { lo, hi } => {
            let outside = activations
                .as_slice()
                .iter()
                .filter(|&&v| v < lo || v > hi)
                .count();
            (uniform_boundaries(lo, hi, spec.n_bins), outside)
        }
    };
    let bins = discretize_layer(activations, &boundaries);
    let (h, conditional) = entropies(&bins, labels);
    let h_given_y: f64 = conditional.iter().map(|(p, hy)| p * hy).sum();
    let ones = labels.iter().filter(|&&y| y == 1).count();
    let h_y = entropy_of_counts(vec![ones, labels.len() - ones], labels.len());
    Ok(BinnedMi {
        bits: MiBits {
            itx: h,
            ity: (h - h_given_y).clamp(0.0, h.min(h_y)),
        },
        range_violations,
    })
}
