#![allow(dead_code)]

use std::collections::HashMap;

use infoplane::estimators::bin_index;
use infoplane::network::NetworkState;
use infoplane::{generate_dataset, ActivationKind, Matrix, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-5;

/// Relative error with a floor on the denominator for near-zero gradients.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// A network with random nonzero biases (and slopes) plus a random batch.
pub fn random_problem(kind: ActivationKind, seed: u64, batch: usize) -> (NetworkState, Matrix, Vec<u8>) {
    let config = NetworkConfig {
        seed,
        ..NetworkConfig::with_activation(kind)
    };
    let mut state = NetworkState::initialize(&config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for layer in &mut state.params_mut().layers {
        for b in &mut layer.biases {
            *b = 0.5 * rng.sample::<f64, _>(StandardNormal);
        }
        for s in &mut layer.slopes {
            *s = rng.gen_range(0.05..0.5);
        }
    }
    let data = generate_dataset(seed);
    let rows: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..data.len())).collect();
    let inputs = data.input_matrix().select_rows(&rows);
    let labels = rows.iter().map(|&r| data.labels()[r]).collect();
    (state, inputs, labels)
}

/// Largest relative error between backprop and central differences.
pub fn gradient_check(kind: ActivationKind, seed: u64, l2: f64) -> f64 {
    let (mut state, inputs, labels) = random_problem(kind, seed, 20);
    let analytic: Vec<f64> = state
        .backward(&inputs, &labels, l2)
        .unwrap()
        .iter()
        .copied()
        .collect();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let original = *state.params().iter().nth(i).unwrap();
        *state.params_mut().iter_mut().nth(i).unwrap() = original + FD_STEP;
        let plus = state.loss(&inputs, &labels, l2).unwrap();
        *state.params_mut().iter_mut().nth(i).unwrap() = original - FD_STEP;
        let minus = state.loss(&inputs, &labels, l2).unwrap();
        *state.params_mut().iter_mut().nth(i).unwrap() = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(a, numeric));
    }
    worst
}

/// MI from explicit joint probability tables over (T, X) and (T, Y),
/// with X the sample index.
pub fn brute_force_mi(activations: &Matrix, labels: &[u8], boundaries: &[f64]) -> (f64, f64) {
    let p = activations.rows();
    let n = p as f64;
    let cells: Vec<Vec<u32>> = activations
        .iter_rows()
        .map(|row| {
            row.iter()
                .map(|&v| boundaries.iter().filter(|&&b| b <= v).count() as u32)
                .collect()
        })
        .collect();

    let mut pt: HashMap<&[u32], f64> = HashMap::new();
    let mut py: HashMap<u8, f64> = HashMap::new();
    let mut pty: HashMap<(&[u32], u8), f64> = HashMap::new();
    for (t, &y) in cells.iter().zip(labels) {
        *pt.entry(t).or_default() += 1.0 / n;
        *py.entry(y).or_default() += 1.0 / n;
        *pty.entry((t, y)).or_default() += 1.0 / n;
    }
    // X is uniform over sample indices, so p(t, x) = 1/P on the observed cell.
    let mut itx = 0.0;
    for t in &cells {
        let joint = 1.0 / n;
        itx += joint * (joint / (pt[t.as_slice()] * (1.0 / n))).log2();
    }
    let mut ity = 0.0;
    for (&(t, y), &joint) in &pty {
        ity += joint * (joint / (pt[t] * py[&y])).log2();
    }
    (itx, ity)
}

/// Bin-assignment oracle kept independent of the library's search.
pub fn linear_bin(value: f64, boundaries: &[f64]) -> u32 {
    let b = boundaries.iter().take_while(|&&b| b <= value).count() as u32;
    debug_assert_eq!(b, bin_index(value, boundaries));
    b
}
