//! The 12-bit binary classification task and its train/test split.
//!
//! The generated task enumerates all 4096 twelve-bit inputs once each. Labels
//! come from a seeded random teacher: every input gets a score from a random
//! quadratic form over its ±1 spins and the 2048 highest-scoring inputs are
//! labelled 1. The map is deterministic, exactly balanced and learnable by a
//! small network, which a uniformly random labelling would not be.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{Error, Matrix, Result};

/// Width of every input vector.
pub const INPUT_BITS: usize = 12;

/// Relative weight of the pairwise teacher terms against the linear ones.
const TEACHER_PAIR_WEIGHT: f64 = 0.2;

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DataSource {
    Generated { seed: u64 },
    Loaded { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    inputs: Vec<[u8; INPUT_BITS]>,
    labels: Vec<u8>,
    source: DataSource,
}

impl Dataset {
    /// Builds a dataset from already validated parts.
    pub fn new(inputs: Vec<[u8; INPUT_BITS]>, labels: Vec<u8>, source: DataSource) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if inputs.iter().flatten().chain(&labels).any(|&b| b > 1) {
            return Err(Error::InvalidArgument("dataset values must be 0 or 1".into()));
        }
        Ok(Dataset {
            inputs,
            labels,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &[[u8; INPUT_BITS]] {
        &self.inputs
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn source(&self) -> &DataSource {
        &self.source
    }

    /// Inputs as a P×12 matrix of 0.0/1.0.
    pub fn input_matrix(&self) -> Matrix {
        let data = self
            .inputs
            .iter()
            .flat_map(|row| row.iter().map(|&b| f64::from(b)))
            .collect();
        Matrix::from_vec(self.len(), INPUT_BITS, data).expect("shape is consistent")
    }

    /// Number of samples carrying each label.
    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.len() - ones, ones]
    }

    pub fn is_balanced(&self) -> bool {
        let [zeros, ones] = self.class_counts();
        zeros == ones
    }

    /// 64-bit FNV-1a hash over inputs and labels, stable across platforms.
    pub fn fingerprint(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut hash = OFFSET;
        for (row, &label) in self.inputs.iter().zip(&self.labels) {
            for &b in row.iter().chain(std::iter::once(&label)) {
                hash ^= u64::from(b);
                hash = hash.wrapping_mul(PRIME);
            }
        }
        hash
    }

    /// Writes the dataset in the 13-token CSV format.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::with_capacity(self.len() * 26);
        for (row, label) in self.inputs.iter().zip(&self.labels) {
            for b in row {
                out.push(char::from(b'0' + b));
                out.push(',');
            }
            out.push(char::from(b'0' + label));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn bits_of(value: usize) -> [u8; INPUT_BITS] {
    let mut bits = [0u8; INPUT_BITS];
    for (j, b) in bits.iter_mut().enumerate() {
        *b = ((value >> (INPUT_BITS - 1 - j)) & 1) as u8;
    }
    bits
}

/// Generates the full 12-bit task with a seeded balanced teacher labelling.
pub fn generate_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let linear: Vec<f64> = (0..INPUT_BITS).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut pairs = Vec::with_capacity(INPUT_BITS * (INPUT_BITS - 1) / 2);
    for i in 0..INPUT_BITS {
        for j in i + 1..INPUT_BITS {
            let w: f64 = StandardNormal.sample(&mut rng);
            pairs.push((i, j, TEACHER_PAIR_WEIGHT * w));
        }
    }

    let n = 1usize << INPUT_BITS;
    let inputs: Vec<[u8; INPUT_BITS]> = (0..n).map(bits_of).collect();
    let scores: Vec<f64> = inputs
        .iter()
        .map(|bits| {
            let spin = |k: usize| 2.0 * f64::from(bits[k]) - 1.0;
            let lin: f64 = linear.iter().enumerate().map(|(k, w)| w * spin(k)).sum();
            let quad: f64 = pairs.iter().map(|&(i, j, w)| w * spin(i) * spin(j)).sum();
            lin + quad
        })
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut labels = vec![0u8; n];
    for &i in &order[n / 2..] {
        labels[i] = 1;
    }

    Dataset {
        inputs,
        labels,
        source: DataSource::Generated { seed },
    }
}

/// Parses a dataset CSV: twelve input bits and a label per line.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let body = text.strip_suffix('\n').unwrap_or(text);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    let mut seen: HashMap<[u8; INPUT_BITS], (usize, u8)> = HashMap::new();

    if body.is_empty() {
        return Err(parse_err(1, "empty dataset".into()));
    }

    for (idx, line) in body.split('\n').enumerate() {
        let line_no = idx + 1;
        let tokens: Vec<&str> = line.split(',').collect();
        if tokens.len() != INPUT_BITS + 1 {
            return Err(parse_err(
                line_no,
                format!("expected {} tokens, found {}", INPUT_BITS + 1, tokens.len()),
            ));
        }
        let mut values = [0u8; INPUT_BITS + 1];
        for (v, tok) in values.iter_mut().zip(&tokens) {
            *v = match *tok {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(parse_err(line_no, format!("non-binary token {other:?}")));
                }
            };
        }
        let mut row = [0u8; INPUT_BITS];
        row.copy_from_slice(&values[..INPUT_BITS]);
        let label = values[INPUT_BITS];

        if let Some(&(first_line, first_label)) = seen.get(&row) {
            if first_label != label {
                return Err(Error::Consistency {
                    first_line,
                    second_line: line_no,
                    first_label,
                    second_label: label,
                });
            }
        } else {
            seen.insert(row, (line_no, label));
        }
        inputs.push(row);
        labels.push(label);
    }

    Ok(Dataset {
        inputs,
        labels,
        source: DataSource::Loaded {
            path: path.to_path_buf(),
        },
    })
}

/// Disjoint train/test index sets over a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub fraction: f64,
}

/// Stratified shuffle split with `floor(fraction * P)` training samples.
///
/// Each class contributes `floor(fraction * n_class)` samples to the training
/// set; any shortfall is filled by largest fractional remainder. Index lists
/// are returned sorted.
pub fn make_split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let total = dataset.len();
    let n_train = (fraction * total as f64).floor() as usize;

    let mut by_class: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in dataset.labels().iter().enumerate() {
        by_class[usize::from(l)].push(i);
    }

    let exact: Vec<f64> = by_class.iter().map(|c| fraction * c.len() as f64).collect();
    let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut short = n_train.saturating_sub(quota.iter().sum());
    let mut by_remainder = [0usize, 1];
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    while short > 0 {
        let mut progressed = false;
        for &c in &by_remainder {
            if short > 0 && quota[c] < by_class[c].len() {
                quota[c] += 1;
                short -= 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::with_capacity(n_train);
    let mut test = Vec::with_capacity(total - n_train);
    for (class, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..quota[class]]);
        test.extend_from_slice(&members[quota[class]..]);
    }
    train.sort_unstable();
    test.sort_unstable();

    Ok(Split {
        train_indices: train,
        test_indices: test,
        fraction,
    })
}
