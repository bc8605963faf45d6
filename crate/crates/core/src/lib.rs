//! # infoplane
//!
//! Train small fully connected networks on a 12-bit binary task, record
//! their hidden activity, and follow each layer across the information plane
//! `(I(T;X), I(T;Y))` during training.
//!
//! The pipeline has independent stages that communicate through files:
//!
//! | Stage | Module | Output |
//! |-------|--------|--------|
//! | task generation / loading | [`dataset`] | 13-column CSV |
//! | training | [`network`] | activation trace directory |
//! | estimation | [`estimators`] | estimates CSV |
//! | analysis | [`analysis`] | compression scores, correlations |
//! | figures | [`plot`] | SVG information planes |
//! | experiment grids | [`sweep`] | one run directory per (activation, λ, seed) |
//!
//! Hidden activity of a deterministic network has infinite mutual information
//! with its input, so every estimator adds noise in some form: binning
//! discretizes, KDE convolves with a Gaussian. The adaptive estimators scale
//! that noise to each layer at each epoch, which keeps estimates comparable
//! across activation functions with very different output ranges.
//!
//! ```
//! use infoplane::estimators::{mi_binned, BinningSpec};
//! use infoplane::Matrix;
//!
//! // one unit that copies a balanced label carries exactly one bit
//! let labels = [0u8, 1, 0, 1];
//! let acts = Matrix::from_vec(4, 1, vec![0.1, 0.9, 0.1, 0.9]).unwrap();
//! let mi = mi_binned(&acts, &labels, &BinningSpec::ebab(30)).unwrap();
//! assert_eq!((mi.bits.itx, mi.bits.ity), (1.0, 1.0));
//! ```
//!
//! A guide with worked examples lives in the `book/` directory of the
//! repository.

pub mod analysis;
pub mod dataset;
mod error;
pub mod estimators;
mod matrix;
pub mod network;
pub mod plot;
pub mod sweep;
pub mod trace;

pub use dataset::{generate_dataset, load_dataset, make_split, Dataset, Split};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use network::{ActivationKind, NetworkConfig, NetworkState};
pub use trace::{read_trace, write_trace, ActivationTrace};

// Compile the guide's code blocks as doc-tests so it cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/dataset.md")]
    mod dataset {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/traces.md")]
    mod traces {}
    #[doc = include_str!("../../../book/src/binning.md")]
    mod binning {}
    #[doc = include_str!("../../../book/src/kde.md")]
    mod kde {}
    #[doc = include_str!("../../../book/src/compression.md")]
    mod compression {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
