//! Nonparametric identification of linear parameter-varying (LPV)
//! state-space models.
//!
//! The estimator solves a least-squares support vector machine in dual form.
//! User-chosen predictor poles act as a noise filter on the regressors; in
//! the dual this becomes a separable two-dimensional IIR filter applied to
//! the kernel (Gram) matrix. The filter cutoff is tuned with a
//! derivative-free barycenter rule.
//!
//! Pipeline: [`kernel::gram`] -> [`filter::filter_gram_2d`] ->
//! [`estimator::fit`] -> [`estimator::TrainedModel::reconstruct`] /
//! [`estimator::TrainedModel::simulate`], with [`tuner::tune`] choosing the
//! cutoff and [`benchmark`] reproducing the Monte Carlo case study.

pub mod benchmark;
pub mod cli;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod io;
pub mod kernel;
pub mod model;
pub mod tuner;

pub use error::{Error, Result};
pub use estimator::{bfr, fit, CoefficientPair, TrainedModel};
pub use filter::{butterworth_alpha, filter_gram_2d, iir_filter_1d, FilteredGram};
pub use kernel::{gram, kernel_sequences, rbf, GramMatrix, Kernel, Rbf};
pub use model::{companion_from_alpha, validate_dataset, AlphaPolynomial, Dataset, HyperParams};
pub use tuner::{barycenter, j_index, tune, CuriositySet, TuneReport};
