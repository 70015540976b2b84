//! Sliced-Wasserstein toolkit.
//!
//! The crate is organized around five subsystems:
//!
//! - [`ot`]: exact one-dimensional Wasserstein computations, empirical CDFs,
//!   and an exact low-n multidimensional W2 solver used as the evaluation metric.
//! - [`sliced`]: Monte Carlo estimators for the sliced-Wasserstein family
//!   (plain, generalized, distributional, energy-based) with rotation-triple slicing.
//! - [`diffgrad`]: hand-written reverse-mode gradients (vector-Jacobian products)
//!   for the loss chain, plus a finite-difference verifier.
//! - [`guidance`]: a deterministic DDIM sampler over an analytic Gaussian-mixture
//!   score, with the sliced-Wasserstein guidance inner loop.
//! - [`palette`]: image I/O, pixel-cloud extraction, direct pixel-space palette
//!   transfer by SW gradient descent, and a histogram-matching baseline.

pub mod diffgrad;
pub mod error;
pub mod guidance;
pub mod ot;
pub mod palette;
pub mod rng;
pub mod sliced;

pub use error::{Error, Result};
pub use ot::{PointCloud, Samples1D};
pub use sliced::{SliceScheme, SliceSet, SlicedConfig, SlicedVariant};
