//! Recovery of low-rank positive-semidefinite matrices from noisy linear
//! measurements by over-parameterized factored gradient descent, with the
//! stopping iterate chosen on a held-out validation split.
//!
//! The crate is organised bottom-up:
//!
//! * [`matrix`], [`rng`], [`truth`]: dense value types, named seeded random
//!   streams and planted ground truths.
//! * [`operators`]: Gaussian sensing and entry-sampling (completion)
//!   operators, adjoints, restricted-isometry probes.
//! * [`recovery`]: the gradient-descent loop and its trajectory.
//! * [`diagnostics`]: signal/error decomposition and phase quantities.
//! * [`validation`]: train/validation splits and iterate selection.
//! * [`experiments`]: the overfitting demo, heatmap grids and scaling
//!   studies driven by the `lrsense` binary.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod matrix;
pub mod operators;
pub mod recovery;
pub mod rng;
pub mod truth;
pub mod validation;

pub use error::{Error, Result};
pub use matrix::{sym_svd, Factor, SymMatrix, SymSvd};
pub use operators::{OperatorKind, RipEstimate, SensingOperator};
pub use recovery::{GdConfig, IterateHook, IterateRecord, Trajectory};
pub use rng::RngSpec;
pub use truth::{gaussian_noise, generate_ground_truth, GroundTruth};
