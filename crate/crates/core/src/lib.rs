//! One-sided matrix completion.
//!
//! A tall `m x d` matrix `X` is observed at `k >= 2` uniformly random entries
//! per row. The crate estimates the column Gram matrix `(1/m) XᵀX` by weighted
//! matrix completion of the renormalized co-occurrence statistics, and from it
//! the right singular vectors and column factors of `X`.
//!
//! Layout:
//! - [`matcore`]: dense matrices, seeded RNG, truncated SVD, norms, Procrustes.
//! - [`masking`]: per-row observation patterns and co-occurrence counts.
//! - [`estimators`]: the empirical target, weighted losses, the factored and
//!   convex solvers and the three baselines.
//! - [`metrics`]: error functionals, incoherence constants, theoretical rate.
//! - [`datagen`]: synthetic ground truth and the text file formats.
//! - [`harness`]: sweeps, rank-dependence search and CSV output.

pub mod datagen;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod masking;
pub mod matcore;
pub mod metrics;

pub use datagen::GroundTruth;
pub use error::{Error, Result};
pub use estimators::{EmpiricalTarget, FactorEstimate, InitMode, SolverConfig, ThetaEstimate};
pub use masking::{CooccurrenceWeights, ObservationSet, ObservedEntries};
pub use matcore::{DenseMatrix, Rng, SvdResult};
pub use metrics::EvalReport;
