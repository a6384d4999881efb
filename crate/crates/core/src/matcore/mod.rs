//! Dense linear algebra substrate.

mod matrix;
mod norms;
mod procrustes;
mod rng;
mod svd;

pub use matrix::{dot, DenseMatrix};
pub use norms::{norms, Norms};
pub use procrustes::{procrustes_align, Alignment};
pub use rng::{derive_seed, mix64, Rng};
pub use svd::{singular_values, svd_full, svd_truncated, svd_truncated_with, SvdConfig, SvdResult};
