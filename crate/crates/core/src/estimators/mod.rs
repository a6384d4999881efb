//! Estimators of the column Gram matrix and its leading factors.
//!
//! - [`solve_factored`]: Adam on `V ↦ loss_weighted(VVᵀ)` (the main method).
//! - [`solve_convex`]: nuclear-norm regularized, max-entry constrained
//!   program solved by proximal gradient.
//! - [`baseline_full_completion`], [`baseline_direct`],
//!   [`baseline_no_diagonal`]: the comparison methods.

mod adam;
mod baselines;
mod convex;
mod factored;
mod target;

use std::path::Path;

pub use adam::Adam;
pub use baselines::{baseline_direct, baseline_full_completion, baseline_no_diagonal, FULL_COMPLETION_LAMBDA};
pub use convex::{convex_objective, solve_convex, stationary_lambda, theory_lambda, CONVEX_MAX_D};
pub use factored::solve_factored;
pub use target::{empirical_target, empirical_target_dense, loss_gradient, loss_rowform, loss_weighted, EmpiricalTarget};

use crate::datagen::{load_matrix, save_matrix};
use crate::error::{Error, Result};
use crate::matcore::{svd_truncated, DenseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMode {
    /// `V₀ = Q Λ^{1/2}` from the top eigenpairs of the hollowed `Θ_emp`.
    Spectral,
    /// i.i.d. Gaussian entries with standard deviation `init_scale / √d`.
    Gaussian,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(InitMode::Spectral),
            "gaussian" => Ok(InitMode::Gaussian),
            other => Err(Error::invalid(format!("unknown init mode {other:?}"))),
        }
    }
}

/// Hyperparameters shared by the iterative solvers.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rank: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon_adam: f64,
    /// Regularization strength. `None` selects the method default: the
    /// theoretical value for the convex program, 0.1 for full completion.
    pub lambda_reg: Option<f64>,
    /// Max-entry bound for the convex program; `None` uses the largest
    /// observed squared entry.
    pub alpha_cap: Option<f64>,
    pub init_mode: InitMode,
    pub init_scale: f64,
    /// Loss is recorded every `log_every` steps (and after the last one).
    pub log_every: usize,
    /// Relative objective change that stops the convex solver.
    pub convex_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank: 1,
            steps: 10_000,
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon_adam: 1e-8,
            lambda_reg: None,
            alpha_cap: None,
            init_mode: InitMode::Spectral,
            init_scale: 1e-1,
            log_every: 100,
            convex_tol: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn with_rank(rank: usize) -> Self {
        SolverConfig {
            rank,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::invalid("rank must be >= 1"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("steps must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.log_every == 0 {
            return Err(Error::invalid("log_every must be >= 1"));
        }
        Ok(())
    }
}

/// Leading singular vectors and values of an estimated Gram matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorEstimate {
    /// `d x r`, orthonormal columns.
    pub q: DenseMatrix,
    /// Nonincreasing, length `r`.
    pub lambda: Vec<f64>,
}

impl FactorEstimate {
    /// Top-`r` singular pairs of a symmetric matrix.
    pub fn from_symmetric(theta: &DenseMatrix, r: usize) -> Result<Self> {
        let svd = svd_truncated(theta, r)?;
        Ok(FactorEstimate {
            q: svd.v,
            lambda: svd.s,
        })
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn d(&self) -> usize {
        self.q.rows()
    }

    /// The retained subspace is not determined by the data: some kept
    /// singular value is zero relative to the largest.
    pub fn is_degenerate(&self) -> bool {
        let top = self.lambda.first().copied().unwrap_or(0.0);
        top <= f64::MIN_POSITIVE || self.lambda.iter().any(|&l| l <= 1e-12 * top)
    }

    /// Rows of `Q Λ^{1/2}`, the column factors.
    pub fn column_factors(&self) -> DenseMatrix {
        let roots: Vec<f64> = self.lambda.iter().map(|l| l.max(0.0).sqrt()).collect();
        self.q.scale_columns(&roots)
    }

    /// Stored in the dense matrix format as a `(d + 1) x r` matrix: the first
    /// row holds the singular values, the remaining `d` rows hold `q`.
    pub fn to_matrix(&self) -> DenseMatrix {
        let r = self.rank();
        DenseMatrix::from_fn(self.d() + 1, r, |i, j| if i == 0 { self.lambda[j] } else { self.q[(i - 1, j)] })
    }

    pub fn from_matrix(m: &DenseMatrix) -> Result<Self> {
        if m.rows() < 2 {
            return Err(Error::invalid("factor file needs a singular value row and at least one vector row"));
        }
        let lambda = m.row(0).to_vec();
        let q = DenseMatrix::from_fn(m.rows() - 1, m.cols(), |i, j| m[(i + 1, j)]);
        Ok(FactorEstimate { q, lambda })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_matrix(&self.to_matrix(), path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_matrix(&load_matrix(path)?)
    }
}

/// Output of the Gram-matrix solvers.
#[derive(Clone, Debug)]
pub struct ThetaEstimate {
    pub theta_hat: DenseMatrix,
    pub factors: FactorEstimate,
    /// Objective every `log_every` steps plus the final value.
    pub loss_trace: Vec<f64>,
    /// The tail of the loss trace was not monotone.
    pub warning: bool,
    /// Convex solver: stopping tolerance reached before the step cap.
    pub converged: bool,
}
