use crate::error::{Error, Result};
use crate::masking::{cooccurrence, CooccurrenceWeights, ObservationSet, ObservedEntries};
use crate::matcore::DenseMatrix;

/// Renormalized co-occurrence statistics: `Θ_emp = [P_E(X)ᵀP_E(X)] ⊘ [EᵀE]`.
///
/// Each entry with positive weight is the mean of `X_{i,a} X_{i,b}` over the
/// rows observing both `a` and `b`; zero-weight entries hold 0 and never
/// contribute to a loss.
#[derive(Clone, Debug)]
pub struct EmpiricalTarget {
    pub theta_emp: DenseMatrix,
    pub weights: CooccurrenceWeights,
    /// Unnormalized `P_E(X)ᵀP_E(X)`.
    pub gram: DenseMatrix,
    pub m: usize,
    /// Largest observed `X_ij²`, a data-side lower bound on `‖X‖²_max`.
    pub max_sq_observed: f64,
}

impl EmpiricalTarget {
    pub fn d(&self) -> usize {
        self.theta_emp.rows()
    }

    pub fn w(&self) -> &DenseMatrix {
        &self.weights.w
    }
}

pub fn empirical_target(x: &ObservedEntries) -> EmpiricalTarget {
    let d = x.d();
    let mut gram = vec![0.0; d * d];
    let mut max_sq: f64 = 0.0;
    for i in 0..x.m() {
        let (cols, vals) = x.row(i);
        for (&a, &xa) in cols.iter().zip(vals) {
            max_sq = max_sq.max(xa * xa);
            let base = a * d;
            for (&b, &xb) in cols.iter().zip(vals) {
                gram[base + b] += xa * xb;
            }
        }
    }
    let gram = DenseMatrix::from_vec(d, d, gram).expect("d*d sums");
    let weights = cooccurrence(x.obs());
    let theta_emp = gram
        .zip_map(&weights.w, |s, c| if c > 0.0 { s / c } else { 0.0 })
        .expect("same shape");
    EmpiricalTarget {
        theta_emp,
        weights,
        gram,
        m: x.m(),
        max_sq_observed: max_sq,
    }
}

/// Dense-input form; entries of `x_obs` outside `obs` are ignored.
pub fn empirical_target_dense(x_obs: &DenseMatrix, obs: &ObservationSet) -> Result<EmpiricalTarget> {
    Ok(empirical_target(&ObservedEntries::from_dense(x_obs, obs)?))
}

fn check_theta(op: &'static str, theta: &DenseMatrix, d: usize) -> Result<()> {
    if theta.shape() != (d, d) {
        return Err(Error::shape(op, format!("{d}x{d}"), format!("{}x{}", theta.rows(), theta.cols())));
    }
    Ok(())
}

/// Per-row loss for two observations per row:
/// `(1/4m) Σ_i [(Θ_ab - x_a x_b)² + (Θ_ba - x_b x_a)² + (Θ_aa - x_a²)² + (Θ_bb - x_b²)²]`.
pub fn loss_rowform(theta: &DenseMatrix, x: &ObservedEntries) -> Result<f64> {
    if x.obs().k() != 2 {
        return Err(Error::invalid(format!(
            "row-form loss needs k = 2, got k = {}; use loss_weighted",
            x.obs().k()
        )));
    }
    check_theta("loss_rowform", theta, x.d())?;
    let mut total = 0.0;
    for i in 0..x.m() {
        let (c, v) = x.row(i);
        let (a, b) = (c[0], c[1]);
        let (xa, xb) = (v[0], v[1]);
        total += (theta[(a, b)] - xa * xb).powi(2)
            + (theta[(b, a)] - xb * xa).powi(2)
            + (theta[(a, a)] - xa * xa).powi(2)
            + (theta[(b, b)] - xb * xb).powi(2);
    }
    Ok(total / (4.0 * x.m() as f64))
}

/// `(1/4m) Σ_{a,b} w_ab (Θ_ab - Θemp_ab)²`; equals the row-form loss up to a
/// Θ-independent constant and extends it to any `k`.
pub fn loss_weighted(theta: &DenseMatrix, target: &EmpiricalTarget) -> Result<f64> {
    check_theta("loss_weighted", theta, target.d())?;
    let total: f64 = theta
        .as_slice()
        .iter()
        .zip(target.theta_emp.as_slice())
        .zip(target.w().as_slice())
        .map(|((&t, &e), &w)| w * (t - e) * (t - e))
        .sum();
    Ok(total / (4.0 * target.m as f64))
}

/// Gradient of [`loss_weighted`]: `(1/2m) · w ⊙ (Θ - Θemp)`.
pub fn loss_gradient(theta: &DenseMatrix, target: &EmpiricalTarget) -> Result<DenseMatrix> {
    check_theta("loss_gradient", theta, target.d())?;
    let scale = 1.0 / (2.0 * target.m as f64);
    let d = target.d();
    let data = theta
        .as_slice()
        .iter()
        .zip(target.theta_emp.as_slice())
        .zip(target.w().as_slice())
        .map(|((&t, &e), &w)| scale * w * (t - e))
        .collect();
    DenseMatrix::from_vec(d, d, data)
}
