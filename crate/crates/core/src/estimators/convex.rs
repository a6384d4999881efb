use super::target::{loss_gradient, loss_weighted, EmpiricalTarget};
use super::{FactorEstimate, SolverConfig, ThetaEstimate};
use crate::error::{Error, Result};
use crate::matcore::{singular_values, svd_full, DenseMatrix};

/// Largest `d` accepted by the dense reference solver.
pub const CONVEX_MAX_D: usize = 400;

const MAX_HALVINGS: usize = 40;

/// Regularization level `16 α √((ln d + δ) / (d m))`.
pub fn theory_lambda(alpha: f64, d: usize, m: usize, delta: f64) -> f64 {
    16.0 * alpha * (((d as f64).ln() + delta) / (d as f64 * m as f64)).sqrt()
}

/// `‖∇ loss_weighted(Θ_ref)‖_op`: the smallest `λ` for which the gradient
/// at `Θ_ref` lies inside the nuclear-norm subdifferential ball. With `Θ_ref`
/// a rank-`r` factored fit, this puts the convex program on the same noise
/// scale as that fit.
pub fn stationary_lambda(theta_ref: &DenseMatrix, target: &EmpiricalTarget) -> Result<f64> {
    let g = loss_gradient(theta_ref, target)?;
    Ok(singular_values(&g)?.first().copied().unwrap_or(0.0))
}

/// `loss_weighted(Θ) + λ ‖Θ‖_nuc`.
pub fn convex_objective(theta: &DenseMatrix, target: &EmpiricalTarget, lambda: f64) -> Result<f64> {
    let nuc: f64 = if lambda == 0.0 {
        0.0
    } else {
        singular_values(theta)?.iter().sum()
    };
    Ok(loss_weighted(theta, target)? + lambda * nuc)
}

fn clip(theta: &DenseMatrix, alpha: f64) -> DenseMatrix {
    theta.map(|v| v.clamp(-alpha, alpha))
}

/// Singular value soft-thresholding at `tau`.
fn shrink(y: &DenseMatrix, tau: f64) -> Result<DenseMatrix> {
    if tau == 0.0 {
        return Ok(y.clone());
    }
    let svd = svd_full(y)?;
    let s: Vec<f64> = svd.s.iter().map(|s| (s - tau).max(0.0)).collect();
    let keep = s.iter().take_while(|&&x| x > 0.0).count();
    if keep == 0 {
        return Ok(DenseMatrix::zeros(y.rows(), y.cols()));
    }
    let u = svd.u.leading_columns(keep).scale_columns(&s[..keep]);
    u.matmul_tr(&svd.v.leading_columns(keep))
}

/// Proximal gradient on `loss_weighted(Θ) + λ‖Θ‖_nuc` subject to
/// `‖Θ‖_max ≤ α`: gradient step, singular value soft-threshold at `step·λ`,
/// entrywise clip. Step `1/L` with `L = max w / 2m`, halved until the
/// objective does not increase.
///
/// The iterate starts at whichever of `0` and `clip(Θ_emp)` has the lower
/// objective, and only descending steps are accepted.
pub fn solve_convex(target: &EmpiricalTarget, cfg: &SolverConfig) -> Result<ThetaEstimate> {
    cfg.validate()?;
    let d = target.d();
    if d > CONVEX_MAX_D {
        return Err(Error::invalid(format!("convex solver supports d <= {CONVEX_MAX_D}, got {d}")));
    }
    if cfg.rank > d {
        return Err(Error::invalid(format!("rank {} exceeds d = {d}", cfg.rank)));
    }
    let alpha = cfg.alpha_cap.unwrap_or(target.max_sq_observed);
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha cap must be nonnegative"));
    }
    let lambda = cfg
        .lambda_reg
        .unwrap_or_else(|| theory_lambda(alpha, d, target.m, (d as f64).ln()));
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be nonnegative"));
    }

    let zero = DenseMatrix::zeros(d, d);
    let clipped = clip(&target.theta_emp, alpha);
    let obj_zero = convex_objective(&zero, target, lambda)?;
    let obj_clipped = convex_objective(&clipped, target, lambda)?;
    let (mut theta, mut obj) = if obj_clipped <= obj_zero {
        (clipped, obj_clipped)
    } else {
        (zero, obj_zero)
    };

    let lip = target.weights.max_weight() / (2.0 * target.m as f64);
    let mut trace = vec![obj];
    let mut converged = lip == 0.0;
    if !converged {
        let base_step = 1.0 / lip;
        'outer: for iter in 0..cfg.steps {
            let grad = loss_gradient(&theta, target)?;
            let mut step = base_step;
            let mut halvings = 0;
            loop {
                let mut y = theta.sub(&grad.scale(step))?;
                y.symmetrize();
                let mut cand = clip(&shrink(&y, step * lambda)?, alpha);
                cand.symmetrize();
                let cand_obj = convex_objective(&cand, target, lambda)?;
                if !cand_obj.is_finite() {
                    return Err(Error::NonFinite {
                        what: "convex objective",
                        step: iter,
                    });
                }
                if cand_obj <= obj {
                    let rel = (obj - cand_obj) / obj.abs().max(f64::MIN_POSITIVE);
                    theta = cand;
                    obj = cand_obj;
                    if (iter + 1) % cfg.log_every == 0 {
                        trace.push(obj);
                    }
                    if rel < cfg.convex_tol {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                halvings += 1;
                if halvings > MAX_HALVINGS {
                    // No descent along the projected path: stationary.
                    converged = true;
                    break 'outer;
                }
                step *= 0.5;
            }
        }
    }
    if trace.last() != Some(&obj) {
        trace.push(obj);
    }
    if !converged {
        log::warn!("convex solver hit the step cap ({}) before the tolerance", cfg.steps);
    }
    let factors = FactorEstimate::from_symmetric(&theta, cfg.rank)?;
    Ok(ThetaEstimate {
        theta_hat: theta,
        factors,
        loss_trace: trace,
        warning: !converged,
        converged,
    })
}
