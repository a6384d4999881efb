use super::adam::Adam;
use super::target::EmpiricalTarget;
use super::{FactorEstimate, InitMode, SolverConfig, ThetaEstimate};
use crate::error::{Error, Result};
use crate::matcore::{svd_truncated, DenseMatrix, Rng};

/// Number of trailing logged losses checked for monotonicity.
const TAIL_WINDOW: usize = 10;

/// Leading eigenpairs of the hollowed target, used to seed the factored
/// solvers. Returns `(Q, eigenvalues)`; eigenvalues may be negative.
pub(crate) fn hollow_eigenpairs(theta_emp: &DenseMatrix, r: usize) -> Result<(DenseMatrix, Vec<f64>)> {
    let hollow = theta_emp.hollow();
    // Shift by an upper bound on |λ_min| so the top singular pairs are the
    // top eigenpairs.
    let shift = hollow.frobenius_norm();
    let mut shifted = hollow;
    for i in 0..shifted.rows() {
        shifted[(i, i)] += shift;
    }
    let svd = svd_truncated(&shifted, r)?;
    let eig = svd.s.iter().map(|s| s - shift).collect();
    Ok((svd.v, eig))
}

pub(crate) fn gaussian_init(d: usize, r: usize, scale: f64, rng: &mut Rng) -> DenseMatrix {
    let sd = scale / (d as f64).sqrt();
    DenseMatrix::from_fn(d, r, |_, _| sd * rng.normal())
}

/// `Q Λ^{1/2}` with Gaussian columns wherever the eigenvalue is not positive
/// (a zero column would never move under gradient descent).
pub(crate) fn initial_factor(target: &EmpiricalTarget, cfg: &SolverConfig, rng: &mut Rng) -> Result<DenseMatrix> {
    let d = target.d();
    let r = cfg.rank;
    match cfg.init_mode {
        InitMode::Gaussian => Ok(gaussian_init(d, r, cfg.init_scale, rng)),
        InitMode::Spectral => {
            let (q, eig) = hollow_eigenpairs(&target.theta_emp, r)?;
            let fallback = gaussian_init(d, r, cfg.init_scale, rng);
            let top = eig.first().copied().unwrap_or(0.0).max(0.0);
            Ok(DenseMatrix::from_fn(d, r, |i, j| {
                if eig[j] > 1e-12 * top && eig[j] > 0.0 {
                    q[(i, j)] * eig[j].sqrt()
                } else {
                    fallback[(i, j)]
                }
            }))
        }
    }
}

/// Symmetric factored fit: Adam on `V ↦ loss_weighted(VVᵀ)` with
/// `V ∈ ℝ^{d x r}`. No regularizer; the diagonal terms bound the factor norms.
pub fn solve_factored(target: &EmpiricalTarget, cfg: &SolverConfig, rng: &mut Rng) -> Result<ThetaEstimate> {
    cfg.validate()?;
    let d = target.d();
    let r = cfg.rank;
    if r > d {
        return Err(Error::invalid(format!("rank {r} exceeds d = {d}")));
    }
    let mut v = initial_factor(target, cfg, rng)?.into_vec();
    let w = target.w().as_slice();
    let emp = target.theta_emp.as_slice();
    let m = target.m as f64;

    let mut adam = Adam::new(d * r, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon_adam);
    let mut weighted_resid = vec![0.0; d * d];
    let mut grad = vec![0.0; d * r];
    let mut trace = Vec::with_capacity(cfg.steps / cfg.log_every + 2);

    for step in 0..=cfg.steps {
        // Residual R = VVᵀ - Θemp on the upper triangle, mirrored.
        let mut loss = 0.0;
        for a in 0..d {
            let va = &v[a * r..(a + 1) * r];
            for b in a..d {
                let idx = a * d + b;
                let wab = w[idx];
                if wab == 0.0 {
                    weighted_resid[idx] = 0.0;
                    weighted_resid[b * d + a] = 0.0;
                    continue;
                }
                let vb = &v[b * r..(b + 1) * r];
                let p: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                let res = p - emp[idx];
                let wr = wab * res;
                weighted_resid[idx] = wr;
                weighted_resid[b * d + a] = wr;
                loss += if a == b { wr * res } else { 2.0 * wr * res };
            }
        }
        loss /= 4.0 * m;
        if !loss.is_finite() {
            return Err(Error::NonFinite {
                what: "factored loss",
                step,
            });
        }
        if step % cfg.log_every == 0 || step == cfg.steps {
            trace.push(loss);
        }
        if step == cfg.steps {
            break;
        }
        // ∇_V = (1/m) (w ⊙ R) V
        grad.iter_mut().for_each(|g| *g = 0.0);
        for a in 0..d {
            let ga = &mut grad[a * r..(a + 1) * r];
            let row = &weighted_resid[a * d..(a + 1) * d];
            for (b, &wr) in row.iter().enumerate() {
                if wr == 0.0 {
                    continue;
                }
                let vb = &v[b * r..(b + 1) * r];
                for (g, &x) in ga.iter_mut().zip(vb) {
                    *g += wr * x;
                }
            }
            for g in ga.iter_mut() {
                *g /= m;
            }
        }
        adam.step(&mut v, &grad);
    }

    let v = DenseMatrix::from_vec(d, r, v)?;
    let mut theta_hat = v.matmul_tr(&v)?;
    theta_hat.symmetrize();
    let factors = FactorEstimate::from_symmetric(&theta_hat, r)?;
    let warning = tail_not_monotone(&trace);
    if warning {
        log::warn!("factored solver: loss not monotone over the last {TAIL_WINDOW} logged points");
    }
    Ok(ThetaEstimate {
        theta_hat,
        factors,
        loss_trace: trace,
        warning,
        converged: true,
    })
}

pub(crate) fn tail_not_monotone(trace: &[f64]) -> bool {
    let start = trace.len().saturating_sub(TAIL_WINDOW);
    trace[start..].windows(2).any(|w| w[1] > w[0])
}
