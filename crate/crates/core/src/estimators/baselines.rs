use super::adam::Adam;
use super::factored::{gaussian_init, hollow_eigenpairs};
use super::target::empirical_target;
use super::{FactorEstimate, InitMode, SolverConfig};
use crate::error::{Error, Result};
use crate::masking::ObservedEntries;
use crate::matcore::{svd_full, svd_truncated, DenseMatrix, Rng};

/// Default L2 strength for full completion.
pub const FULL_COMPLETION_LAMBDA: f64 = 0.1;

/// Rescales `P_E(X)ᵀP_E(X)` spectra by the inverse pair-sampling rate
/// `d(d-1) / (m k (k-1))`, so the off-diagonal part estimates `(1/m) XᵀX`.
fn pair_rate_scale(x: &ObservedEntries) -> f64 {
    let (m, d, k) = (x.m() as f64, x.d() as f64, x.obs().k() as f64);
    d * (d - 1.0) / (m * k * (k - 1.0))
}

fn factor_gram(gram: &DenseMatrix, r: usize, scale: f64) -> Result<FactorEstimate> {
    if r > gram.rows() {
        return Err(Error::invalid(format!("rank {r} exceeds d = {}", gram.rows())));
    }
    let svd = svd_truncated(gram, r)?;
    Ok(FactorEstimate {
        q: svd.v,
        lambda: svd.s.iter().map(|s| s * scale).collect(),
    })
}

/// Top-`r` SVD of `P_E(X)ᵀP_E(X)`.
pub fn baseline_direct(x: &ObservedEntries, r: usize) -> Result<FactorEstimate> {
    let t = empirical_target(x);
    factor_gram(&t.gram, r, pair_rate_scale(x))
}

/// Top-`r` SVD of `P_E(X)ᵀP_E(X)` with its diagonal zeroed.
pub fn baseline_no_diagonal(x: &ObservedEntries, r: usize) -> Result<FactorEstimate> {
    let t = empirical_target(x);
    factor_gram(&t.gram.hollow(), r, pair_rate_scale(x))
}

/// Rank-`r` completion of `P_E(X)` itself:
///
/// `min (1/|E|) ‖P_E(UVᵀ) - P_E(X)‖² + λ ((1/m) Σ‖u_i‖² + (1/d) Σ‖v_j‖²)`
///
/// by Adam over `(U, V)`. The right factors of `UVᵀ` are read off without
/// forming the `m x d` product: with `V = Q_v R_v`, the SVD `U R_vᵀ = P Σ Wᵀ`
/// gives right singular vectors `Q_v W` and Gram eigenvalues `Σ² / m`.
pub fn baseline_full_completion(x: &ObservedEntries, cfg: &SolverConfig, rng: &mut Rng) -> Result<FactorEstimate> {
    cfg.validate()?;
    let (m, d, k) = (x.m(), x.d(), x.obs().k());
    let r = cfg.rank;
    if r > m.min(d) {
        return Err(Error::invalid(format!("rank {r} exceeds min(m, d) = {}", m.min(d))));
    }
    let lambda = cfg.lambda_reg.unwrap_or(FULL_COMPLETION_LAMBDA);
    let n_obs = (m * k) as f64;

    let (u0, v0) = init_factors(x, cfg, rng)?;
    let n_u = m * r;
    let mut params = u0.into_vec();
    params.extend_from_slice(v0.as_slice());
    let mut grad = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon_adam);

    for step in 0..cfg.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (u, v) = params.split_at(n_u);
        let (gu, gv) = grad.split_at_mut(n_u);
        let mut loss = 0.0;
        for i in 0..m {
            let ui = &u[i * r..(i + 1) * r];
            let gui = &mut gu[i * r..(i + 1) * r];
            let (cols, vals) = x.row(i);
            for (&j, &xij) in cols.iter().zip(vals) {
                let vj = &v[j * r..(j + 1) * r];
                let pred: f64 = ui.iter().zip(vj).map(|(a, b)| a * b).sum();
                let res = pred - xij;
                loss += res * res;
                let c = 2.0 * res / n_obs;
                let gvj = &mut gv[j * r..(j + 1) * r];
                for t in 0..r {
                    gui[t] += c * vj[t];
                    gvj[t] += c * ui[t];
                }
            }
        }
        let reg_u = 2.0 * lambda / m as f64;
        let reg_v = 2.0 * lambda / d as f64;
        let mut penalty = 0.0;
        for (g, &p) in gu.iter_mut().zip(u) {
            *g += reg_u * p;
            penalty += p * p / m as f64;
        }
        for (g, &p) in gv.iter_mut().zip(v) {
            *g += reg_v * p;
            penalty += p * p / d as f64;
        }
        let total = loss / n_obs + lambda * penalty;
        if !total.is_finite() {
            return Err(Error::NonFinite {
                what: "full-completion loss",
                step,
            });
        }
        if step % cfg.log_every == 0 {
            log::trace!("full completion step {step}: loss {total:.6e}");
        }
        adam.step(&mut params, &grad);
    }

    let u = DenseMatrix::from_vec(m, r, params[..n_u].to_vec())?;
    let v = DenseMatrix::from_vec(d, r, params[n_u..].to_vec())?;
    right_factors_of_product(&u, &v)
}

/// Right singular vectors of `UVᵀ` and eigenvalues of `(1/m)(UVᵀ)ᵀ(UVᵀ)`.
pub(crate) fn right_factors_of_product(u: &DenseMatrix, v: &DenseMatrix) -> Result<FactorEstimate> {
    let m = u.rows();
    // V = Q_v R_v with Q_v orthonormal: from V = A S Bᵀ take Q_v = A, R_v = S Bᵀ.
    let vs = svd_full(v)?;
    let r_v = vs.v.scale_columns(&vs.s).transpose();
    let ur = u.matmul_tr(&r_v)?;
    let inner = svd_full(&ur)?;
    let q = vs.u.matmul(&inner.v)?;
    let lambda = inner.s.iter().map(|s| s * s / m as f64).collect();
    Ok(FactorEstimate { q, lambda })
}

fn init_factors(x: &ObservedEntries, cfg: &SolverConfig, rng: &mut Rng) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, d, k) = (x.m(), x.d(), x.obs().k());
    let r = cfg.rank;
    match cfg.init_mode {
        InitMode::Gaussian => Ok((
            gaussian_init(m, r, cfg.init_scale, rng),
            gaussian_init(d, r, cfg.init_scale, rng),
        )),
        InitMode::Spectral => {
            let target = empirical_target(x);
            let (q, eig) = hollow_eigenpairs(&target.theta_emp, r)?;
            let top = eig.first().copied().unwrap_or(0.0).max(0.0);
            let usable: Vec<bool> = eig.iter().map(|&e| e > 0.0 && e > 1e-12 * top).collect();
            let fallback_v = gaussian_init(d, r, cfg.init_scale, rng);
            let v0 = DenseMatrix::from_fn(d, r, |j, c| {
                if usable[c] {
                    q[(j, c)] * eig[c].sqrt()
                } else {
                    fallback_v[(j, c)]
                }
            });
            // u_i ≈ X_i Q Λ^{-1/2}, estimated from the k observed entries.
            let mut u0 = gaussian_init(m, r, cfg.init_scale, rng);
            let inflate = d as f64 / k as f64;
            for i in 0..m {
                let (cols, vals) = x.row(i);
                for c in 0..r {
                    if !usable[c] {
                        continue;
                    }
                    let inv_root = 1.0 / eig[c].sqrt();
                    let s: f64 = cols.iter().zip(vals).map(|(&j, &xv)| xv * q[(j, c)]).sum();
                    u0[(i, c)] = inflate * s * inv_root;
                }
            }
            Ok((u0, v0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::{sample_mask, ObservationSet};
    use crate::matcore::procrustes_align;

    #[test]
    fn product_factors_match_dense_svd() {
        let mut rng = Rng::new(12);
        let u = DenseMatrix::from_fn(40, 3, |_, _| rng.normal());
        let v = DenseMatrix::from_fn(7, 3, |_, _| rng.normal());
        let f = right_factors_of_product(&u, &v).unwrap();
        let x = u.matmul_tr(&v).unwrap();
        let dense = svd_truncated(&x, 3).unwrap();
        let al = procrustes_align(&f.q, &dense.v).unwrap();
        assert!(al.residual < 1e-18);
        for (l, s) in f.lambda.iter().zip(&dense.s) {
            assert!((l - s * s / 40.0).abs() < 1e-10 * l);
        }
    }

    #[test]
    fn direct_full_observation_matches_gram() {
        let mut rng = Rng::new(2);
        let x = DenseMatrix::from_fn(25, 6, |_, _| rng.normal());
        let obs = ObservationSet::full(25, 6);
        let f = baseline_direct(&ObservedEntries::from_dense(&x, &obs).unwrap(), 3).unwrap();
        let g = svd_truncated(&x.tr_matmul(&x).unwrap(), 3).unwrap();
        assert!(procrustes_align(&f.q, &g.v).unwrap().residual < 1e-18);
    }

    #[test]
    fn direct_single_observed_column() {
        // d = 3, every row observes columns {0, 1}, column 0 carries the mass.
        let obs = ObservationSet::new(4, 3, 2, vec![0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        let x = ObservedEntries::new(obs, vec![3.0, 0.1, -3.0, -0.1, 3.0, -0.1, 3.0, 0.1]).unwrap();
        let f = baseline_direct(&x, 1).unwrap();
        // Gram = [[36, 0.6], [0.6, 0.04]] ⊕ [0]; top eigenvector by closed form.
        let (a, b, c) = (36.0f64, 0.6f64, 0.04f64);
        let lam = 0.5 * (a + c + ((a - c).powi(2) + 4.0 * b * b).sqrt());
        let v = [b, lam - a];
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        assert!((f.q[(0, 0)].abs() - v[0] / n).abs() < 1e-12);
        assert!((f.q[(1, 0)].abs() - v[1] / n).abs() < 1e-12);
        assert_eq!(f.q[(2, 0)], 0.0);
        assert!(f.q[(0, 0)].abs() > 0.99);
    }

    #[test]
    fn hollow_gram_factors_like_direct() {
        let mut rng = Rng::new(5);
        let mut g = DenseMatrix::from_fn(5, 5, |_, _| rng.normal());
        g.symmetrize();
        let g = g.hollow();
        let a = factor_gram(&g, 2, 1.0).unwrap();
        let b = factor_gram(&g.hollow(), 2, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn identity_data_hollows_to_zero() {
        // The Gram of identity data is diagonal, so nothing survives hollowing.
        let obs = ObservationSet::full(3, 3);
        let x = ObservedEntries::from_dense(&DenseMatrix::identity(3), &obs).unwrap();
        let f = baseline_no_diagonal(&x, 2).unwrap();
        assert!(f.is_degenerate());
        assert!(f.lambda.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn full_completion_zero_data() {
        let mut rng = Rng::new(6);
        let obs = sample_mask(60, 5, 3, &mut rng).unwrap();
        let x = ObservedEntries::from_dense(&DenseMatrix::zeros(60, 5), &obs).unwrap();
        let cfg = SolverConfig {
            rank: 2,
            steps: 2000,
            ..SolverConfig::default()
        };
        let f = baseline_full_completion(&x, &cfg, &mut rng).unwrap();
        assert!(f.lambda.iter().all(|&l| l < 1e-3), "{:?}", f.lambda);
    }
}
