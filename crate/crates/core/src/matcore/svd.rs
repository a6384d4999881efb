//! Truncated singular value decomposition.
//!
//! Small problems (min dimension up to [`SvdConfig::jacobi_max_dim`]) use a
//! one-sided (Hestenes) Jacobi sweep, which is accurate to working precision.
//! Larger ones use randomized subspace iteration with a Rayleigh-Ritz step,
//! falling back to Jacobi if the leading subspace does not settle.

use super::matrix::{dot, DenseMatrix};
use super::rng::Rng;
use crate::error::{Error, Result};

/// Top singular triplets, `a ≈ u · diag(s) · vᵀ`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(s) · vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.u
            .scale_columns(&self.s)
            .matmul_tr(&self.v)
            .expect("svd factors have consistent shapes")
    }
}

#[derive(Clone, Debug)]
pub struct SvdConfig {
    /// Largest `min(rows, cols)` handled by the Jacobi path directly.
    pub jacobi_max_dim: usize,
    pub max_sweeps: usize,
    pub oversampling: usize,
    pub min_power_iters: usize,
    pub max_power_iters: usize,
    /// Frobenius change of the leading right subspace between power steps.
    pub subspace_tol: f64,
    /// Run Jacobi when subspace iteration exhausts `max_power_iters`.
    pub fallback_to_jacobi: bool,
    pub seed: u64,
}

impl Default for SvdConfig {
    fn default() -> Self {
        SvdConfig {
            jacobi_max_dim: 64,
            max_sweeps: 80,
            oversampling: 8,
            min_power_iters: 4,
            max_power_iters: 300,
            subspace_tol: 1e-10,
            fallback_to_jacobi: true,
            seed: 0x5EED_5FD0,
        }
    }
}

pub fn svd_truncated(a: &DenseMatrix, r: usize) -> Result<SvdResult> {
    svd_truncated_with(a, r, &SvdConfig::default())
}

/// Thin SVD with `min(rows, cols)` triplets.
pub fn svd_full(a: &DenseMatrix) -> Result<SvdResult> {
    let k = a.rows().min(a.cols());
    svd_truncated(a, k)
}

/// Singular values only, all `min(rows, cols)` of them.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(a)?;
    let (_, s, _) = jacobi_svd(a, SvdConfig::default().max_sweeps)?;
    Ok(s)
}

pub fn svd_truncated_with(a: &DenseMatrix, r: usize, cfg: &SvdConfig) -> Result<SvdResult> {
    let k = a.rows().min(a.cols());
    if r > k {
        return Err(Error::invalid(format!(
            "svd rank {r} exceeds min dimension {k} of {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    check_finite(a)?;
    let mut out = if k <= cfg.jacobi_max_dim || r + cfg.oversampling >= k {
        let (u, s, v) = jacobi_svd(a, cfg.max_sweeps)?;
        truncate(u, s, v, r)
    } else {
        match subspace_iteration(a, r, cfg)? {
            Some(res) => res,
            None if cfg.fallback_to_jacobi => {
                log::debug!(
                    "subspace iteration on {}x{} (r={r}) did not settle; using Jacobi",
                    a.rows(),
                    a.cols()
                );
                let (u, s, v) = jacobi_svd(a, cfg.max_sweeps)?;
                truncate(u, s, v, r)
            }
            None => {
                return Err(Error::NoConvergence {
                    what: "randomized subspace iteration",
                    iterations: cfg.max_power_iters,
                })
            }
        }
    };
    fix_signs(&mut out);
    Ok(out)
}

fn check_finite(a: &DenseMatrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("svd input contains NaN or Inf"))
    }
}

fn truncate(u: Vec<Vec<f64>>, s: Vec<f64>, v: Vec<Vec<f64>>, r: usize) -> SvdResult {
    SvdResult {
        u: from_columns(&u[..r], u.first().map_or(0, |c| c.len())),
        s: s[..r].to_vec(),
        v: from_columns(&v[..r], v.first().map_or(0, |c| c.len())),
    }
}

fn from_columns(cols: &[Vec<f64>], n: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

fn to_columns(a: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..a.cols()).map(|j| a.column(j)).collect()
}

/// First entry of each `v` column that is clearly nonzero is made nonnegative.
fn fix_signs(res: &mut SvdResult) {
    for j in 0..res.v.cols() {
        let col = res.v.column(j);
        let scale = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let pivot = col.iter().copied().find(|x| x.abs() > 1e-12 * scale);
        if matches!(pivot, Some(p) if p < 0.0) {
            for i in 0..res.v.rows() {
                res.v[(i, j)] = -res.v[(i, j)];
            }
            for i in 0..res.u.rows() {
                res.u[(i, j)] = -res.u[(i, j)];
            }
        }
    }
}

/// One-sided Jacobi. Returns columns of `u` (n-vectors), singular values in
/// nonincreasing order, and columns of `v` (p-vectors).
#[allow(clippy::type_complexity)]
fn jacobi_svd(a: &DenseMatrix, max_sweeps: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    if a.rows() < a.cols() {
        let (u, s, v) = jacobi_svd(&a.transpose(), max_sweeps)?;
        return Ok((v, s, u));
    }
    let n = a.rows();
    let p = a.cols();
    let mut w = to_columns(a);
    let mut v: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            e
        })
        .collect();
    // Dot products carry rounding of order n·eps, so a tighter threshold
    // can cycle without converging.
    let tol = n as f64 * f64::EPSILON;
    // Columns at rounding level relative to the whole matrix count as zero.
    let floor = (f64::EPSILON * a.frobenius_norm()).powi(2);

    let mut converged = p < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps == max_sweeps {
            return Err(Error::NoConvergence {
                what: "one-sided Jacobi SVD",
                iterations: sweeps,
            });
        }
        sweeps += 1;
        let mut rotated = false;
        for i in 0..p - 1 {
            for j in (i + 1)..p {
                let alpha = dot(&w[i], &w[i]);
                let beta = dot(&w[j], &w[j]);
                let gamma = dot(&w[i], &w[j]);
                if alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = w.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
                let (lo, hi) = v.split_at_mut(j);
                rotate(&mut lo[i], &mut hi[0], c, s);
            }
        }
        converged = !rotated;
    }

    let mut order: Vec<(usize, f64)> = w.iter().map(|c| dot(c, c).sqrt()).enumerate().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let smax = order.first().map_or(0.0, |o| o.1);
    let cutoff = smax * (n.max(p) as f64) * f64::EPSILON;

    let mut us: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut svals = Vec::with_capacity(p);
    let mut vs = Vec::with_capacity(p);
    let mut missing = Vec::new();
    for (idx, (col, sigma)) in order.into_iter().enumerate() {
        if sigma > cutoff && sigma > 0.0 {
            us.push(w[col].iter().map(|x| x / sigma).collect());
            svals.push(sigma);
        } else {
            us.push(vec![0.0; n]);
            svals.push(if sigma > 0.0 { sigma } else { 0.0 });
            missing.push(idx);
        }
        vs.push(std::mem::take(&mut v[col]));
    }
    complete_basis(&mut us, &missing);
    Ok((us, svals, vs))
}

#[inline]
fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let xa = *a;
        let yb = *b;
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all others,
/// drawn from the standard basis.
fn complete_basis(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let n = cols[0].len();
    let mut filled: Vec<bool> = vec![true; cols.len()];
    for &m in missing {
        filled[m] = false;
    }
    let mut next_e = 0;
    for &m in missing {
        let mut best: Option<Vec<f64>> = None;
        let mut best_norm = 0.0;
        while next_e < n {
            let mut e = vec![0.0; n];
            e[next_e] = 1.0;
            next_e += 1;
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if filled[j] {
                        let proj = dot(c, &e);
                        for (ei, ci) in e.iter_mut().zip(c) {
                            *ei -= proj * ci;
                        }
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > best_norm {
                best_norm = norm;
                best = Some(e);
            }
            if best_norm > 0.1 {
                break;
            }
        }
        let mut e = best.expect("standard basis spans the space");
        for x in e.iter_mut() {
            *x /= best_norm;
        }
        cols[m] = e;
        filled[m] = true;
    }
}

/// Orthonormalizes columns in place (two passes of modified Gram-Schmidt);
/// numerically dependent columns are replaced by random directions.
fn orthonormalize(cols: &mut [Vec<f64>], rng: &mut Rng) {
    for j in 0..cols.len() {
        let mut original = dot(&cols[j], &cols[j]).sqrt();
        let mut attempts = 0;
        loop {
            for _ in 0..2 {
                for i in 0..j {
                    let (lo, hi) = cols.split_at_mut(j);
                    let proj = dot(&lo[i], &hi[0]);
                    for (x, q) in hi[0].iter_mut().zip(&lo[i]) {
                        *x -= proj * q;
                    }
                }
            }
            let norm = dot(&cols[j], &cols[j]).sqrt();
            if (norm > 1e-10 * original && norm > 0.0) || attempts == 8 {
                if norm > 0.0 {
                    for x in cols[j].iter_mut() {
                        *x /= norm;
                    }
                }
                break;
            }
            attempts += 1;
            rng.fill_normal(&mut cols[j], 1.0);
            original = dot(&cols[j], &cols[j]).sqrt();
        }
    }
}

fn subspace_iteration(a: &DenseMatrix, r: usize, cfg: &SvdConfig) -> Result<Option<SvdResult>> {
    let n = a.rows();
    let p = a.cols();
    let l = r + cfg.oversampling;
    let mut rng = Rng::new(cfg.seed ^ ((n as u64) << 32) ^ p as u64);
    let at = a.transpose();

    let mut omega = vec![vec![0.0; p]; l];
    for c in omega.iter_mut() {
        rng.fill_normal(c, 1.0);
    }
    let mut q = mul_columns(a, &omega);
    orthonormalize(&mut q, &mut rng);

    let mut prev_v: Option<Vec<Vec<f64>>> = None;
    for iter in 0..cfg.max_power_iters {
        let mut z = mul_columns(&at, &q);
        orthonormalize(&mut z, &mut rng);
        q = mul_columns(a, &z);
        orthonormalize(&mut q, &mut rng);

        // Rayleigh-Ritz: B = Qᵀ A, an l x p matrix.
        let b = mul_columns(&at, &q);
        let b = DenseMatrix::from_fn(l, p, |i, j| b[i][j]);
        let (ub, sb, vb) = jacobi_svd(&b, cfg.max_sweeps)?;
        let v_top: Vec<Vec<f64>> = vb[..r].to_vec();

        let settled = match &prev_v {
            Some(prev) if iter + 1 >= cfg.min_power_iters => subspace_change(prev, &v_top) < cfg.subspace_tol,
            _ => false,
        };
        if settled || r == 0 {
            let u_cols: Vec<Vec<f64>> = ub[..r]
                .iter()
                .map(|coef| {
                    let mut col = vec![0.0; n];
                    for (qc, &c) in q.iter().zip(coef) {
                        for (x, &y) in col.iter_mut().zip(qc) {
                            *x += c * y;
                        }
                    }
                    col
                })
                .collect();
            return Ok(Some(SvdResult {
                u: from_columns(&u_cols, n),
                s: sb[..r].to_vec(),
                v: from_columns(&v_top, p),
            }));
        }
        prev_v = Some(v_top);
    }
    Ok(None)
}

/// `‖V - P Pᵀ V‖_F` for orthonormal column sets `P`, `V`.
fn subspace_change(prev: &[Vec<f64>], cur: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for c in cur {
        let mut resid = c.clone();
        for pcol in prev {
            let proj = dot(pcol, c);
            for (x, y) in resid.iter_mut().zip(pcol) {
                *x -= proj * y;
            }
        }
        total += dot(&resid, &resid);
    }
    total.sqrt()
}

/// `a · [cols]`, returned as columns.
fn mul_columns(a: &DenseMatrix, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
    cols.iter()
        .map(|c| (0..a.rows()).map(|i| dot(a.row(i), c)).collect())
        .collect()
}
