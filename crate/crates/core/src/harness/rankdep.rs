use rayon::prelude::*;

use crate::datagen::gen_gaussian;
use crate::error::{Error, Result};
use crate::estimators::{empirical_target, solve_factored, SolverConfig};
use crate::masking::sample_mask;
use crate::matcore::{derive_seed, Rng};
use crate::metrics::eval_rowspace;

/// Search for the smallest `m` reaching a target recovery error, per rank.
#[derive(Clone, Debug)]
pub struct RankDepSpec {
    pub ranks: Vec<usize>,
    pub d: usize,
    pub k: usize,
    /// Accepted normalized rowspace error is `target ± tolerance`.
    pub target: f64,
    pub tolerance: f64,
    pub runs_per_probe: usize,
    /// Search range is `(0, m_max]`.
    pub m_max: usize,
    pub max_probes: usize,
    /// Unaccepted search stops once `hi / lo` drops below this.
    pub min_ratio: f64,
    pub base_seed: u64,
    /// Optimizer settings; `rank` is overridden per probe.
    pub solver: SolverConfig,
}

impl Default for RankDepSpec {
    fn default() -> Self {
        RankDepSpec {
            ranks: vec![2, 3, 4, 6],
            d: 200,
            k: 2,
            target: 0.1,
            tolerance: 0.02,
            runs_per_probe: 20,
            m_max: 4_000_000,
            max_probes: 22,
            min_ratio: 1.05,
            base_seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

impl RankDepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ranks.is_empty() {
            return Err(Error::invalid("rank list is empty"));
        }
        if self.ranks.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("rank list must be nondecreasing"));
        }
        if !(self.target > self.tolerance && self.tolerance > 0.0) {
            return Err(Error::invalid("need target > tolerance > 0"));
        }
        if self.runs_per_probe == 0 || self.max_probes == 0 {
            return Err(Error::invalid("runs_per_probe and max_probes must be >= 1"));
        }
        if self.k < 2 || self.k > self.d {
            return Err(Error::invalid(format!("k = {} must lie in [2, d = {}]", self.k, self.d)));
        }
        if let Some(&r) = self.ranks.iter().find(|&&r| r == 0 || r > self.d) {
            return Err(Error::invalid(format!("rank {r} must lie in [1, d = {}]", self.d)));
        }
        if !(self.min_ratio > 1.0) {
            return Err(Error::invalid("min_ratio must exceed 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankDepPoint {
    pub r: usize,
    pub m_star: usize,
    /// The mean error at `m_star` fell inside the acceptance band.
    pub accepted: bool,
    /// `(m, mean error)` for every probe, in search order.
    pub probes: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankDepResult {
    pub points: Vec<RankDepPoint>,
    /// Least-squares slope of `ln m*` against `ln r`; absent with fewer than
    /// two distinct ranks.
    pub slope: Option<f64>,
}

/// Mean normalized rowspace error of the factored solver over
/// `runs_per_probe` fresh Gaussian instances with `m` rows.
pub fn factored_probe(spec: &RankDepSpec, r: usize, m: usize) -> Result<f64> {
    let errs: Vec<f64> = (0..spec.runs_per_probe)
        .into_par_iter()
        .map(|run| {
            let mut rng = Rng::new(derive_seed(spec.base_seed, &[r as u64, m as u64, run as u64]));
            let gt = gen_gaussian(m, spec.d, r, &mut rng)?;
            let x = gt.observe(&sample_mask(m, spec.d, spec.k, &mut rng)?)?;
            let cfg = SolverConfig {
                rank: r,
                ..spec.solver.clone()
            };
            let est = solve_factored(&empirical_target(&x), &cfg, &mut rng)?;
            Ok(eval_rowspace(&est.factors.q, &gt.q_true)? / r as f64)
        })
        .collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Runs the search with the factored solver as the probe.
pub fn rank_dependence(spec: &RankDepSpec) -> Result<RankDepResult> {
    rank_dependence_with(spec, |r, m| factored_probe(spec, r, m))
}

/// Bisection on `(0, m_max]` for each rank, assuming the probed error
/// decreases in `m`. `probe(r, m)` returns the mean error at `m` rows.
pub fn rank_dependence_with(spec: &RankDepSpec, mut probe: impl FnMut(usize, usize) -> Result<f64>) -> Result<RankDepResult> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.ranks.len());
    for &r in &spec.ranks {
        let point = search(spec, r, &mut probe)?;
        log::info!(
            "rank {r}: m* = {}{}",
            point.m_star,
            if point.accepted { "" } else { " (not accepted)" }
        );
        points.push(point);
    }
    let xs: Vec<f64> = points.iter().map(|p| (p.r as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.m_star as f64).ln()).collect();
    Ok(RankDepResult {
        slope: fit_slope(&xs, &ys),
        points,
    })
}

fn search(spec: &RankDepSpec, r: usize, probe: &mut impl FnMut(usize, usize) -> Result<f64>) -> Result<RankDepPoint> {
    let (lo_band, hi_band) = (spec.target - spec.tolerance, spec.target + spec.tolerance);
    // Error at `lo` is too high, error at `hi` is at most the band's top.
    let mut lo = 0usize;
    let mut hi = spec.m_max;
    let mut hi_checked = false;
    let mut probes = Vec::new();
    while probes.len() < spec.max_probes {
        let m = (lo + (hi - lo) / 2).max(r).max(1);
        if m <= lo || m >= hi {
            break;
        }
        let err = probe(r, m)?;
        probes.push((m, err));
        log::debug!("rank {r}: m = {m}, error {err:.4}");
        if (lo_band..=hi_band).contains(&err) {
            return Ok(RankDepPoint {
                r,
                m_star: m,
                accepted: true,
                probes,
            });
        }
        if err > hi_band {
            lo = m;
        } else {
            hi = m;
            hi_checked = true;
        }
        if lo > 0 && (hi as f64) / (lo as f64) < spec.min_ratio {
            break;
        }
    }
    // Never saw an error below the band: the range was too short.
    let m_star = if hi_checked { lo + (hi - lo) / 2 } else { spec.m_max };
    Ok(RankDepPoint {
        r,
        m_star,
        accepted: false,
        probes,
    })
}

/// Ordinary least-squares slope; `None` when `xs` has no spread.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
