use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::datagen::{gen_correlated, gen_gaussian, gen_special, load_matrix, GroundTruth, SpecialKind};
use crate::error::{Error, Result};
use crate::estimators::{
    baseline_direct, baseline_full_completion, baseline_no_diagonal, empirical_target, solve_convex, solve_factored,
    FactorEstimate, SolverConfig,
};
use crate::masking::{sample_mask, ObservedEntries};
use crate::matcore::{derive_seed, DenseMatrix, Rng};
use crate::metrics::{evaluate, incoherence_with_alpha, AlphaSource, EvalReport, Incoherence};

/// Column order of the results CSV.
pub const CSV_HEADER: [&str; 17] = [
    "dataset",
    "d",
    "r",
    "k",
    "m",
    "algorithm",
    "repeat",
    "seed",
    "theta_err",
    "rowspace_err",
    "rowspace_err_norm",
    "colfactor_err",
    "mu1",
    "mu2",
    "mu3",
    "seconds",
    "status",
];

// Seed-derivation tags, kept distinct from point/repeat indices.
const TAG_TRUTH: u64 = 0x7472_7574;
const TAG_MASK: u64 = 0x6d61_736b;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Ours,
    OursConvex,
    FullMc,
    Direct,
    NoDiag,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Ours,
        Algorithm::OursConvex,
        Algorithm::FullMc,
        Algorithm::Direct,
        Algorithm::NoDiag,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ours => "ours",
            Algorithm::OursConvex => "ours_convex",
            Algorithm::FullMc => "full_mc",
            Algorithm::Direct => "direct",
            Algorithm::NoDiag => "no_diag",
        }
    }

    fn index(self) -> u64 {
        Self::ALL.iter().position(|&a| a == self).unwrap() as u64
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataset {
    Gaussian,
    /// Correlated Gaussian factors with this spectrum (length `r`).
    Correlated(Vec<f64>),
    Special(SpecialKind),
    /// A fully observed dense matrix; sweep points use its first `m` rows.
    File(PathBuf),
}

impl Dataset {
    pub fn name(&self) -> &'static str {
        match self {
            Dataset::Gaussian => "gaussian",
            Dataset::Correlated(_) => "correlated",
            Dataset::Special(SpecialKind::AllOnes) => "all_ones",
            Dataset::Special(SpecialKind::SingleZero) => "single_zero",
            Dataset::File(_) => "file",
        }
    }

    /// Ground truth for one sweep point.
    pub fn generate(&self, m: usize, d: usize, r: usize, rng: &mut Rng) -> Result<GroundTruth> {
        match self {
            Dataset::Gaussian => gen_gaussian(m, d, r, rng),
            Dataset::Correlated(spectrum) => {
                if spectrum.len() != r {
                    return Err(Error::invalid(format!("spectrum has {} values, r = {r}", spectrum.len())));
                }
                gen_correlated(m, d, spectrum, rng)
            }
            Dataset::Special(kind) => {
                let gt = gen_special(*kind, m, d)?;
                if gt.r() != r {
                    return Err(Error::invalid(format!("{} has rank {}, r = {r}", self.name(), gt.r())));
                }
                Ok(gt)
            }
            Dataset::File(path) => {
                let x = load_matrix(path)?;
                if x.cols() != d || x.rows() < m {
                    return Err(Error::invalid(format!(
                        "{} is {}x{}, need at least {m} rows and exactly {d} columns",
                        path.display(),
                        x.rows(),
                        x.cols()
                    )));
                }
                let head = DenseMatrix::from_vec(m, d, x.as_slice()[..m * d].to_vec())?;
                GroundTruth::from_matrix(head, r)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub dataset: Dataset,
    pub d: usize,
    pub r: usize,
    pub ks: Vec<usize>,
    pub ms: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub repeats: usize,
    pub base_seed: u64,
    /// Optimizer settings; `rank` is overridden by `r`.
    pub solver: SolverConfig,
    /// Nuclear-norm weight for `ours_convex`; `None` is the theoretical value.
    pub convex_lambda: Option<f64>,
    /// L2 weight for `full_mc`.
    pub full_mc_lambda: f64,
    /// Record wall-clock seconds. Off keeps the CSV byte-reproducible.
    pub timing: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            dataset: Dataset::Gaussian,
            d: 100,
            r: 25,
            ks: vec![2],
            ms: vec![10_000, 100_000],
            algorithms: vec![Algorithm::Ours, Algorithm::Direct, Algorithm::NoDiag],
            repeats: 10,
            base_seed: 0,
            solver: SolverConfig::default(),
            convex_lambda: None,
            full_mc_lambda: crate::estimators::FULL_COMPLETION_LAMBDA,
            timing: false,
            threads: None,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::invalid("repeats must be >= 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithm set is empty"));
        }
        if self.ks.is_empty() || self.ms.is_empty() {
            return Err(Error::invalid("k and m lists must be nonempty"));
        }
        if self.r == 0 || self.r > self.d {
            return Err(Error::invalid(format!("r = {} must lie in [1, d = {}]", self.r, self.d)));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k < 2 || k > self.d) {
            return Err(Error::invalid(format!("k = {k} must lie in [2, d = {}]", self.d)));
        }
        if let Some(&m) = self.ms.iter().find(|&&m| m < self.r) {
            return Err(Error::invalid(format!("m = {m} is below r = {}", self.r)));
        }
        self.solver.validate()
    }

    fn solver_for(&self, algorithm: Algorithm) -> SolverConfig {
        let mut cfg = self.solver.clone();
        cfg.rank = self.r;
        cfg.lambda_reg = match algorithm {
            Algorithm::OursConvex => self.convex_lambda,
            Algorithm::FullMc => Some(self.full_mc_lambda),
            _ => None,
        };
        cfg
    }
}

/// One (point, algorithm, repeat) run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub dataset: String,
    pub d: usize,
    pub r: usize,
    pub k: usize,
    pub m: usize,
    pub algorithm: Algorithm,
    pub repeat: usize,
    pub seed: u64,
    /// `None` for failed runs.
    pub report: Option<EvalReport>,
    pub seconds: f64,
    /// `ok`, `warning` (loss trace not settled) or `error:<message>`.
    pub status: String,
}

impl ExperimentRecord {
    pub fn is_ok(&self) -> bool {
        self.report.is_some()
    }

    fn fields(&self) -> Vec<String> {
        let mut out = vec![
            self.dataset.clone(),
            self.d.to_string(),
            self.r.to_string(),
            self.k.to_string(),
            self.m.to_string(),
            self.algorithm.to_string(),
            self.repeat.to_string(),
            self.seed.to_string(),
        ];
        match &self.report {
            Some(e) => out.extend(
                [
                    e.theta_err,
                    e.rowspace_err,
                    e.rowspace_err_normalized,
                    e.colfactor_err,
                    e.mu1,
                    e.mu2,
                    e.mu3,
                ]
                .iter()
                .map(f64::to_string),
            ),
            None => out.extend(std::iter::repeat_n(String::new(), 7)),
        }
        out.push(self.seconds.to_string());
        out.push(self.status.clone());
        out
    }
}

/// Output of one estimator run.
#[derive(Clone, Debug)]
pub struct Estimate {
    pub factors: FactorEstimate,
    /// Present for the Gram-matrix solvers.
    pub theta_hat: Option<DenseMatrix>,
    pub warning: bool,
}

/// Runs one estimator on observed entries.
pub fn run_algorithm(algorithm: Algorithm, x: &ObservedEntries, cfg: &SolverConfig, rng: &mut Rng) -> Result<Estimate> {
    let from_theta = |t: crate::estimators::ThetaEstimate| Estimate {
        factors: t.factors,
        theta_hat: Some(t.theta_hat),
        warning: t.warning,
    };
    let from_factors = |f: FactorEstimate| Estimate {
        factors: f,
        theta_hat: None,
        warning: false,
    };
    Ok(match algorithm {
        Algorithm::Ours => from_theta(solve_factored(&empirical_target(x), cfg, rng)?),
        Algorithm::OursConvex => from_theta(solve_convex(&empirical_target(x), cfg)?),
        Algorithm::FullMc => from_factors(baseline_full_completion(x, cfg, rng)?),
        Algorithm::Direct => from_factors(baseline_direct(x, cfg.rank)?),
        Algorithm::NoDiag => from_factors(baseline_no_diagonal(x, cfg.rank)?),
    })
}

/// Incoherence of a ground truth with the exact `α = max X_ij²`.
pub fn truth_incoherence(gt: &GroundTruth) -> Result<Incoherence> {
    incoherence_with_alpha(&gt.theta_star, gt.r(), gt.max_sq_entry(), AlphaSource::Exact)
}

struct Point {
    index: usize,
    k: usize,
    m: usize,
}

fn points(spec: &SweepSpec) -> Vec<Point> {
    let mut out = Vec::new();
    for &k in &spec.ks {
        for &m in &spec.ms {
            out.push(Point { index: out.len(), k, m });
        }
    }
    out
}

/// Runs every (point, algorithm, repeat) combination. Records come back
/// ordered by point, then algorithm (in spec order), then repeat.
///
/// Ground truth is drawn once per point; masks once per (point, repeat) and
/// shared by all algorithms, so comparisons are paired.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ExperimentRecord>> {
    spec.validate()?;
    match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?
            .install(|| sweep_inner(spec)),
        None => sweep_inner(spec),
    }
}

fn sweep_inner(spec: &SweepSpec) -> Result<Vec<ExperimentRecord>> {
    let mut records = Vec::new();
    for p in points(spec) {
        log::info!("sweep point {}: k = {}, m = {}", p.index, p.k, p.m);
        let truth_seed = derive_seed(spec.base_seed, &[TAG_TRUTH, p.index as u64]);
        let truth = spec
            .dataset
            .generate(p.m, spec.d, spec.r, &mut Rng::new(truth_seed))
            .and_then(|gt| truth_incoherence(&gt).map(|mu| (gt, mu)));
        let masks: Vec<Result<ObservedEntries>> = (0..spec.repeats)
            .into_par_iter()
            .map(|rep| {
                let (gt, _) = truth.as_ref().map_err(|e| Error::invalid(e.to_string()))?;
                let mut rng = Rng::new(derive_seed(spec.base_seed, &[TAG_MASK, p.index as u64, rep as u64]));
                gt.observe(&sample_mask(p.m, spec.d, p.k, &mut rng)?)
            })
            .collect();
        let jobs: Vec<(Algorithm, usize)> = spec
            .algorithms
            .iter()
            .flat_map(|&a| (0..spec.repeats).map(move |rep| (a, rep)))
            .collect();
        let batch: Vec<ExperimentRecord> = jobs
            .into_par_iter()
            .map(|(algorithm, repeat)| {
                let seed = derive_seed(spec.base_seed, &[p.index as u64, repeat as u64, algorithm.index()]);
                let start = Instant::now();
                let outcome = match (&truth, &masks[repeat]) {
                    (Ok((gt, mu)), Ok(x)) => {
                        let cfg = spec.solver_for(algorithm);
                        run_algorithm(algorithm, x, &cfg, &mut Rng::new(seed)).and_then(|est| {
                            evaluate(&est.factors, est.theta_hat.as_ref(), gt, mu).map(|rep| (rep, est.warning))
                        })
                    }
                    (Err(e), _) | (_, Err(e)) => Err(Error::invalid(e.to_string())),
                };
                let seconds = if spec.timing { start.elapsed().as_secs_f64() } else { 0.0 };
                let (report, status) = match outcome {
                    Ok((rep, false)) => (Some(rep), "ok".to_string()),
                    Ok((rep, true)) => (Some(rep), "warning".to_string()),
                    Err(e) => {
                        log::warn!("{algorithm} at m = {}, k = {}, repeat {repeat}: {e}", p.m, p.k);
                        (None, format!("error:{e}"))
                    }
                };
                ExperimentRecord {
                    dataset: spec.dataset.name().to_string(),
                    d: spec.d,
                    r: spec.r,
                    k: p.k,
                    m: p.m,
                    algorithm,
                    repeat,
                    seed,
                    report,
                    seconds,
                    status,
                }
            })
            .collect();
        records.extend(batch);
    }
    Ok(records)
}

/// Appends records to a CSV file, writing the header only when the file is
/// new or empty. An existing header must match.
pub fn append_csv(path: &Path, records: &[ExperimentRecord]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let existing = std::fs::metadata(path).map(|m| m.len()).unwrap_or(0);
    if existing > 0 {
        let mut first = String::new();
        BufReader::new(std::fs::File::open(path).map_err(io)?)
            .read_line(&mut first)
            .map_err(io)?;
        if first.trim_end() != CSV_HEADER.join(",") {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: "existing file has a different header".into(),
            });
        }
    }
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    write_records(file, records, existing == 0)
}

/// Writes records as CSV rows, optionally preceded by the header.
pub fn write_records<W: std::io::Write>(w: W, records: &[ExperimentRecord], header: bool) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    if header {
        out.write_record(CSV_HEADER)?;
    }
    for rec in records {
        out.write_record(rec.fields())?;
    }
    out.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
