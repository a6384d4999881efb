//! Synthetic ground truth and the two text formats.
//!
//! Ground truth keeps `X = UVᵀ` in factored form: at `m = 10⁶`, `d = 100` the
//! dense matrix alone would be 800 MB, while the estimators only ever need
//! the `m k` observed entries.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::masking::{ObservationSet, ObservedEntries};
use crate::matcore::{dot, svd_truncated, DenseMatrix, Rng};

/// `X = UVᵀ` together with `Θ* = (1/m) XᵀX` and its top-`r` eigenpairs.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// `m x r`
    pub u: DenseMatrix,
    /// `d x r`
    pub v: DenseMatrix,
    pub theta_star: DenseMatrix,
    /// `d x r`, top eigenvectors of `theta_star`.
    pub q_true: DenseMatrix,
    pub lambda_true: Vec<f64>,
}

impl GroundTruth {
    /// Builds `Θ*` and its eigenpairs from the factors; `r` is the number of
    /// eigenpairs kept.
    pub fn from_factors(u: DenseMatrix, v: DenseMatrix, r: usize) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::shape("GroundTruth::from_factors", u.cols(), v.cols()));
        }
        let (m, d) = (u.rows(), v.rows());
        if m == 0 || d == 0 || r == 0 || r > d {
            return Err(Error::invalid(format!("bad ground truth shape m = {m}, d = {d}, r = {r}")));
        }
        // Θ* = V (UᵀU / m) Vᵀ
        let gram_u = u.tr_matmul(&u)?.scale(1.0 / m as f64);
        let mut theta_star = v.matmul(&gram_u)?.matmul_tr(&v)?;
        theta_star.symmetrize();
        let svd = svd_truncated(&theta_star, r)?;
        Ok(GroundTruth {
            u,
            v,
            theta_star,
            q_true: svd.v,
            lambda_true: svd.s,
        })
    }

    /// Wraps a fully known matrix (`U = X`, `V = I`).
    pub fn from_matrix(x: DenseMatrix, r: usize) -> Result<Self> {
        let d = x.cols();
        Self::from_factors(x, DenseMatrix::identity(d), r)
    }

    pub fn m(&self) -> usize {
        self.u.rows()
    }

    pub fn d(&self) -> usize {
        self.v.rows()
    }

    pub fn r(&self) -> usize {
        self.lambda_true.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        dot(self.u.row(i), self.v.row(j))
    }

    /// The dense `m x d` matrix. Only for small problems.
    pub fn x(&self) -> DenseMatrix {
        self.u.matmul_tr(&self.v).expect("factor shapes checked at construction")
    }

    /// `P_E(X)` in sparse form.
    pub fn observe(&self, obs: &ObservationSet) -> Result<ObservedEntries> {
        if (obs.m(), obs.d()) != (self.m(), self.d()) {
            return Err(Error::shape(
                "GroundTruth::observe",
                format!("{}x{}", self.m(), self.d()),
                format!("{}x{}", obs.m(), obs.d()),
            ));
        }
        let values = obs
            .rows()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| self.entry(i, j)))
            .collect();
        ObservedEntries::new(obs.clone(), values)
    }

    /// `max_ij X_ij²`.
    pub fn max_sq_entry(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.m() {
            let ui = self.u.row(i);
            for j in 0..self.d() {
                let x = dot(ui, self.v.row(j));
                best = best.max(x * x);
            }
        }
        best
    }
}

/// Gaussian factors with entries of variance `r^{-1/2}` (standard deviation
/// `r^{-1/4}`), so every `X_ij` has unit variance.
pub fn gen_gaussian(m: usize, d: usize, r: usize, rng: &mut Rng) -> Result<GroundTruth> {
    if r == 0 || r > m.min(d) {
        return Err(Error::invalid(format!("rank {r} must lie in [1, min(m, d)]")));
    }
    let sd = (r as f64).powf(-0.25);
    let mut u = DenseMatrix::zeros(m, r);
    rng.fill_normal(u.as_mut_slice(), sd);
    let mut v = DenseMatrix::zeros(d, r);
    rng.fill_normal(v.as_mut_slice(), sd);
    GroundTruth::from_factors(u, v, r)
}

/// `X = Z₁ diag(√s) Z₂ᵀ` with standard Gaussian `Z₁`, `Z₂`.
pub fn gen_correlated(m: usize, d: usize, spectrum: &[f64], rng: &mut Rng) -> Result<GroundTruth> {
    let r = spectrum.len();
    if r == 0 || r > m.min(d) {
        return Err(Error::invalid(format!("spectrum length {r} must lie in [1, min(m, d)]")));
    }
    if let Some(bad) = spectrum.iter().find(|&&s| !(s >= 0.0 && s.is_finite())) {
        return Err(Error::invalid(format!("spectrum entry {bad} is not a nonnegative number")));
    }
    let mut z1 = DenseMatrix::zeros(m, r);
    rng.fill_normal(z1.as_mut_slice(), 1.0);
    let mut v = DenseMatrix::zeros(d, r);
    rng.fill_normal(v.as_mut_slice(), 1.0);
    let roots: Vec<f64> = spectrum.iter().map(|s| s.sqrt()).collect();
    GroundTruth::from_factors(z1.scale_columns(&roots), v, r)
}

/// `s_i = c₀ i^{-a}` for `i = 1..=r`.
pub fn power_law_spectrum(r: usize, c0: f64, a: f64) -> Vec<f64> {
    (1..=r).map(|i| c0 * (i as f64).powf(-a)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpecialKind {
    /// Every entry is 1.
    AllOnes,
    /// All ones except `X[0, 0] = 0`.
    SingleZero,
}

impl std::str::FromStr for SpecialKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all_ones" => Ok(SpecialKind::AllOnes),
            "single_zero" => Ok(SpecialKind::SingleZero),
            other => Err(Error::invalid(format!("unknown special matrix {other:?}"))),
        }
    }
}

pub fn gen_special(kind: SpecialKind, m: usize, d: usize) -> Result<GroundTruth> {
    if m < 2 || d < 2 {
        return Err(Error::invalid("special matrices need m, d >= 2"));
    }
    match kind {
        SpecialKind::AllOnes => GroundTruth::from_factors(DenseMatrix::filled(m, 1, 1.0), DenseMatrix::filled(d, 1, 1.0), 1),
        SpecialKind::SingleZero => {
            // X = 11ᵀ - e₀e₀ᵀ
            let u = DenseMatrix::from_fn(m, 2, |i, c| match (i, c) {
                (_, 0) => 1.0,
                (0, _) => -1.0,
                _ => 0.0,
            });
            let v = DenseMatrix::from_fn(d, 2, |j, c| if c == 0 || j == 0 { 1.0 } else { 0.0 });
            GroundTruth::from_factors(u, v, 2)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_token<T: std::str::FromStr>(tok: Option<&str>, what: &str, path: &Path, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| parse_err(path, line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("bad {what} {tok:?}")))
}

/// Writes `rows cols` followed by one space-separated row per line, each value
/// with 17 significant digits.
pub fn write_matrix<W: Write>(x: &DenseMatrix, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{} {}", x.rows(), x.cols())?;
    for i in 0..x.rows() {
        let mut first = true;
        for v in x.row(i) {
            if !first {
                w.write_all(b" ")?;
            }
            first = false;
            write!(w, "{v:.16e}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn save_matrix(x: &DenseMatrix, path: &Path) -> Result<()> {
    write_matrix(x, create(path)?).map_err(io_err(path))
}

pub fn read_matrix<R: BufRead>(reader: R, path: &Path) -> Result<DenseMatrix> {
    let mut lines = reader.lines().enumerate();
    let (rows, cols) = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(io_err(path))?;
            let mut toks = line.split_whitespace();
            let rows: usize = parse_token(toks.next(), "row count", path, 1)?;
            let cols: usize = parse_token(toks.next(), "column count", path, 1)?;
            if toks.next().is_some() {
                return Err(parse_err(path, 1, "header must be `rows cols`"));
            }
            (rows, cols)
        }
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        if seen == rows {
            return Err(parse_err(path, lineno, format!("more than {rows} rows")));
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(parse_token::<f64>(Some(tok), "value", path, lineno)?);
        }
        if data.len() - before != cols {
            return Err(parse_err(path, lineno, format!("expected {cols} values, found {}", data.len() - before)));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(parse_err(path, seen + 2, format!("expected {rows} rows, found {seen}")));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn load_matrix(path: &Path) -> Result<DenseMatrix> {
    read_matrix(open(path)?, path)
}

/// Writes `m d k` followed by one `row col value` triplet per line.
pub fn write_observations<W: Write>(x: &ObservedEntries, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{} {} {}", x.m(), x.d(), x.obs().k())?;
    for i in 0..x.m() {
        let (cols, vals) = x.row(i);
        for (j, v) in cols.iter().zip(vals) {
            writeln!(w, "{i} {j} {v:.16e}")?;
        }
    }
    w.flush()
}

pub fn save_observations(x: &ObservedEntries, path: &Path) -> Result<()> {
    write_observations(x, create(path)?).map_err(io_err(path))
}

/// Reads a triplet file. Triplets may come in any order, but every row must
/// have exactly `k` distinct columns.
pub fn read_observations<R: BufRead>(reader: R, path: &Path) -> Result<ObservedEntries> {
    let mut lines = reader.lines().enumerate();
    let (m, d, k) = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(io_err(path))?;
            let mut toks = line.split_whitespace();
            let m: usize = parse_token(toks.next(), "m", path, 1)?;
            let d: usize = parse_token(toks.next(), "d", path, 1)?;
            let k: usize = parse_token(toks.next(), "k", path, 1)?;
            if toks.next().is_some() {
                return Err(parse_err(path, 1, "header must be `m d k`"));
            }
            if k == 0 || k > d {
                return Err(parse_err(path, 1, format!("k = {k} must lie in [1, d = {d}]")));
            }
            (m, d, k)
        }
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::with_capacity(k); m];
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let i: usize = parse_token(toks.next(), "row index", path, lineno)?;
        let j: usize = parse_token(toks.next(), "column index", path, lineno)?;
        let v: f64 = parse_token(toks.next(), "value", path, lineno)?;
        if toks.next().is_some() {
            return Err(parse_err(path, lineno, "expected `row col value`"));
        }
        if i >= m || j >= d {
            return Err(parse_err(path, lineno, format!("index ({i}, {j}) out of range for {m}x{d}")));
        }
        if !v.is_finite() {
            return Err(parse_err(path, lineno, "value is not finite"));
        }
        let row = &mut rows[i];
        if row.iter().any(|&(c, _)| c == j) {
            return Err(parse_err(path, lineno, format!("duplicate entry ({i}, {j})")));
        }
        if row.len() == k {
            return Err(parse_err(path, lineno, format!("row {i} has more than k = {k} entries")));
        }
        row.push((j, v));
    }
    let mut cols = Vec::with_capacity(m * k);
    let mut values = Vec::with_capacity(m * k);
    for (i, mut row) in rows.into_iter().enumerate() {
        if row.len() != k {
            return Err(Error::invalid(format!(
                "{}: row {i} has {} entries, expected k = {k}",
                path.display(),
                row.len()
            )));
        }
        row.sort_unstable_by_key(|&(c, _)| c);
        for (c, v) in row {
            cols.push(c);
            values.push(v);
        }
    }
    ObservedEntries::new(ObservationSet::new(m, d, k, cols)?, values)
}

pub fn load_observations(path: &Path) -> Result<ObservedEntries> {
    read_observations(open(path)?, path)
}
