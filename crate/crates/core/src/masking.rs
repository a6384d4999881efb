//! Observation patterns: `k` uniformly chosen columns per row.
//!
//! Observations are kept per row rather than as a dense `m x d` mask, so the
//! tall regimes (millions of rows) stay cheap. [`apply_mask`] materializes the
//! dense `P_E(X)` on demand for small problems.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matcore::{DenseMatrix, Rng};

/// For each of `m` rows, a sorted list of `k` distinct column indices in `[0, d)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservationSet {
    m: usize,
    d: usize,
    k: usize,
    cols: Vec<usize>,
}

impl ObservationSet {
    /// Validates and sorts each row. `cols` holds `m * k` indices, row by row.
    pub fn new(m: usize, d: usize, k: usize, mut cols: Vec<usize>) -> Result<Self> {
        if cols.len() != m * k {
            return Err(Error::shape("ObservationSet::new", m * k, cols.len()));
        }
        if k > d {
            return Err(Error::invalid(format!("k = {k} exceeds d = {d}")));
        }
        for (i, row) in cols.chunks_mut(k.max(1)).enumerate().take(m) {
            row.sort_unstable();
            if let Some(&bad) = row.iter().find(|&&j| j >= d) {
                return Err(Error::invalid(format!("row {i}: column {bad} out of range for d = {d}")));
            }
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(format!("row {i}: duplicate column index")));
            }
        }
        Ok(ObservationSet { m, d, k, cols })
    }

    /// Every entry of an `m x d` matrix.
    pub fn full(m: usize, d: usize) -> Self {
        let cols = (0..m).flat_map(|_| 0..d).collect();
        ObservationSet { m, d, k: d, cols }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.cols[i * self.k..(i + 1) * self.k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        (0..self.m).map(move |i| self.row(i))
    }

    pub fn flat(&self) -> &[usize] {
        &self.cols
    }

    /// Total number of observed entries `m * k`.
    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    /// The unordered pair observed in each row; only meaningful for `k = 2`.
    pub fn pairs(&self) -> Result<Vec<(usize, usize)>> {
        if self.k != 2 {
            return Err(Error::invalid(format!("pairs() needs k = 2, have k = {}", self.k)));
        }
        Ok(self.rows().map(|r| (r[0], r[1])).collect())
    }

    /// Dense 0/1 mask `E`.
    pub fn dense_mask(&self) -> DenseMatrix {
        let mut e = DenseMatrix::zeros(self.m, self.d);
        for (i, row) in self.rows().enumerate() {
            for &j in row {
                e[(i, j)] = 1.0;
            }
        }
        e
    }

    /// Text form: header `m d k`, then one line of `k` indices per row.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {} {}", self.m, self.d, self.k)?;
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|j| j.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        self.write_text(&mut w).map_err(io_err)?;
        w.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_text(BufReader::new(file), path)
    }

    pub fn read_text<R: BufRead>(reader: R, path: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = reader.lines().enumerate();
        let (m, d, k) = match lines.next() {
            Some((_, Ok(h))) => {
                let f: Vec<&str> = h.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(perr(1, format!("expected header `m d k`, got {h:?}")));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| perr(1, format!("bad header field {s:?}: {e}")));
                (p(f[0])?, p(f[1])?, p(f[2])?)
            }
            Some((_, Err(e))) => return Err(perr(1, e.to_string())),
            None => return Err(perr(1, "empty file".into())),
        };
        let mut cols = Vec::with_capacity(m * k);
        let mut rows_seen = 0;
        for (idx, line) in lines {
            let lineno = idx + 1;
            let line = line.map_err(|e| perr(lineno, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if rows_seen == m {
                return Err(perr(lineno, format!("more than {m} rows")));
            }
            let before = cols.len();
            for tok in line.split_whitespace() {
                let j: usize = tok.parse().map_err(|_| perr(lineno, format!("non-numeric index {tok:?}")))?;
                if j >= d {
                    return Err(perr(lineno, format!("column {j} out of range for d = {d}")));
                }
                cols.push(j);
            }
            if cols.len() - before != k {
                return Err(perr(lineno, format!("expected {k} indices, got {}", cols.len() - before)));
            }
            let row = &mut cols[before..];
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(perr(lineno, "duplicate column index".into()));
            }
            rows_seen += 1;
        }
        if rows_seen != m {
            return Err(perr(rows_seen + 1, format!("expected {m} rows, found {rows_seen}")));
        }
        Ok(ObservationSet { m, d, k, cols })
    }
}

/// Draws `k` distinct columns per row uniformly at random (partial
/// Fisher-Yates), independently across rows.
pub fn sample_mask(m: usize, d: usize, k: usize, rng: &mut Rng) -> Result<ObservationSet> {
    if k < 2 || k > d {
        return Err(Error::invalid(format!("need 2 <= k <= d, got k = {k}, d = {d}")));
    }
    let mut perm: Vec<usize> = (0..d).collect();
    let mut cols = Vec::with_capacity(m * k);
    for _ in 0..m {
        for t in 0..k {
            let j = t + rng.below(d - t);
            perm.swap(t, j);
        }
        let start = cols.len();
        cols.extend_from_slice(&perm[..k]);
        cols[start..].sort_unstable();
    }
    Ok(ObservationSet { m, d, k, cols })
}

/// `EᵀE`: diagonal counts rows observing each column, off-diagonal counts
/// rows observing both columns.
#[derive(Clone, Debug, PartialEq)]
pub struct CooccurrenceWeights {
    pub w: DenseMatrix,
}

impl CooccurrenceWeights {
    pub fn d(&self) -> usize {
        self.w.rows()
    }

    pub fn max_weight(&self) -> f64 {
        self.w.max_abs()
    }
}

pub fn cooccurrence(obs: &ObservationSet) -> CooccurrenceWeights {
    let d = obs.d();
    let mut counts = vec![0u64; d * d];
    for row in obs.rows() {
        for &a in row {
            for &b in row {
                counts[a * d + b] += 1;
            }
        }
    }
    let w = DenseMatrix::from_vec(d, d, counts.into_iter().map(|c| c as f64).collect())
        .expect("d*d counts");
    CooccurrenceWeights { w }
}

/// `P_E(X)`: entries outside the observation set are zeroed.
pub fn apply_mask(x: &DenseMatrix, obs: &ObservationSet) -> Result<DenseMatrix> {
    if x.shape() != (obs.m(), obs.d()) {
        return Err(Error::shape(
            "apply_mask",
            format!("{}x{}", obs.m(), obs.d()),
            format!("{}x{}", x.rows(), x.cols()),
        ));
    }
    let mut out = DenseMatrix::zeros(obs.m(), obs.d());
    for (i, row) in obs.rows().enumerate() {
        for &j in row {
            out[(i, j)] = x[(i, j)];
        }
    }
    Ok(out)
}

/// Observed values aligned with an [`ObservationSet`]: the sparse form of
/// `P_E(X)`, `m * k` values stored row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedEntries {
    obs: ObservationSet,
    values: Vec<f64>,
}

impl ObservedEntries {
    pub fn new(obs: ObservationSet, values: Vec<f64>) -> Result<Self> {
        if values.len() != obs.len() {
            return Err(Error::shape("ObservedEntries::new", obs.len(), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observed values must be finite"));
        }
        Ok(ObservedEntries { obs, values })
    }

    /// Gathers the observed entries of a dense matrix.
    pub fn from_dense(x: &DenseMatrix, obs: &ObservationSet) -> Result<Self> {
        if x.shape() != (obs.m(), obs.d()) {
            return Err(Error::shape(
                "ObservedEntries::from_dense",
                format!("{}x{}", obs.m(), obs.d()),
                format!("{}x{}", x.rows(), x.cols()),
            ));
        }
        let values = obs
            .rows()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| x[(i, j)]))
            .collect();
        Self::new(obs.clone(), values)
    }

    pub fn obs(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `(columns, values)` of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let k = self.obs.k();
        (self.obs.row(i), &self.values[i * k..(i + 1) * k])
    }

    pub fn m(&self) -> usize {
        self.obs.m()
    }

    pub fn d(&self) -> usize {
        self.obs.d()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.m(), self.d());
        for i in 0..self.m() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Same entries with rows reordered so that new row `t` is old row `perm[t]`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.m() {
            return Err(Error::shape("permute_rows", self.m(), perm.len()));
        }
        let k = self.obs.k();
        let mut cols = Vec::with_capacity(self.obs.len());
        let mut values = Vec::with_capacity(self.values.len());
        for &p in perm {
            let (c, v) = self.row(p);
            cols.extend_from_slice(c);
            values.extend_from_slice(v);
        }
        let obs = ObservationSet::new(self.m(), self.d(), k, cols)?;
        Self::new(obs, values)
    }
}
