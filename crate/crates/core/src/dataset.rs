//! Row-sparse data matrices: LIBSVM parsing, synthetic Gaussian data, and
//! permuted views.
//!
//! External LIBSVM indices are 1-based; they are stored 0-based. Every row is
//! kept sorted by feature index. A dataset never changes after construction.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;

/// An `n x d` data matrix in CSR layout with one label per row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDataset<F> {
    d: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<F>,
    labels: Vec<F>,
}

/// Borrowed sparse row `a_i`.
#[derive(Clone, Copy, Debug)]
pub struct SparseRow<'a, F> {
    pub indices: &'a [usize],
    pub values: &'a [F],
}

impl<F: Scalar> SparseRow<'_, F> {
    pub fn dot(&self, x: &[F]) -> F {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&j, &v)| v * x[j])
            .sum()
    }

    /// `y += alpha * a`.
    pub fn axpy(&self, alpha: F, y: &mut [F]) {
        for (&j, &v) in self.indices.iter().zip(self.values) {
            y[j] += alpha * v;
        }
    }

    pub fn sq_norm(&self) -> F {
        self.values.iter().map(|&v| v * v).sum()
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

impl<F: Scalar> SparseDataset<F> {
    /// Builds a dataset from per-row `(index, value)` lists with 0-based indices.
    ///
    /// Rows are sorted; duplicate or out-of-range indices are rejected.
    pub fn from_rows(d: usize, rows: Vec<Vec<(usize, F)>>, labels: Vec<F>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidDataset("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::InvalidDataset("dataset has no features".into()));
        }
        if labels.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: labels.len(),
            });
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        indptr.push(0);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_unstable_by_key(|&(j, _)| j);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidDataset(format!(
                        "row {i} repeats feature index {}",
                        w[0].0
                    )));
                }
            }
            if let Some(&(j, _)) = row.last() {
                if j >= d {
                    return Err(Error::InvalidDataset(format!(
                        "row {i} has feature index {j} outside 0..{d}"
                    )));
                }
            }
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            d,
            indptr,
            indices,
            values,
            labels,
        })
    }

    /// Builds a dataset with fully dense rows (every entry stored).
    pub fn from_dense(rows: &[Vec<F>], labels: Vec<F>) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: bad.len(),
            });
        }
        let rows = rows
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Self::from_rows(d, rows, labels)
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> SparseRow<'_, F> {
        let (lo, hi) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[lo..hi],
            values: &self.values[lo..hi],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = SparseRow<'_, F>> + '_ {
        (0..self.n()).map(move |i| self.row(i))
    }

    pub fn labels(&self) -> &[F] {
        &self.labels
    }

    /// `‖a_i‖²` for every row.
    pub fn row_sq_norms(&self) -> Vec<F> {
        self.rows().map(|r| r.sq_norm()).collect()
    }

    /// Returns `A x`.
    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        self.rows().map(|r| r.dot(x)).collect()
    }

    /// A copy with every stored value multiplied by `factor`.
    pub fn scaled(&self, factor: F) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn permuted<'a>(&'a self, perm: &'a [usize]) -> Result<PermutedView<'a, F>> {
        PermutedView::new(self, perm)
    }

    /// Writes the dataset in LIBSVM format using shortest round-trip float
    /// formatting, so parsing the output reproduces the dataset exactly.
    pub fn write_libsvm<W: Write>(&self, mut out: W) -> Result<()> {
        for (i, row) in self.rows().enumerate() {
            write!(out, "{}", self.labels[i])?;
            for (&j, &v) in row.indices.iter().zip(row.values) {
                write!(out, " {}:{}", j + 1, v)?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Parses LIBSVM text: `<label> <idx>:<val> ...` per line, 1-based indices.
///
/// Blank lines and anything after `#` are ignored. `d` defaults to the largest
/// index seen; `d_override` widens it (it may not be smaller than that index).
pub fn parse_libsvm<F: Scalar, R: BufRead>(reader: R, d_override: Option<usize>) -> Result<SparseDataset<F>> {
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let content = line.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label = parse_number::<F>(label_tok, lineno, "label")?;

        let mut row = Vec::new();
        for tok in tokens {
            let (idx_tok, val_tok) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected <index>:<value>, found {tok:?}"),
            })?;
            let idx: usize = idx_tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("malformed feature index {idx_tok:?}"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "feature indices are 1-based; found 0".into(),
                });
            }
            let value = parse_number::<F>(val_tok, lineno, "value")?;
            row.push((idx - 1, value));
            max_index = max_index.max(idx);
        }
        row.sort_unstable_by_key(|&(j, _)| j);
        if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("duplicate feature index {}", w[0].0 + 1),
            });
        }
        rows.push(row);
        labels.push(label);
    }

    let d = match d_override {
        Some(d) if d < max_index => {
            return Err(Error::InvalidDataset(format!(
                "feature count override {d} is smaller than the largest index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    SparseDataset::from_rows(d, rows, labels)
}

fn parse_number<F: Scalar>(tok: &str, line: usize, what: &str) -> Result<F> {
    match tok.parse::<F>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            line,
            msg: format!("malformed {what} {tok:?}"),
        }),
    }
}

pub fn parse_libsvm_str<F: Scalar>(text: &str, d_override: Option<usize>) -> Result<SparseDataset<F>> {
    parse_libsvm(text.as_bytes(), d_override)
}

pub fn load_libsvm<F: Scalar, P: AsRef<Path>>(path: P, d_override: Option<usize>) -> Result<SparseDataset<F>> {
    let file = File::open(path)?;
    parse_libsvm(BufReader::new(file), d_override)
}

/// `n x d` matrix of i.i.d. standard normals (Box–Muller over the crate PRNG),
/// stored with dense rows; labels are zero.
pub fn gen_gaussian<F: Scalar>(n: usize, d: usize, seed: u64) -> Result<SparseDataset<F>> {
    if n == 0 || d == 0 {
        return Err(Error::Config("gaussian data needs n >= 1 and d >= 1".into()));
    }
    let mut rng = rng::stream(seed, rng::GAUSSIAN_STREAM);
    let total = n * d;
    let mut values = Vec::with_capacity(total + 1);
    while values.len() < total {
        let (a, b) = rng::box_muller(&mut rng);
        values.push(F::of(a));
        values.push(F::of(b));
    }
    values.truncate(total);
    Ok(SparseDataset {
        d,
        indptr: (0..=n).map(|i| i * d).collect(),
        indices: (0..n).flat_map(|_| 0..d).collect(),
        values,
        labels: vec![F::zero(); n],
    })
}

/// Whether `perm` is a bijection on `0..n`.
pub fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    perm.iter().all(|&p| p < n && !std::mem::replace(&mut seen[p], true))
}

/// Rows of a dataset in the order `π`: view row `i` is base row `π_i`.
#[derive(Clone, Copy, Debug)]
pub struct PermutedView<'a, F> {
    base: &'a SparseDataset<F>,
    perm: &'a [usize],
}

impl<'a, F: Scalar> PermutedView<'a, F> {
    pub fn new(base: &'a SparseDataset<F>, perm: &'a [usize]) -> Result<Self> {
        if !is_permutation(perm, base.n()) {
            return Err(Error::Config(format!(
                "not a permutation of 0..{}",
                base.n()
            )));
        }
        Ok(Self { base, perm })
    }

    pub fn base(&self) -> &'a SparseDataset<F> {
        self.base
    }

    pub fn perm(&self) -> &'a [usize] {
        self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Base index of view row `i`.
    pub fn source(&self, i: usize) -> usize {
        self.perm[i]
    }

    pub fn row(&self, i: usize) -> SparseRow<'a, F> {
        self.base.row(self.perm[i])
    }
}
