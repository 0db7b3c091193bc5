//! Dense linear algebra used by the block subproblems.
//!
//! Everything here is row-major `f64`. Matrices at the sizes this crate
//! targets (a few thousand rows at most) fit comfortably in memory, so
//! there is no sparse storage.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::ops::{Deref, DerefMut, Index, IndexMut};
use std::path::Path;

use crate::error::{Error, Result};
use crate::exec::{self, ExecPolicy};

/// A dense column vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![0.0; n])
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Vector(vec![value; n])
    }

    /// Builds a vector, rejecting non-finite entries.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector(data))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm2(&self) -> f64 {
        norm2(&self.0)
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl FromIterator<f64> for Vector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Vector(iter.into_iter().collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `‖a − b‖²₂`
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Empty shapes and non-finite
    /// entries are rejected.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "empty matrix {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Matrix::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m[(i, i)] = *d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Columns `start..end` as a new matrix.
    pub fn column_block(&self, start: usize, end: usize) -> Matrix {
        Matrix::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn add_diagonal(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// Largest `|P_ij − P_ji|` relative to `1 + max|P_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = 1.0 + norm_inf(&self.data);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// `A·v`
    pub fn matvec(&self, v: &[f64]) -> Vector {
        assert_eq!(v.len(), self.cols, "matvec dimension");
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `Aᵀ·v`
    pub fn matvec_t(&self, v: &[f64]) -> Vector {
        assert_eq!(v.len(), self.rows, "matvec_t dimension");
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            if *vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Vector(out)
    }

    /// `A·B`
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        self.matmul_with(other, ExecPolicy::default())
    }

    pub fn matmul_with(&self, other: &Matrix, policy: ExecPolicy) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        exec::for_each_chunk_mut(&mut out.data, other.cols, policy, |i, row| {
            for (k, a) in self.row(i).iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                for (o, b) in row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        });
        out
    }

    /// `A·Bᵀ`
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_t dimension");
        let mut out = Matrix::zeros(self.rows, other.rows);
        exec::for_each_chunk_mut(&mut out.data, other.rows, ExecPolicy::default(), |i, row| {
            let a = self.row(i);
            for (j, o) in row.iter_mut().enumerate() {
                *o = dot(a, other.row(j));
            }
        });
        out
    }

    /// `Aᵀ·A`
    pub fn gram(&self) -> Matrix {
        gram_with(self, ExecPolicy::default())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `AᵀA`. The upper triangle is computed and mirrored, so the result is
/// exactly symmetric as stored.
pub fn gram(a: &Matrix) -> Matrix {
    gram_with(a, ExecPolicy::default())
}

pub fn gram_with(a: &Matrix, policy: ExecPolicy) -> Matrix {
    let n = a.cols;
    let at = a.transpose();
    let mut g = Matrix::zeros(n, n);
    exec::for_each_chunk_mut(&mut g.data, n, policy, |i, row| {
        let ai = at.row(i);
        for (j, o) in row.iter_mut().enumerate().skip(i) {
            *o = dot(ai, at.row(j));
        }
    });
    for i in 0..n {
        for j in 0..i {
            g.data[i * n + j] = g.data[j * n + i];
        }
    }
    g
}

/// Lower-triangular Cholesky factor `L` with `P + jitter·I = L·Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
    jitter: f64,
}

impl Cholesky {
    /// Factors `P + jitter·I`. If that fails, retries once with an extra
    /// `1e-10·trace(P)/dim` on the diagonal before giving up.
    pub fn factor(p: &Matrix, jitter: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of a {}x{} matrix",
                p.rows, p.cols
            )));
        }
        let asym = p.asymmetry();
        if asym > 1e-10 {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let n = p.rows;
        if let Some(l) = cholesky_lower(p, jitter) {
            return Ok(Cholesky { l, jitter });
        }
        let extra = 1e-10 * p.trace() / n as f64;
        if extra > 0.0 {
            let escalated = jitter + extra;
            if let Some(l) = cholesky_lower(p, escalated) {
                log::debug!("cholesky needed jitter escalation to {escalated:e}");
                return Ok(Cholesky {
                    l,
                    jitter: escalated,
                });
            }
        }
        Err(Error::NotPositiveDefinite { dim: n })
    }

    pub fn dim(&self) -> usize {
        self.l.rows
    }

    /// The diagonal shift actually applied (after any escalation).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn solve(&self, q: &[f64]) -> Vector {
        let n = self.l.rows;
        assert_eq!(q.len(), n, "cholesky solve dimension");
        let l = &self.l;
        let mut x = q.to_vec();
        for i in 0..n {
            let s = dot(&l.row(i)[..i], &x[..i]);
            x[i] = (x[i] - s) / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        Vector(x)
    }
}

fn cholesky_lower(p: &Matrix, jitter: f64) -> Option<Matrix> {
    let n = p.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.data[j * n..j * n + j];
        let d = p[(j, j)] + jitter - dot(lj, lj);
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let s = dot(&l.data[i * n..i * n + j], &l.data[j * n..j * n + j]);
            l[(i, j)] = (p[(i, j)] - s) / djj;
        }
    }
    Some(l)
}

/// Solves `(P + jitter·I)x = q` for symmetric positive definite `P`.
pub fn solve_spd(p: &Matrix, q: &[f64], jitter: f64) -> Result<Vector> {
    if q.len() != p.rows {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for a {}x{} system",
            q.len(),
            p.rows,
            p.cols
        )));
    }
    Ok(Cholesky::factor(p, jitter)?.solve(q))
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, to about `rel_tol` relative accuracy.
pub fn largest_eigenvalue(q: &Matrix, rel_tol: f64) -> f64 {
    assert!(q.is_square());
    let n = q.rows;
    // Deterministic start with no special alignment to coordinate axes.
    let mut v: Vector = (0..n).map(|i| 1.0 + 0.1 * ((i as f64) * 0.7).sin()).collect();
    let nv = v.norm2();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = q.matvec(&v);
        let nw = w.norm2();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w.iter().map(|x| x / nw).collect();
        if (next - lambda).abs() <= 0.01 * rel_tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Parses the fixture text format: a `rows cols` header followed by one
/// whitespace-separated row per line.
pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing header".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::Parse(format!("bad header token {t:?}")))
        })
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("header {header:?} is not `rows cols`")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines {
        let before = data.len();
        for t in line.split_whitespace() {
            data.push(
                t.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number {t:?}")))?,
            );
        }
        if data.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {seen} has {} entries, expected {cols}",
                data.len() - before
            )));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse(format!("found {seen} rows, expected {rows}")));
    }
    Matrix::new(rows, cols, data)
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut s = format!("{} {}\n", m.rows, m.cols);
    for i in 0..m.rows {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                s.push(' ');
            }
            write!(s, "{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn read_matrix(reader: impl BufRead) -> Result<Matrix> {
    let mut text = String::new();
    for line in reader.lines() {
        text.push_str(&line?);
        text.push('\n');
    }
    parse_matrix(&text)
}

pub fn write_matrix(mut writer: impl Write, m: &Matrix) -> Result<()> {
    writer.write_all(format_matrix(m).as_bytes())?;
    Ok(())
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_matrix(&std::fs::read_to_string(path)?)
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    std::fs::write(path, format_matrix(m))?;
    Ok(())
}
