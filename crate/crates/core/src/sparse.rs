//! Compressed sparse row matrices over `f64`.
//!
//! Only the handful of operations the Hodge pipeline needs: assembly from
//! triplets, products with vectors, dense blocks and other sparse matrices,
//! diagonal scaling and principal submatrices.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a matrix from coordinate triplets. Duplicate entries are summed.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds for {nrows}x{ncols}");
            rows[r].push((c, v));
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.indptr[r]..self.indptr[r + 1];
        match self.indices[span.clone()].binary_search(&c) {
            Ok(pos) => self.values[span.start + pos],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let body = |(r, out): (usize, &mut f64)| {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            *out = acc;
        };
        if self.nnz() > 50_000 {
            y.par_iter_mut().enumerate().for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    /// Product with a dense column-major block.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.ncols);
        let mut y = DMatrix::zeros(self.nrows, x.ncols());
        let n_in = self.ncols;
        let n_out = self.nrows;
        let xs = x.as_slice();
        let ys = y.as_mut_slice();
        for j in 0..x.ncols() {
            self.matvec(&xs[j * n_in..(j + 1) * n_in], &mut ys[j * n_out..(j + 1) * n_out]);
        }
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.ncols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                let dst = next[c];
                indices[dst] = r;
                values[dst] = self.values[k];
                next[c] += 1;
            }
        }
        Self { nrows: self.ncols, ncols: self.nrows, indptr, indices, values }
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let ncols = other.ncols;
        let rows: Vec<Vec<(usize, f64)>> = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || (vec![0.0f64; ncols], vec![false; ncols], Vec::<usize>::new()),
                |(acc, seen, touched), r| {
                    for (k, a) in self.row(r) {
                        for (c, b) in other.row(k) {
                            if !seen[c] {
                                seen[c] = true;
                                touched.push(c);
                            }
                            acc[c] += a * b;
                        }
                    }
                    touched.sort_unstable();
                    let out: Vec<(usize, f64)> = touched.iter().map(|&c| (c, acc[c])).collect();
                    for &c in touched.iter() {
                        acc[c] = 0.0;
                        seen[c] = false;
                    }
                    touched.clear();
                    out
                },
            )
            .collect();
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        SparseMatrix { nrows: self.nrows, ncols, indptr, indices, values }
    }

    /// `diag(left) * self * diag(right)`
    pub fn scale(&self, left: &[f64], right: &[f64]) -> SparseMatrix {
        assert_eq!(left.len(), self.nrows);
        assert_eq!(right.len(), self.ncols);
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in out.indptr[r]..out.indptr[r + 1] {
                out.values[k] *= left[r] * right[out.indices[k]];
            }
        }
        out
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = f(*v));
        out
    }

    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        self.axpby(1.0, other, 1.0)
    }

    /// `alpha * self + beta * other`
    pub fn axpby(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trip = self
            .triplets()
            .map(|(r, c, v)| (r, c, alpha * v))
            .chain(other.triplets().map(|(r, c, v)| (r, c, beta * v)));
        SparseMatrix::from_triplets(self.nrows, self.ncols, trip)
    }

    /// `(A + Aᵀ) / 2`
    pub fn symmetrized(&self) -> SparseMatrix {
        assert_eq!(self.nrows, self.ncols);
        self.axpby(0.5, &self.transpose(), 0.5)
    }

    /// Principal or rectangular submatrix selecting the given rows and columns, in order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let trip = rows.iter().enumerate().flat_map(|(new_r, &r)| {
            let col_map = &col_map;
            self.row(r).filter_map(move |(c, v)| {
                let nc = col_map[c];
                (nc != usize::MAX).then_some((new_r, nc, v))
            })
        });
        SparseMatrix::from_triplets(rows.len(), cols.len(), trip.collect::<Vec<_>>())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn gershgorin_bound(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest relative asymmetry `max |a_ij - a_ji| / max |a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.transpose();
        let diff = self.axpby(1.0, &t, -1.0);
        diff.values.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale
    }

    /// Writes the matrix in Matrix Market coordinate format. Integer-valued
    /// matrices may be written with the `integer` field.
    pub fn write_matrix_market<W: Write>(&self, mut out: W, integer: bool) -> Result<()> {
        let field = if integer { "integer" } else { "real" };
        writeln!(out, "%%MatrixMarket matrix coordinate {field} general")?;
        writeln!(out, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            if integer {
                writeln!(out, "{} {} {}", r + 1, c + 1, v.round() as i64)?;
            } else {
                writeln!(out, "{} {} {}", r + 1, c + 1, crate::io::fmt_f64(v))?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market<R: BufRead>(input: R) -> Result<SparseMatrix> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty Matrix Market file".into()))??;
        let lower = header.to_ascii_lowercase();
        if !lower.starts_with("%%matrixmarket matrix coordinate") {
            return Err(Error::Parse(format!("unsupported Matrix Market header: {header}")));
        }
        let symmetric = lower.contains("symmetric");
        let mut size: Option<(usize, usize, usize)> = None;
        let mut trip = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            match size {
                None => {
                    if parts.len() != 3 {
                        return Err(Error::Parse(format!("bad size line: {line}")));
                    }
                    let p = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(e.to_string()));
                    size = Some((p(parts[0])?, p(parts[1])?, p(parts[2])?));
                }
                Some((nr, nc, _)) => {
                    if parts.len() < 3 {
                        return Err(Error::Parse(format!("bad entry line: {line}")));
                    }
                    let r: usize = parts[0].parse().map_err(|_| Error::Parse(format!("bad row: {line}")))?;
                    let c: usize = parts[1].parse().map_err(|_| Error::Parse(format!("bad col: {line}")))?;
                    let v: f64 = parts[2].parse().map_err(|_| Error::Parse(format!("bad value: {line}")))?;
                    if r == 0 || c == 0 || r > nr || c > nc {
                        return Err(Error::Parse(format!("entry out of range: {line}")));
                    }
                    trip.push((r - 1, c - 1, v));
                    if symmetric && r != c {
                        trip.push((c - 1, r - 1, v));
                    }
                }
            }
        }
        let (nr, nc, _) = size.ok_or_else(|| Error::Parse("missing size line".into()))?;
        Ok(SparseMatrix::from_triplets(nr, nc, trip))
    }
}
