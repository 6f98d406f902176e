//! Smallest eigenpairs of sparse PSD operators and the harmonic basis.
//!
//! Small problems go straight to a dense symmetric eigendecomposition. Larger
//! ones use Chebyshev-filtered subspace iteration: a block of `m + 5`
//! vectors is repeatedly passed through a Chebyshev polynomial that damps the
//! interval `[θ_max, b]` (largest Ritz value to a spectral upper bound) and
//! then Rayleigh–Ritz projected. Only products with `L` are needed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Problems up to this size are solved densely.
pub const DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Residual tolerance relative to the operator norm.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Known upper bound on the spectrum, if any.
    pub upper_bound: Option<f64>,
    pub degree: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 5000, seed: 0, upper_bound: None, degree: 24 }
    }
}

fn sorted_dense_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn residual_norms(l: &SparseMatrix, values: &[f64], vectors: &DMatrix<f64>) -> Vec<f64> {
    let lv = l.mul_dense(vectors);
    (0..values.len()).map(|j| (lv.column(j) - vectors.column(j) * values[j]).norm()).collect()
}

/// Orthonormal basis of the columns via thin QR.
fn orthonormalize(x: DMatrix<f64>) -> DMatrix<f64> {
    x.qr().q()
}

fn random_block(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
}

/// Applies the scaled Chebyshev filter of the given degree, damping `[a, b]`.
fn chebyshev_filter(l: &SparseMatrix, x: &DMatrix<f64>, degree: usize, a: f64, b: f64, a0: f64) -> DMatrix<f64> {
    let e = (b - a) / 2.0;
    let c = (b + a) / 2.0;
    let mut sigma = e / (a0 - c);
    let tau = 2.0 / sigma;
    let mut x_prev = x.clone();
    let mut y = (l.mul_dense(x) - x * c) * (sigma / e);
    for _ in 1..degree {
        let sigma_new = 1.0 / (tau - sigma);
        let y_new = (l.mul_dense(&y) - &y * c) * (2.0 * sigma_new / e) - &x_prev * (sigma * sigma_new);
        x_prev = y;
        y = y_new;
        sigma = sigma_new;
    }
    y
}

fn rayleigh_ritz(l: &SparseMatrix, x: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let lx = l.mul_dense(x);
    let h = x.transpose() * &lx;
    let h = (&h + h.transpose()) * 0.5;
    let (theta, v) = sorted_dense_eigen(h);
    (theta, x * v)
}

/// The `m` smallest eigenpairs of a symmetric PSD sparse matrix.
pub fn smallest_eigenpairs(l: &SparseMatrix, m: usize, opts: &EigenOptions) -> Result<Eigenpairs> {
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::Dimension(format!("operator is {}x{}", n, l.ncols())));
    }
    if m > n {
        return Err(Error::Size { requested: m, available: n });
    }
    if m == 0 {
        return Ok(Eigenpairs { values: vec![], vectors: DMatrix::zeros(n, 0), residuals: vec![], iterations: 0 });
    }
    let p = (m + 5).min(n);
    if n <= DENSE_LIMIT || p * 3 > n {
        let (values, vectors) = sorted_dense_eigen(l.to_dense());
        let values: Vec<f64> = values[..m].to_vec();
        let vectors = vectors.columns(0, m).into_owned();
        let residuals = residual_norms(l, &values, &vectors);
        return Ok(Eigenpairs { values, vectors, residuals, iterations: 0 });
    }

    // the filter must not amplify anything above b, so only rigorous bounds qualify
    let b = opts.upper_bound.unwrap_or_else(|| l.gershgorin_bound()).max(f64::MIN_POSITIVE);
    let norm = b.max(f64::MIN_POSITIVE);
    let target = opts.tol * norm;

    // Stagnation usually means θ_max sits inside an eigenvalue cluster that
    // straddles the wanted ones; widening the block moves it past the cluster.
    let p_cap = (2 * m + 40).min(n / 3).max(p);
    let mut p = p;
    let mut x = orthonormalize(random_block(n, p, opts.seed));
    let mut worst = f64::INFINITY;
    let mut last_res = vec![f64::INFINITY; m];
    let mut checkpoint = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let (theta, xr) = rayleigh_ritz(l, &x);
        let res = residual_norms(l, &theta[..m], &xr.columns(0, m).into_owned());
        worst = res.iter().copied().fold(0.0, f64::max);
        last_res = res.clone();
        if worst <= target {
            return Ok(Eigenpairs {
                values: theta[..m].to_vec(),
                vectors: xr.columns(0, m).into_owned(),
                residuals: res,
                iterations: it,
            });
        }
        let a = theta[p - 1];
        let a0 = theta[0].min(0.0);
        if a >= b * 0.999 {
            // block spans nearly the whole spectrum; nothing left to damp
            return Err(Error::Convergence { iterations: it, worst_residual: worst, residuals: res });
        }
        let mut next = chebyshev_filter(l, &xr, opts.degree, a, b, a0 - 1e-3 * (a - a0));
        if it % 15 == 0 {
            if worst > 0.1 * checkpoint && p < p_cap {
                let extra = (p + 5).min(p_cap) - p;
                let fresh = random_block(n, extra, opts.seed.wrapping_add(it as u64));
                next = DMatrix::from_fn(n, p + extra, |r, c| if c < p { next[(r, c)] } else { fresh[(r, c - p)] });
                p += extra;
                log::debug!("eigensolver widened block to {p} at iteration {it}");
            }
            checkpoint = worst;
        }
        x = orthonormalize(next);
    }
    Err(Error::Convergence { iterations: opts.max_iter, worst_residual: worst, residuals: last_res })
}

/// Lanczos with full reorthogonalization. Returns the extreme Ritz values
/// `(min, max)` after at most `steps` iterations.
pub fn extreme_eigenvalues(l: &SparseMatrix, steps: usize, seed: u64) -> Result<(f64, f64)> {
    let n = l.nrows();
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    if n <= DENSE_LIMIT {
        let ev = l.to_dense().symmetric_eigenvalues();
        return Ok((ev.min(), ev.max()));
    }
    let steps = steps.min(n);
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let start = random_block(n, 1, seed ^ 0x9e37_79b9_7f4a_7c15).column(0).into_owned();
    q.push(&start / start.norm());
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    for j in 0..steps {
        let mut w = DVector::from_vec(l.mul_vec(q[j].as_slice()));
        let a = q[j].dot(&w);
        alpha.push(a);
        for _ in 0..2 {
            for qi in &q {
                let c = qi.dot(&w);
                w.axpy(-c, qi, 1.0);
            }
        }
        let bnorm = w.norm();
        if j + 1 == steps || bnorm <= 1e-13 * a.abs().max(1.0) {
            break;
        }
        beta.push(bnorm);
        q.push(w / bnorm);
    }
    let k = alpha.len();
    let t = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let ev = t.symmetric_eigenvalues();
    Ok((ev.min(), ev.max()))
}

/// Spectral norm of a symmetric (possibly indefinite) sparse matrix.
pub fn symmetric_norm(l: &SparseMatrix, seed: u64) -> Result<f64> {
    let (lo, hi) = extreme_eigenvalues(l, 300, seed)?;
    Ok(lo.abs().max(hi.abs()))
}

/// Counts eigenvalues in the zero cluster and checks the gap above it.
pub fn estimate_betti(values: &[f64], zero_tol: f64, gap_factor: f64) -> Result<usize> {
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    if clipped.windows(2).any(|w| w[1] < w[0] - 1e-12 * w[0].abs().max(1.0)) {
        return Err(Error::Input("eigenvalues must be ascending".into()));
    }
    let beta = clipped.iter().take_while(|&&v| v <= zero_tol).count();
    if beta == 0 {
        return Ok(0);
    }
    match clipped.get(beta) {
        Some(&next) if next / clipped[beta - 1].max(zero_tol) >= gap_factor => Ok(beta),
        Some(_) => {
            let mut candidates = vec![beta, beta + 1];
            candidates.retain(|&c| c <= clipped.len());
            Err(Error::AmbiguousBetti { candidates })
        }
        None => Err(Error::AmbiguousBetti { candidates: vec![beta] }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullspaceOptions {
    pub zero_tol: f64,
    pub gap_factor: f64,
    pub first_pass: usize,
    pub eigen: EigenOptions,
}

impl Default for NullspaceOptions {
    fn default() -> Self {
        Self { zero_tol: 1e-8, gap_factor: 100.0, first_pass: 10, eigen: EigenOptions::default() }
    }
}

/// Orthonormal basis of the null space together with the spectrum
/// computed along the way.
#[derive(Debug, Clone)]
pub struct HomologyBasis {
    pub matrix: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    /// All computed eigenvalues, including the ones above the zero cluster.
    pub spectrum: Vec<f64>,
}

impl HomologyBasis {
    pub fn beta(&self) -> usize {
        self.matrix.ncols()
    }

    /// `spectrum[β] / max(spectrum[β-1], zero_tol)`; infinite when `β = 0` or
    /// nothing beyond the cluster was computed.
    pub fn gap_ratio(&self, zero_tol: f64) -> f64 {
        let b = self.beta();
        match (b, self.spectrum.get(b)) {
            (0, _) | (_, None) => f64::INFINITY,
            (_, Some(&next)) => next / self.spectrum[b - 1].max(zero_tol),
        }
    }
}

/// Null space of `L` with β decided from the spectrum. A first pass computes
/// `first_pass` eigenvalues; if the zero cluster might extend past them the
/// solve is repeated with `β + 5`.
pub fn harmonic_basis(l: &SparseMatrix, opts: &NullspaceOptions) -> Result<HomologyBasis> {
    let n = l.nrows();
    let mut m = opts.first_pass.min(n);
    loop {
        let pairs = smallest_eigenpairs(l, m, &opts.eigen)?;
        let zero_count = pairs.values.iter().take_while(|&&v| v.max(0.0) <= opts.zero_tol).count();
        if zero_count + 1 > m && m < n {
            m = (zero_count + 5).max(2 * m).min(n);
            continue;
        }
        let beta = estimate_betti(&pairs.values, opts.zero_tol, opts.gap_factor).or_else(|e| match e {
            // the whole space is null: nothing lies above the cluster
            Error::AmbiguousBetti { .. } if zero_count == n => Ok(n),
            e => Err(e),
        })?;
        let mut matrix = pairs.vectors.columns(0, beta).into_owned();
        if beta > 0 {
            matrix = orthonormalize(matrix);
        }
        return Ok(HomologyBasis {
            matrix,
            eigenvalues: pairs.values[..beta].to_vec(),
            residuals: pairs.residuals[..beta].to_vec(),
            spectrum: pairs.values,
        });
    }
}
