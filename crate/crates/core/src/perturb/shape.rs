//! Flat torus grids and the directional envelope of their harmonic embedding.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::complex::{Complex2, ComplexKind};
use crate::error::{Error, Result};

/// Periodic `side × side` triangulated grid: horizontal, vertical and
/// diagonal edges, two triangles per square. Vertex `(i, j)` is `i * side + j`.
pub fn flat_torus_grid(side: usize) -> Result<Complex2> {
    if side < 3 {
        return Err(Error::Parameter(format!("flat torus grid needs side >= 3, got {side}")));
    }
    let id = |i: usize, j: usize| (i % side) * side + (j % side);
    let mut edges = BTreeSet::new();
    let mut cells = Vec::with_capacity(2 * side * side);
    for i in 0..side {
        for j in 0..side {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            for (x, y) in [(a, b), (a, c), (a, d)] {
                edges.insert([x.min(y), x.max(y)]);
            }
            for mut t in [[a, b, d], [a, c, d]] {
                t.sort_unstable();
                cells.push(t.to_vec());
            }
        }
    }
    cells.sort();
    Complex2::new(ComplexKind::Simplicial, side * side, edges.into_iter().collect(), cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidFit {
    /// Symmetric matrix `Q` of the fitted surface `xᵀ Q x = 1`.
    pub q: Vec<Vec<f64>>,
    /// Semi-axis lengths, ascending.
    pub semi_axes: Vec<f64>,
    /// RMS radial misfit of the envelope points over their mean radius.
    pub residual: f64,
    pub envelope_points: usize,
}

/// Direction bins: evenly spaced angles in the plane, otherwise the
/// normalized nonzero vectors of `{-1, 0, 1}^m`.
fn directions(m: usize) -> Vec<DVector<f64>> {
    if m == 2 {
        return (0..36)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 36.0;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect();
    }
    let total = 3usize.pow(m as u32);
    (1..total)
        .map(|mut code| {
            let v = DVector::from_fn(m, |_, _| {
                let d = code % 3;
                code /= 3;
                d as f64 - 1.0
            });
            v.normalize()
        })
        .filter(|v| v.iter().all(|x| x.is_finite()))
        .collect()
}

/// Bins the rows of `embedding` by direction, keeps the farthest point in
/// each bin and fits `xᵀ Q x = 1` to those points by least squares.
pub fn ellipsoid_envelope_check(embedding: &DMatrix<f64>) -> Result<EllipsoidFit> {
    let m = embedding.ncols();
    if m < 2 {
        return Err(Error::NotApplicable(format!("an ellipsoid envelope needs at least 2 dimensions, got {m}")));
    }
    if m > 8 {
        return Err(Error::Parameter(format!("envelope binning supports up to 8 dimensions, got {m}")));
    }
    let dirs = directions(m);
    let scale = embedding.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut best: Vec<Option<(f64, usize)>> = vec![None; dirs.len()];
    for r in 0..embedding.nrows() {
        let x = embedding.row(r).transpose();
        let norm = x.norm();
        if norm <= 1e-12 * scale {
            continue;
        }
        let bin = (0..dirs.len())
            .max_by(|&a, &b| dirs[a].dot(&x).total_cmp(&dirs[b].dot(&x)))
            .expect("at least one direction");
        if best[bin].is_none_or(|(n, _)| norm > n * (1.0 + 1e-12)) {
            best[bin] = Some((norm, r));
        }
    }
    let pts: Vec<DVector<f64>> = best.iter().flatten().map(|&(_, r)| embedding.row(r).transpose()).collect();
    let n_params = m * (m + 1) / 2;
    if pts.len() < n_params {
        return Err(Error::Input(format!(
            "only {} envelope points for {n_params} ellipsoid parameters",
            pts.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let design = DMatrix::from_fn(pts.len(), n_params, |r, c| {
        let (i, j) = pairs[c];
        let f = if i == j { 1.0 } else { 2.0 };
        f * pts[r][i] * pts[r][j]
    });
    let ones = DVector::from_element(pts.len(), 1.0);
    let coef = design
        .svd(true, true)
        .solve(&ones, 1e-12)
        .map_err(|e| Error::Input(format!("ellipsoid least squares: {e}")))?;
    let mut q = DMatrix::zeros(m, m);
    for (c, &(i, j)) in pairs.iter().enumerate() {
        q[(i, j)] = coef[c];
        q[(j, i)] = coef[c];
    }
    let eig = q.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Input("envelope fit is not an ellipsoid (Q is not positive definite)".into()));
    }
    let mut semi_axes: Vec<f64> = eig.eigenvalues.iter().map(|l| 1.0 / l.sqrt()).collect();
    semi_axes.sort_by(f64::total_cmp);

    let radii: Vec<f64> = pts.iter().map(|p| p.norm()).collect();
    let mean_r = radii.iter().sum::<f64>() / radii.len() as f64;
    let sq: f64 = pts
        .iter()
        .zip(&radii)
        .map(|(p, &r)| {
            let u = p / r;
            let fit = 1.0 / (u.dot(&(&q * &u))).sqrt();
            (r - fit).powi(2)
        })
        .sum();
    let residual = (sq / pts.len() as f64).sqrt() / mean_r;
    Ok(EllipsoidFit {
        q: (0..m).map(|i| q.row(i).iter().copied().collect()).collect(),
        semi_axes,
        residual,
        envelope_points: pts.len(),
    })
}
