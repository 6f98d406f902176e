//! Connected-sum perturbation diagnostics.
//!
//! A point cloud labelled by prime manifold is turned into two complexes:
//! the glued one built over all points, and the disjoint one built per
//! label and merged. Comparing their weights, Laplacians and harmonic
//! bases gives the quantities that enter the subspace perturbation bound.

mod shape;
mod synth;

pub use shape::{ellipsoid_envelope_check, flat_torus_grid, EllipsoidFit};
pub use synth::{genus2_f, punctplane, synth_manifold, Manifold, PunctPlaneShape, SynthData, TORUS_NOISE_DIMS};

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::boundary::boundary_maps;
use crate::complex::{cknn_graph_with_radius, clique_complex, knn_radius, triangle_weights_with_radius, Complex2, ComplexKind, PointCloud};
use crate::error::{Error, Result};
use crate::hodge::{spectral_cap, HodgeSystem, WeightOptions};
use crate::nullspace::{harmonic_basis, symmetric_norm, NullspaceOptions};
use crate::sparse::SparseMatrix;

/// A CkNN clique complex with its triangle weights.
#[derive(Debug, Clone)]
pub struct WeightedComplex {
    pub complex: Complex2,
    pub w2: Vec<f64>,
    pub rho: Vec<f64>,
}

/// CkNN graph, clique complex and triangle weights in one go.
pub fn point_cloud_complex(cloud: &PointCloud, k: usize, delta: f64) -> Result<WeightedComplex> {
    let rho = knn_radius(cloud, k)?;
    let graph = cknn_graph_with_radius(cloud, &rho, delta)?;
    let complex = clique_complex(&graph)?;
    let w2 = triangle_weights_with_radius(cloud, &complex, &rho, delta)?;
    Ok(WeightedComplex { complex, w2, rho })
}

/// Where the per-label complexes take their k-NN radii from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Recompute radii within each label.
    PerPart,
    /// Reuse the radii of the glued cloud, so cells inside a label match
    /// the glued ones exactly and nothing is destroyed.
    #[default]
    Glued,
}

/// Builds one complex per label and merges them into a single complex on
/// the original vertex indices. Also returns the per-label pieces on local
/// indices.
pub fn disjoint_complex(
    cloud: &PointCloud,
    labels: &[usize],
    k: usize,
    delta: f64,
    bandwidth: Bandwidth,
) -> Result<(WeightedComplex, Vec<(Vec<usize>, WeightedComplex)>)> {
    if labels.len() != cloud.len() {
        return Err(Error::Dimension(format!("{} labels for {} points", labels.len(), cloud.len())));
    }
    let glued_rho = match bandwidth {
        Bandwidth::Glued => Some(knn_radius(cloud, k)?),
        Bandwidth::PerPart => None,
    };
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut parts = Vec::new();
    let mut edges = Vec::new();
    let mut cells: Vec<(Vec<usize>, f64)> = Vec::new();
    let mut rho = vec![0.0; cloud.len()];
    for label in 0..n_labels {
        let members: Vec<usize> = (0..cloud.len()).filter(|&i| labels[i] == label).collect();
        if members.is_empty() {
            continue;
        }
        let sub = cloud.subset(&members);
        let part = match &glued_rho {
            None => point_cloud_complex(&sub, k, delta)?,
            Some(all) => {
                let r: Vec<f64> = members.iter().map(|&m| all[m]).collect();
                let graph = cknn_graph_with_radius(&sub, &r, delta)?;
                let complex = clique_complex(&graph)?;
                let w2 = triangle_weights_with_radius(&sub, &complex, &r, delta)?;
                WeightedComplex { complex, w2, rho: r }
            }
        };
        for &[a, b] in part.complex.edges() {
            edges.push([members[a], members[b]]);
        }
        for (c, &w) in part.complex.cells().iter().zip(&part.w2) {
            cells.push((c.iter().map(|&v| members[v]).collect(), w));
        }
        for (i, &m) in members.iter().enumerate() {
            rho[m] = part.rho[i];
        }
        parts.push((members, part));
    }
    // members are ascending, so mapped triangles stay ascending
    edges.sort_unstable();
    cells.sort_by(|a, b| a.0.cmp(&b.0));
    let (cells, w2): (Vec<Vec<usize>>, Vec<f64>) = cells.into_iter().unzip();
    let complex = Complex2::new(ComplexKind::Simplicial, cloud.len(), edges, cells)?;
    Ok((WeightedComplex { complex, w2, rho }, parts))
}

fn edge_lookup(cx: &Complex2) -> HashMap<[usize; 2], usize> {
    cx.edges().iter().enumerate().map(|(i, &e)| (e, i)).collect()
}

/// Index correspondence between the glued and disjoint complexes at one level.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LevelPartition {
    pub glued_to_disjoint: Vec<Option<usize>>,
    pub disjoint_to_glued: Vec<Option<usize>>,
}

impl LevelPartition {
    fn from_keys(glued: Vec<Vec<usize>>, disjoint: Vec<Vec<usize>>) -> Self {
        let index: HashMap<&Vec<usize>, usize> = disjoint.iter().enumerate().map(|(i, k)| (k, i)).collect();
        let glued_to_disjoint: Vec<Option<usize>> = glued.iter().map(|k| index.get(k).copied()).collect();
        let mut disjoint_to_glued = vec![None; disjoint.len()];
        for (g, d) in glued_to_disjoint.iter().enumerate() {
            if let Some(d) = d {
                disjoint_to_glued[*d] = Some(g);
            }
        }
        Self { glued_to_disjoint, disjoint_to_glued }
    }

    /// Cells present in both complexes as `(glued index, disjoint index)`.
    pub fn shared(&self) -> Vec<(usize, usize)> {
        self.glued_to_disjoint.iter().enumerate().filter_map(|(g, d)| d.map(|d| (g, d))).collect()
    }

    /// Glued-only cells.
    pub fn created(&self) -> Vec<usize> {
        (0..self.glued_to_disjoint.len()).filter(|&g| self.glued_to_disjoint[g].is_none()).collect()
    }

    /// Disjoint-only cells.
    pub fn destroyed(&self) -> Vec<usize> {
        (0..self.disjoint_to_glued.len()).filter(|&d| self.disjoint_to_glued[d].is_none()).collect()
    }
}

/// Non-intersecting, created and destroyed cells for vertices, edges and 2-cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplexPartition {
    pub levels: [LevelPartition; 3],
}

fn cell_keys(cx: &Complex2, level: usize) -> Vec<Vec<usize>> {
    match level {
        0 => (0..cx.n0()).map(|v| vec![v]).collect(),
        1 => cx.edges().iter().map(|e| e.to_vec()).collect(),
        _ => cx
            .cells()
            .iter()
            .map(|c| {
                let mut k = c.clone();
                k.sort_unstable();
                k
            })
            .collect(),
    }
}

impl SimplexPartition {
    /// Matches cells by vertex set. Both complexes must share the vertex set.
    pub fn new(glued: &Complex2, disjoint: &Complex2) -> Result<Self> {
        if glued.n0() != disjoint.n0() {
            return Err(Error::Partition(format!("{} vs {} vertices", glued.n0(), disjoint.n0())));
        }
        let levels = [0, 1, 2].map(|l| LevelPartition::from_keys(cell_keys(glued, l), cell_keys(disjoint, l)));
        Ok(Self { levels })
    }
}

/// The perturbation sizes at levels `k` and `k-1` (here 1 and 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Epsilons {
    pub eps_k: f64,
    pub eps_km1: f64,
    pub epsp_k: f64,
    pub epsp_km1: f64,
    /// Shared cells skipped because they have no coface in either complex.
    pub skipped: [usize; 2],
}

/// `max(w/w̃ - 1, ŵ/w̃ - 1)` and `max(|w/ŵ - 1|, |ŵ/w - 1|)` over shared cells,
/// with reference weights `w̃_1 = |B_2[N_1, N_2]| w_2` and
/// `w̃_0 = |B_1[N_0, N_1]| w̃_1` taken from the glued complex.
pub fn compute_epsilons(glued: &HodgeSystem, disjoint: &HodgeSystem, glued_cx: &Complex2, part: &SimplexPartition) -> Result<Epsilons> {
    let (b1, b2) = boundary_maps(glued_cx, 1)?;
    let [p0, p1, p2] = &part.levels;
    if p1.glued_to_disjoint.len() != glued.dim() || p1.disjoint_to_glued.len() != disjoint.dim() {
        return Err(Error::Partition("edge partition does not match the Hodge systems".into()));
    }
    let w2 = glued.w_k1().values();
    let mut ref1 = vec![0.0; glued_cx.n1()];
    let mut has_coface1 = vec![false; glued_cx.n1()];
    for &(e, t, _) in b2.entries() {
        has_coface1[e] = true;
        if p1.glued_to_disjoint[e].is_some() && p2.glued_to_disjoint[t].is_some() {
            ref1[e] += w2[t];
        }
    }
    let mut ref0 = vec![0.0; glued_cx.n0()];
    for &(v, e, _) in b1.entries() {
        if p1.glued_to_disjoint[e].is_some() && p0.glued_to_disjoint[v].is_some() {
            ref0[v] += ref1[e];
        }
    }
    // coface-free shared cells carry floored weights on both sides
    let mut has_coface0 = vec![false; glued_cx.n0()];
    for &(v, _, _) in b1.entries() {
        has_coface0[v] = true;
    }

    let level = |w: &[f64], w_hat: &[f64], reference: &[f64], lp: &LevelPartition, has_coface: &[bool], name: usize| -> Result<(f64, f64, usize)> {
        let (mut eps, mut epsp, mut skipped) = (0.0f64, 0.0f64, 0);
        for (g, d) in lp.shared() {
            let (a, b) = (w[g], w_hat[d]);
            epsp = epsp.max((a / b - 1.0).abs()).max((b / a - 1.0).abs());
            let r = reference[g];
            if r <= 0.0 {
                if !has_coface[g] {
                    skipped += 1;
                    continue;
                }
                return Err(Error::Partition(format!(
                    "level-{name} cell {g} has cofaces but none among the shared cells"
                )));
            }
            eps = eps.max(a / r - 1.0).max(b / r - 1.0);
        }
        Ok((eps, epsp, skipped))
    };
    let (eps_k, epsp_k, s1) = level(glued.w_k().values(), disjoint.w_k().values(), &ref1, p1, &has_coface1, 1)?;
    let (eps_km1, epsp_km1, s0) = level(glued.w_km1().values(), disjoint.w_km1().values(), &ref0, p0, &has_coface0, 0)?;
    Ok(Epsilons { eps_k, eps_km1, epsp_k, epsp_km1, skipped: [s0, s1] })
}

/// The block difference of two Laplacians on the union of cells: glued
/// entries are added unless both indices are created cells, disjoint
/// entries are subtracted unless both are destroyed cells. Rows are ordered
/// shared, created, destroyed.
pub fn modified_difference(l: &SparseMatrix, l_hat: &SparseMatrix, lp: &LevelPartition) -> Result<SparseMatrix> {
    if l.nrows() != lp.glued_to_disjoint.len() || l_hat.nrows() != lp.disjoint_to_glued.len() {
        return Err(Error::Partition("Laplacian sizes do not match the partition".into()));
    }
    let shared = lp.shared();
    let created = lp.created();
    let destroyed = lp.destroyed();
    let mut pos_g = vec![usize::MAX; l.nrows()];
    let mut pos_d = vec![usize::MAX; l_hat.nrows()];
    for (i, &(g, d)) in shared.iter().enumerate() {
        pos_g[g] = i;
        pos_d[d] = i;
    }
    for (i, &g) in created.iter().enumerate() {
        pos_g[g] = shared.len() + i;
    }
    for (i, &d) in destroyed.iter().enumerate() {
        pos_d[d] = shared.len() + created.len() + i;
    }
    let n = shared.len() + created.len() + destroyed.len();
    let is_c = |g: usize| lp.glued_to_disjoint[g].is_none();
    let is_d = |d: usize| lp.disjoint_to_glued[d].is_none();
    let trip = l
        .triplets()
        .filter(|&(r, c, _)| !(is_c(r) && is_c(c)))
        .map(|(r, c, v)| (pos_g[r], pos_g[c], v))
        .chain(l_hat.triplets().filter(|&(r, c, _)| !(is_d(r) && is_d(c))).map(|(r, c, v)| (pos_d[r], pos_d[c], -v)))
        .collect::<Vec<_>>();
    Ok(SparseMatrix::from_triplets(n, n, trip))
}

/// Spectral norm of a symmetric matrix, restricted first to its nonzero
/// rows and columns (the difference is supported near the gluing).
fn support_norm(m: &SparseMatrix) -> Result<f64> {
    let support: Vec<usize> = (0..m.nrows()).filter(|&r| m.row(r).any(|(_, v)| v != 0.0)).collect();
    if support.is_empty() {
        return Ok(0.0);
    }
    symmetric_norm(&m.select(&support, &support), 0)
}

/// `(‖DiffL_down‖, ‖DiffL_up‖)`.
pub fn diff_laplacians(glued: &HodgeSystem, disjoint: &HodgeSystem, part: &SimplexPartition) -> Result<(f64, f64)> {
    let lp = &part.levels[glued.k()];
    let down = modified_difference(glued.l_down(), disjoint.l_down(), lp)?;
    let up = modified_difference(glued.l_up(), disjoint.l_up(), lp)?;
    Ok((support_norm(&down)?, support_norm(&up)?))
}

/// `min_O ‖Y - Ŷ O‖_F²` over orthogonal `O`, with the minimizer.
pub fn subspace_error(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if y.shape() != y_hat.shape() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", y.shape(), y_hat.shape())));
    }
    let b = y.ncols();
    if b == 0 {
        return Ok((0.0, DMatrix::zeros(0, 0)));
    }
    let m = y_hat.transpose() * y;
    let svd = m.svd(true, true);
    let o = svd.u.expect("u requested") * svd.v_t.expect("v requested");
    let lhs = (y - y_hat * &o).norm_squared();
    Ok((lhs, o))
}

/// `8 β (‖down‖² + ‖up‖²) / min δ`.
pub fn theorem_bound(diff_down_norm: f64, diff_up_norm: f64, beta: usize, eigengaps: &[f64]) -> Result<f64> {
    let min_gap = eigengaps.iter().copied().fold(f64::INFINITY, f64::min);
    if eigengaps.is_empty() || !(min_gap > 0.0) {
        return Err(Error::ZeroEigengap);
    }
    Ok(8.0 * beta as f64 * (diff_down_norm.powi(2) + diff_up_norm.powi(2)) / min_gap)
}

/// Hypothesis caps on `‖DiffL_down‖²` and `‖DiffL_up‖²`.
pub fn hypothesis_caps(eps: &Epsilons, kind: ComplexKind, k: usize) -> (f64, f64) {
    let s = f64::sqrt;
    let lam_k = spectral_cap(kind, k);
    let lam_km1 = spectral_cap(kind, k.saturating_sub(1));
    let down = 2.0 * s(eps.epsp_k) + eps.epsp_k + (1.0 + s(eps.epsp_k)).powi(2) * s(eps.epsp_km1) + 4.0 * s(eps.eps_km1);
    let up = 2.0 * s(eps.epsp_k) + eps.epsp_k + 2.0 * eps.eps_k + 4.0 * s(eps.eps_k);
    (down.powi(2) * lam_km1.powi(2), up.powi(2) * lam_k.powi(2))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbReport {
    pub manifold: Option<Manifold>,
    pub n: usize,
    pub k_nn: usize,
    pub delta: f64,
    pub seed: u64,
    pub eps_k: f64,
    pub eps_km1: f64,
    pub epsp_k: f64,
    pub epsp_km1: f64,
    pub eigengaps: Vec<f64>,
    pub lambda_k: f64,
    pub diff_down_norm: f64,
    pub diff_up_norm: f64,
    pub cap_down: f64,
    pub cap_up: f64,
    pub caps_met: bool,
    pub beta_glued: usize,
    pub beta_parts: Vec<usize>,
    pub lhs: f64,
    pub rhs: f64,
    pub bound_holds: bool,
    pub n_cells: [usize; 3],
    pub created: [usize; 3],
    pub destroyed: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbOptions {
    pub k_nn: usize,
    pub delta: f64,
    pub bandwidth: Bandwidth,
    pub weights: WeightOptions,
    pub nullspace: NullspaceOptions,
}

fn hodge_for(wc: &WeightedComplex, opts: &WeightOptions) -> Result<HodgeSystem> {
    crate::pipeline::edge_laplacian(&wc.complex, Some(&wc.w2), opts)
}

/// Full glued-versus-disjoint comparison for a labelled point cloud.
pub fn perturb_check_cloud(cloud: &PointCloud, labels: &[usize], opts: &PerturbOptions) -> Result<PerturbReport> {
    let glued_wc = point_cloud_complex(cloud, opts.k_nn, opts.delta)?;
    let (disjoint_wc, parts) = disjoint_complex(cloud, labels, opts.k_nn, opts.delta, opts.bandwidth)?;
    let part = SimplexPartition::new(&glued_wc.complex, &disjoint_wc.complex)?;
    let glued = hodge_for(&glued_wc, &opts.weights)?;
    let disjoint = hodge_for(&disjoint_wc, &opts.weights)?;

    let mut ns = opts.nullspace;
    ns.eigen.upper_bound = Some(glued.spectral_norm_upper());
    let mut beta_parts = Vec::new();
    let mut eigengaps = Vec::new();
    // the disjoint Laplacian is block diagonal, so its null space is the
    // direct sum of the parts' null spaces
    let mut y_hat_cols: Vec<DVector<f64>> = Vec::new();
    let edge_of = edge_lookup(&disjoint_wc.complex);
    for (members, piece) in &parts {
        let sys = hodge_for(piece, &opts.weights)?;
        let hb = harmonic_basis(sys.laplacian(), &ns)?;
        beta_parts.push(hb.beta());
        let gap = hb.spectrum.get(hb.beta()).copied().ok_or(Error::ZeroEigengap)?;
        eigengaps.push(gap);
        let rows: Vec<usize> = piece.complex.edges().iter().map(|&[a, b]| edge_of[&[members[a], members[b]]]).collect();
        for c in 0..hb.beta() {
            let mut col = DVector::zeros(disjoint_wc.complex.n1());
            for (r, &g) in rows.iter().enumerate() {
                col[g] = hb.matrix[(r, c)];
            }
            y_hat_cols.push(col);
        }
    }
    let y = harmonic_basis(glued.laplacian(), &ns)?;
    let y_hat = if y_hat_cols.is_empty() {
        DMatrix::zeros(disjoint_wc.complex.n1(), 0)
    } else {
        DMatrix::from_columns(&y_hat_cols)
    };
    if y.beta() != y_hat.ncols() {
        return Err(Error::Partition(format!(
            "gluing changed the Betti number: {} glued vs {} disjoint",
            y.beta(),
            y_hat.ncols()
        )));
    }
    let shared = part.levels[1].shared();
    let rows_g: Vec<usize> = shared.iter().map(|s| s.0).collect();
    let rows_d: Vec<usize> = shared.iter().map(|s| s.1).collect();
    let y_n = y.matrix.select_rows(&rows_g);
    let y_hat_n = y_hat.select_rows(&rows_d);
    let (lhs, _) = subspace_error(&y_n, &y_hat_n)?;

    let eps = compute_epsilons(&glued, &disjoint, &glued_wc.complex, &part)?;
    let (down, up) = diff_laplacians(&glued, &disjoint, &part)?;
    let rhs = theorem_bound(down, up, y.beta(), &eigengaps)?;
    let (cap_down, cap_up) = hypothesis_caps(&eps, ComplexKind::Simplicial, 1);
    let caps_met = down * down <= cap_down && up * up <= cap_up;
    let count = |f: fn(&LevelPartition) -> usize| [0, 1, 2].map(|l| f(&part.levels[l]));
    Ok(PerturbReport {
        manifold: None,
        n: cloud.len(),
        k_nn: opts.k_nn,
        delta: opts.delta,
        seed: 0,
        eps_k: eps.eps_k,
        eps_km1: eps.eps_km1,
        epsp_k: eps.epsp_k,
        epsp_km1: eps.epsp_km1,
        eigengaps,
        lambda_k: glued.spectral_norm_upper(),
        diff_down_norm: down,
        diff_up_norm: up,
        cap_down,
        cap_up,
        caps_met,
        beta_glued: y.beta(),
        beta_parts,
        lhs,
        rhs,
        bound_holds: lhs <= rhs,
        n_cells: count(|l| l.glued_to_disjoint.len()),
        created: count(|l| l.created().len()),
        destroyed: count(|l| l.destroyed().len()),
    })
}

/// Samples a labelled synthetic manifold and runs [`perturb_check_cloud`].
pub fn perturb_check(manifold: Manifold, n: usize, noise: f64, seed: u64, opts: &PerturbOptions) -> Result<PerturbReport> {
    let data = synth_manifold(manifold, n, noise, seed)?;
    let labels = data
        .labels
        .ok_or_else(|| Error::Parameter(format!("{} is not a connected sum", manifold.as_str())))?;
    let mut report = perturb_check_cloud(&data.cloud, &labels, opts)?;
    report.manifold = Some(manifold);
    report.seed = seed;
    Ok(report)
}

impl Default for PerturbOptions {
    fn default() -> Self {
        Self { k_nn: 30, delta: 1.2, bandwidth: Bandwidth::default(), weights: WeightOptions::default(), nullspace: NullspaceOptions::default() }
    }
}
