mod common;

use std::collections::HashMap;

use hodgeloop::perturb::{
    compute_epsilons, diff_laplacians, ellipsoid_envelope_check, hypothesis_caps, perturb_check_cloud, punctplane, subspace_error,
    theorem_bound, Epsilons, PerturbOptions, PunctPlaneShape, SimplexPartition,
};
use hodgeloop::pipeline::edge_laplacian;
use hodgeloop::{Complex2, ComplexKind, Error, WeightOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

use common::*;

type Edge = [usize; 2];

/// Everything the Laplacians depend on, computed densely from vertex sets.
struct Dense {
    edges: Vec<Edge>,
    w1: Vec<f64>,
    w0: Vec<f64>,
    l_down: DMatrix<f64>,
    l_up: DMatrix<f64>,
}

fn signed_b1(n0: usize, edges: &[Edge]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n0, edges.len());
    for (e, &[a, c]) in edges.iter().enumerate() {
        b[(a, e)] = 1.0;
        b[(c, e)] = -1.0;
    }
    b
}

fn signed_b2(edges: &[Edge], tris: &[[usize; 3]]) -> DMatrix<f64> {
    let idx: HashMap<Edge, usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut b = DMatrix::zeros(edges.len(), tris.len());
    for (t, &[x, y, z]) in tris.iter().enumerate() {
        b[(idx[&[y, z]], t)] = 1.0;
        b[(idx[&[x, z]], t)] = -1.0;
        b[(idx[&[x, y]], t)] = 1.0;
    }
    b
}

fn min_positive_floor(w: &mut [f64]) {
    let m = w.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
    let m = if m.is_finite() { m } else { 1.0 };
    w.iter_mut().filter(|v| **v <= 0.0).for_each(|v| *v = m);
}

fn dense(n0: usize, edges: &[Edge], tris: &[[usize; 3]], w2: &[f64]) -> Dense {
    let b1 = signed_b1(n0, edges);
    let b2 = signed_b2(edges, tris);
    let mut w1: Vec<f64> = if tris.is_empty() {
        vec![1.0; edges.len()]
    } else {
        (b2.abs() * DMatrix::from_column_slice(w2.len(), 1, w2)).iter().copied().collect()
    };
    min_positive_floor(&mut w1);
    let mut w0: Vec<f64> = (b1.abs() * DMatrix::from_column_slice(w1.len(), 1, &w1)).iter().copied().collect();
    min_positive_floor(&mut w0);
    let diag = |w: &[f64], p: f64| DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(w.len(), w.iter().map(|v| v.powf(p))));
    let a1 = diag(&w0, -0.5) * b1 * diag(&w1, 0.5);
    let a2 = diag(&w1, -0.5) * b2 * diag(w2, 0.5);
    Dense { edges: edges.to_vec(), w1, w0, l_down: a1.transpose() * &a1, l_up: &a2 * a2.transpose() }
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    dense_eigenvalues(m).iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Union ordering N | C | D and the block-masked difference.
fn dense_diff(g: &Dense, d: &Dense, lg: &DMatrix<f64>, ld: &DMatrix<f64>) -> DMatrix<f64> {
    let in_d: HashMap<Edge, usize> = d.edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let in_g: HashMap<Edge, usize> = g.edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut order: Vec<(Option<usize>, Option<usize>)> =
        g.edges.iter().enumerate().filter(|(_, e)| in_d.contains_key(*e)).map(|(i, e)| (Some(i), Some(in_d[e]))).collect();
    order.extend(g.edges.iter().enumerate().filter(|(_, e)| !in_d.contains_key(*e)).map(|(i, _)| (Some(i), None)));
    order.extend(d.edges.iter().enumerate().filter(|(_, e)| !in_g.contains_key(*e)).map(|(i, _)| (None, Some(i))));
    let n = order.len();
    DMatrix::from_fn(n, n, |r, c| {
        let (gr, dr) = order[r];
        let (gc, dc) = order[c];
        let mut v = 0.0;
        if let (Some(a), Some(b)) = (gr, gc) {
            if !(dr.is_none() && dc.is_none()) {
                v += lg[(a, b)];
            }
        }
        if let (Some(a), Some(b)) = (dr, dc) {
            if !(gr.is_none() && gc.is_none()) {
                v -= ld[(a, b)];
            }
        }
        v
    })
}

fn complex(n0: usize, edges: &[Edge], tris: &[[usize; 3]]) -> Complex2 {
    Complex2::new(ComplexKind::Simplicial, n0, edges.to_vec(), tris.iter().map(|t| t.to_vec()).collect()).unwrap()
}

fn check_against_oracle(n0: usize, g_edges: &[Edge], g_tris: &[[usize; 3]], g_w2: &[f64], d_edges: &[Edge], d_tris: &[[usize; 3]], d_w2: &[f64]) -> (f64, f64) {
    let (gc, dc) = (complex(n0, g_edges, g_tris), complex(n0, d_edges, d_tris));
    let opts = WeightOptions::default();
    let gs = edge_laplacian(&gc, Some(g_w2), &opts).unwrap();
    let ds = edge_laplacian(&dc, Some(d_w2), &opts).unwrap();
    let part = SimplexPartition::new(&gc, &dc).unwrap();
    let (down, up) = diff_laplacians(&gs, &ds, &part).unwrap();
    let (g, d) = (dense(n0, g_edges, g_tris, g_w2), dense(n0, d_edges, d_tris, d_w2));
    let want_down = spectral_norm(&dense_diff(&g, &d, &g.l_down, &d.l_down));
    let want_up = spectral_norm(&dense_diff(&g, &d, &g.l_up, &d.l_up));
    assert!((down - want_down).abs() <= 1e-8 * want_down.max(1.0), "down {down} vs {want_down}");
    assert!((up - want_up).abs() <= 1e-8 * want_up.max(1.0), "up {up} vs {want_up}");
    (down, up)
}

// two filled triangles glued by a bridging triangle [1, 2, 3]
const G_EDGES: [Edge; 8] = [[0, 1], [0, 2], [1, 2], [1, 3], [2, 3], [3, 4], [3, 5], [4, 5]];
const G_TRIS: [[usize; 3]; 3] = [[0, 1, 2], [1, 2, 3], [3, 4, 5]];
const D_EDGES: [Edge; 6] = [[0, 1], [0, 2], [1, 2], [3, 4], [3, 5], [4, 5]];
const D_TRIS: [[usize; 3]; 2] = [[0, 1, 2], [3, 4, 5]];

#[test]
fn six_vertex_gluing_epsilons() {
    let (a, b, c) = (0.8, 0.6, 0.3);
    let (gc, dc) = (complex(6, &G_EDGES, &G_TRIS), complex(6, &D_EDGES, &D_TRIS));
    let opts = WeightOptions::default();
    let gs = edge_laplacian(&gc, Some(&[a, c, b]), &opts).unwrap();
    let ds = edge_laplacian(&dc, Some(&[a, b]), &opts).unwrap();
    let part = SimplexPartition::new(&gc, &dc).unwrap();
    let eps = compute_epsilons(&gs, &ds, &gc, &part).unwrap();

    let g = dense(6, &G_EDGES, &G_TRIS, &[a, c, b]);
    let d = dense(6, &D_EDGES, &D_TRIS, &[a, b]);
    // reference weights count only shared cofaces
    let d_w1: HashMap<Edge, f64> = d.edges.iter().copied().zip(d.w1.iter().copied()).collect();
    let shared_tris = [[0, 1, 2], [3, 4, 5]];
    let shared_w2 = [a, b];
    let mut ref1: HashMap<Edge, f64> = HashMap::new();
    for (t, &w) in shared_tris.iter().zip(&shared_w2) {
        for e in [[t[0], t[1]], [t[0], t[2]], [t[1], t[2]]] {
            *ref1.entry(e).or_default() += w;
        }
    }
    let mut ref0 = [0.0; 6];
    for (&[u, v], &w) in &ref1 {
        ref0[u] += w;
        ref0[v] += w;
    }
    let (mut e1, mut ep1, mut e0, mut ep0) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (e, &w) in g.edges.iter().zip(&g.w1) {
        if let Some(&wh) = d_w1.get(e) {
            e1 = e1.max(w / ref1[e] - 1.0).max(wh / ref1[e] - 1.0);
            ep1 = ep1.max((w / wh - 1.0).abs()).max((wh / w - 1.0).abs());
        }
    }
    for v in 0..6 {
        let (w, wh) = (g.w0[v], d.w0[v]);
        e0 = e0.max(w / ref0[v] - 1.0).max(wh / ref0[v] - 1.0);
        ep0 = ep0.max((w / wh - 1.0).abs()).max((wh / w - 1.0).abs());
    }
    let close = |x: f64, y: f64| (x - y).abs() < 1e-12;
    assert!(close(eps.eps_k, e1) && close(eps.epsp_k, ep1), "{eps:?} vs {e1} {ep1}");
    assert!(close(eps.eps_km1, e0) && close(eps.epsp_km1, ep0), "{eps:?} vs {e0} {ep0}");
    // edge [1,2] gains the bridge weight c on top of a
    assert!(close(eps.eps_k, c / a));
    assert_eq!(eps.skipped, [0, 0]);
    assert_eq!(part.levels[1].created().len(), 2);
    assert_eq!(part.levels[2].created().len(), 1);
    assert!(part.levels[1].destroyed().is_empty());
}

#[test]
fn six_vertex_gluing_difference_norms() {
    check_against_oracle(6, &G_EDGES, &G_TRIS, &[0.8, 0.3, 0.6], &D_EDGES, &D_TRIS, &[0.8, 0.6]);
    // two bare triangles joined by one edge
    let d_edges = [[0, 1], [0, 2], [1, 2], [3, 4], [3, 5], [4, 5]];
    let g_edges = [[0, 1], [0, 2], [1, 2], [2, 3], [3, 4], [3, 5], [4, 5]];
    check_against_oracle(6, &g_edges, &[], &[], &d_edges, &[], &[]);
}

#[test]
fn identical_complexes_have_no_perturbation() {
    let gc = complex(6, &G_EDGES, &G_TRIS);
    let gs = edge_laplacian(&gc, Some(&[0.8, 0.3, 0.6]), &WeightOptions::default()).unwrap();
    let part = SimplexPartition::new(&gc, &gc).unwrap();
    let eps = compute_epsilons(&gs, &gs, &gc, &part).unwrap();
    assert_eq!((eps.eps_k, eps.eps_km1, eps.epsp_k, eps.epsp_km1), (0.0, 0.0, 0.0, 0.0));
    assert_eq!(diff_laplacians(&gs, &gs, &part).unwrap(), (0.0, 0.0));
}

#[test]
fn bound_arithmetic() {
    assert_eq!(theorem_bound(0.0, 0.0, 2, &[0.5]).unwrap(), 0.0);
    let rhs = theorem_bound(0.006f64.sqrt(), 0.004f64.sqrt(), 2, &[0.9, 0.5]).unwrap();
    assert!((rhs - 0.32).abs() < 1e-12);
    assert!(matches!(theorem_bound(0.1, 0.1, 2, &[0.0, 0.4]), Err(Error::ZeroEigengap)));
    assert!(matches!(theorem_bound(0.1, 0.1, 2, &[]), Err(Error::ZeroEigengap)));

    let eps = Epsilons { eps_k: 0.04, eps_km1: 0.0, epsp_k: 0.04, epsp_km1: 0.0, skipped: [0, 0] };
    let (_, up) = hypothesis_caps(&eps, ComplexKind::Simplicial, 1);
    assert!((up - 1.32f64.powi(2) * 9.0).abs() < 1e-12);
    assert!((up - 15.68).abs() < 0.01);
}

fn rotation3(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    let rz = |t: f64| DMatrix::from_row_slice(3, 3, &[t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0]);
    let ry = |t: f64| DMatrix::from_row_slice(3, 3, &[t.cos(), 0.0, t.sin(), 0.0, 1.0, 0.0, -t.sin(), 0.0, t.cos()]);
    rz(a) * ry(b) * rz(c)
}

/// Grid search over ZYZ Euler angles, both orientations, refined by a shrinking pattern search.
fn grid_min(y: &DMatrix<f64>, y_hat: &DMatrix<f64>) -> f64 {
    use std::f64::consts::PI;
    let flip = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 1.0, -1.0]));
    let f = |p: [f64; 3], s: &DMatrix<f64>| (y - y_hat * rotation3(p[0], p[1], p[2]) * s).norm_squared();
    let mut best = f64::INFINITY;
    for s in [DMatrix::identity(3, 3), flip] {
        let steps = 24;
        let mut start = ([0.0; 3], f64::INFINITY);
        for i in 0..steps {
            for j in 0..=steps / 2 {
                for k in 0..steps {
                    let p = [2.0 * PI * i as f64 / steps as f64, PI * j as f64 / (steps / 2) as f64, 2.0 * PI * k as f64 / steps as f64];
                    let v = f(p, &s);
                    if v < start.1 {
                        start = (p, v);
                    }
                }
            }
        }
        let (mut p, mut v) = start;
        let mut h = 2.0 * PI / steps as f64;
        while h > 1e-7 {
            let mut moved = false;
            for d in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut q = p;
                    q[d] += sign * h;
                    let w = f(q, &s);
                    if w < v {
                        (p, v, moved) = (q, w, true);
                    }
                }
            }
            if !moved {
                h /= 2.0;
            }
        }
        best = best.min(v);
    }
    best
}

#[test]
fn procrustes_matches_rotation_search() {
    let mut r = rng(17);
    for _ in 0..3 {
        let y_hat = DMatrix::from_fn(20, 3, |_, _| r.random_range(-1.0..1.0)).qr().q();
        let y = DMatrix::from_fn(20, 3, |_, _| r.random_range(-1.0..1.0)).qr().q();
        let (lhs, o) = subspace_error(&y, &y_hat).unwrap();
        let oracle = grid_min(&y, &y_hat);
        assert!((lhs - oracle).abs() < 1e-3, "{lhs} vs {oracle}");
        assert!(lhs <= oracle + 1e-12);
        assert!((o.transpose() * &o - DMatrix::identity(3, 3)).abs().max() < 1e-12);
    }
}

#[test]
fn procrustes_trivial_cases() {
    let mut r = rng(5);
    let y_hat = DMatrix::from_fn(15, 2, |_, _| r.random_range(-1.0..1.0)).qr().q();
    let q = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
    let (lhs, o) = subspace_error(&(&y_hat * &q), &y_hat).unwrap();
    assert!(lhs < 1e-24 && (o - q).abs().max() < 1e-12);

    let mut y = y_hat.clone();
    y.row_mut(4).fill(0.0);
    for mut c in y.column_iter_mut() {
        c.normalize_mut();
    }
    assert!(subspace_error(&y, &y_hat).unwrap().0 <= 4.0);
}

#[test]
fn ellipse_envelopes() {
    // a filled ellipse: the boundary plus interior points that never win a bin
    let pts: Vec<f64> = (0..400)
        .flat_map(|i| {
            let t = std::f64::consts::TAU * (i % 200) as f64 / 200.0;
            let s = if i < 200 { 1.0 } else { 0.3 + 0.6 * ((i * 37) % 11) as f64 / 10.0 };
            [2.0 * t.cos() * s, t.sin() * s]
        })
        .collect();
    let m = DMatrix::from_row_slice(400, 2, &pts);
    let fit = ellipsoid_envelope_check(&m).unwrap();
    assert!((fit.semi_axes[0] - 1.0).abs() < 1e-9 && (fit.semi_axes[1] - 2.0).abs() < 1e-9, "{:?}", fit.semi_axes);
    assert!(fit.residual < 1e-9);

    let circle: Vec<f64> = (0..90).flat_map(|i| {
        let t = std::f64::consts::TAU * i as f64 / 90.0;
        [t.cos(), t.sin()]
    }).collect();
    let fit = ellipsoid_envelope_check(&DMatrix::from_row_slice(90, 2, &circle)).unwrap();
    assert!(fit.semi_axes[1] / fit.semi_axes[0] < 1.1);

    let line = DMatrix::from_column_slice(5, 1, &[1.0, -1.0, 0.5, 0.2, -0.3]);
    assert!(matches!(ellipsoid_envelope_check(&line), Err(Error::NotApplicable(_))));
}

#[test]
fn small_punctured_planes_report() {
    let data = punctplane(600, 0.0, PunctPlaneShape::default(), 2).unwrap();
    let rep = perturb_check_cloud(&data.cloud, data.labels.as_ref().unwrap(), &PerturbOptions::default()).unwrap();
    assert_eq!(rep.beta_glued, 2);
    assert_eq!(rep.beta_parts, vec![1, 1]);
    assert!(rep.lhs <= 4.0);
    assert!(rep.diff_down_norm <= 6.0 && rep.diff_up_norm <= 6.0);
    assert!(!rep.caps_met || rep.bound_holds);
    assert_eq!(rep.bound_holds, rep.lhs <= rep.rhs);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn difference_norms_match_dense_and_stay_below_cap(seed in 0u64..1000) {
        let mut r = rng(seed);
        let n = 10;
        let full = random_simplicial(&mut r, n, 0.5, 0.7);
        let side: Vec<bool> = (0..n).map(|i| i < n / 2).collect();
        let g_edges: Vec<Edge> = full.edges().to_vec();
        let g_tris: Vec<[usize; 3]> = full.cells().iter().map(|c| [c[0], c[1], c[2]]).collect();
        prop_assume!(!g_tris.is_empty());
        let g_w2: Vec<f64> = (0..g_tris.len()).map(|_| r.random_range(0.2..1.0)).collect();
        let d_edges: Vec<Edge> = g_edges.iter().copied().filter(|&[a, b]| side[a] == side[b]).collect();
        let keep: Vec<usize> = (0..g_tris.len()).filter(|&t| g_tris[t].iter().all(|&v| side[v] == side[g_tris[t][0]])).collect();
        prop_assume!(!keep.is_empty() && !d_edges.is_empty());
        let d_tris: Vec<[usize; 3]> = keep.iter().map(|&t| g_tris[t]).collect();
        let d_w2: Vec<f64> = keep.iter().map(|&t| g_w2[t]).collect();
        let (down, up) = check_against_oracle(n, &g_edges, &g_tris, &g_w2, &d_edges, &d_tris, &d_w2);
        prop_assert!(down <= 6.0 + 1e-9 && up <= 6.0 + 1e-9);
    }
}
