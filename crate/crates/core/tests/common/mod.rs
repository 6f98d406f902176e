//! Independent oracles and random instance generators shared by the
//! integration tests. Nothing here calls into the solver paths under test.
#![allow(dead_code)]

use hodgeloop::complex::cubical_from_mask;
use hodgeloop::{BoundaryMatrix, Complex2, ComplexKind};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random graph on `n` vertices with a random subset of its triangles filled.
pub fn random_simplicial(rng: &mut ChaCha8Rng, n: usize, p_edge: f64, p_fill: f64) -> Complex2 {
    let mut adj = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p_edge) {
                adj[i][j] = true;
                adj[j][i] = true;
                edges.push([i, j]);
            }
        }
    }
    let mut cells = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if adj[i][j] && adj[j][k] && adj[i][k] && rng.random_bool(p_fill) {
                    cells.push(vec![i, j, k]);
                }
            }
        }
    }
    Complex2::new(ComplexKind::Simplicial, n, edges, cells).unwrap()
}

/// Cubical complex of a random binary image, retried until nonempty.
pub fn random_cubical(rng: &mut ChaCha8Rng, width: usize, height: usize, p_on: f64) -> Complex2 {
    loop {
        let mask: Vec<bool> = (0..width * height).map(|_| rng.random_bool(p_on)).collect();
        let cx = cubical_from_mask(&mask, width, height).complex;
        if cx.n1() > 0 {
            return cx;
        }
    }
}

pub fn dense_int(b: &BoundaryMatrix) -> Vec<Vec<i64>> {
    let mut m = vec![vec![0i64; b.cols()]; b.rows()];
    for &(r, c, s) in b.entries() {
        m[r][c] += s as i64;
    }
    m
}

pub fn dense_f64(b: &BoundaryMatrix) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(b.rows(), b.cols());
    for &(r, c, s) in b.entries() {
        m[(r, c)] += s as f64;
    }
    m
}

fn rank_mod(mut m: Vec<Vec<i64>>, p: i64) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v = v.rem_euclid(p);
        }
    }
    let pow = |mut b: i64, mut e: i64| {
        let mut r = 1i64;
        b %= p;
        while e > 0 {
            if e & 1 == 1 {
                r = (r as i128 * b as i128 % p as i128) as i64;
            }
            b = (b as i128 * b as i128 % p as i128) as i64;
            e >>= 1;
        }
        r
    };
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) = (rank..rows).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, piv);
        let inv = pow(m[rank][c], p - 2);
        for r in 0..rows {
            if r != rank && m[r][c] != 0 {
                let f = (m[r][c] as i128 * inv as i128 % p as i128) as i64;
                for cc in c..cols {
                    let v = (m[r][cc] as i128 - f as i128 * m[rank][cc] as i128).rem_euclid(p as i128);
                    m[r][cc] = v as i64;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Rank over the rationals of an integer matrix. Reduction modulo a prime
/// can only lose rank, so the larger of two large-prime ranks is exact
/// unless both primes divide every maximal nonzero minor.
pub fn exact_rank(m: &[Vec<i64>]) -> usize {
    let m = m.to_vec();
    rank_mod(m.clone(), 2_147_483_647).max(rank_mod(m, 1_000_000_007))
}

/// `n_1 - rank(B_1) - rank(B_2)`; the diagonal weight scalings do not change ranks.
pub fn betti1_oracle(b1: &BoundaryMatrix, b2: &BoundaryMatrix) -> usize {
    b1.cols() - exact_rank(&dense_int(b1)) - exact_rank(&dense_int(b2))
}

pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// All simple directed cycles, each reported once starting from its smallest vertex.
pub fn simple_cycles(n: usize, arcs: &[(usize, usize, f64)]) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    fn dfs(
        start: usize,
        v: usize,
        arcs: &[(usize, usize, f64)],
        path: &mut Vec<usize>,
        len: f64,
        on: &mut Vec<bool>,
        out: &mut Vec<(Vec<usize>, f64)>,
    ) {
        for &(a, b, w) in arcs {
            if a != v {
                continue;
            }
            if b == start {
                let mut cyc = path.clone();
                cyc.push(start);
                out.push((cyc, len + w));
            } else if b > start && !on[b] {
                on[b] = true;
                path.push(b);
                dfs(start, b, arcs, path, len + w, on, out);
                path.pop();
                on[b] = false;
            }
        }
    }
    for s in 0..n {
        let mut on = vec![false; n];
        on[s] = true;
        dfs(s, s, arcs, &mut vec![s], 0.0, &mut on, &mut out);
    }
    out
}

/// Textbook greedy max-min sampling, recomputing every distance each step.
pub fn brute_fps(points: &[Vec<f64>], n: usize, start: usize) -> Vec<usize> {
    let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let mut sel = vec![start];
    while sel.len() < n {
        let mut best = (usize::MAX, -1.0);
        for i in 0..points.len() {
            if sel.contains(&i) {
                continue;
            }
            let m = sel.iter().map(|&s| d(&points[i], &points[s])).fold(f64::INFINITY, f64::min);
            if m > best.1 {
                best = (i, m);
            }
        }
        sel.push(best.0);
    }
    sel
}

/// Disjoint union of directed cycles of the given lengths, as a graph complex.
pub fn disjoint_cycles(lengths: &[usize]) -> Complex2 {
    let mut edges = Vec::new();
    let mut base = 0;
    for &l in lengths {
        for i in 0..l {
            let (a, b) = (base + i, base + (i + 1) % l);
            edges.push([a.min(b), a.max(b)]);
        }
        base += l;
    }
    edges.sort_unstable();
    Complex2::new(ComplexKind::Simplicial, base, edges, Vec::new()).unwrap()
}
