//! Shortest homologous loops from per-class harmonic cochains.
//!
//! Each column `z` of the independent basis induces a digraph on the
//! vertices: edge `[s, t]` becomes arc `s -> t` where `z > 0` and `t -> s`
//! where `z < 0`. Cycles in that digraph accumulate `|z|` along every arc, so
//! they cannot be null-homologous. Loops are found by closing shortest
//! paths with a single arc.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use petgraph::algo::{dijkstra, tarjan_scc};
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entries with `|z| <= SNAP * max|z|` are treated as exact zeros.
pub const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub tail: usize,
    pub head: usize,
    /// Index of the underlying edge.
    pub edge: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InducedDigraph {
    pub n_vertices: usize,
    pub arcs: Vec<Arc>,
    pub tau: f64,
}

/// Linear-interpolation quantile (the "type 7" rule) of a sample.
pub fn quantile(values: &[f64], level: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

fn check_inputs(z: &[f64], edges: &[[usize; 2]], dist: &[f64], n_vertices: usize) -> Result<()> {
    if z.len() != edges.len() || dist.len() != edges.len() {
        return Err(Error::Dimension(format!(
            "cochain has {} entries, {} edges, {} distances",
            z.len(),
            edges.len(),
            dist.len()
        )));
    }
    if let Some(d) = dist.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::Input(format!("edge distance {d} is not positive")));
    }
    if let Some(e) = edges.iter().find(|e| e[0] >= n_vertices || e[1] >= n_vertices || e[0] == e[1]) {
        return Err(Error::Input(format!("edge {e:?} is invalid for {n_vertices} vertices")));
    }
    Ok(())
}

fn snap_level(z: &[f64]) -> f64 {
    z.iter().fold(0.0f64, |m, v| m.max(v.abs())) * SNAP
}

/// Orients edges by the sign of `z` and keeps arcs with `|z| >= tau`, where
/// `tau` is the `(1 - 1/beta)` quantile of `|z|` over all edges.
pub fn induce_digraph(z: &[f64], edges: &[[usize; 2]], dist: &[f64], n_vertices: usize, beta: usize) -> Result<InducedDigraph> {
    if beta == 0 {
        return Err(Error::Parameter("beta must be at least 1".into()));
    }
    check_inputs(z, edges, dist, n_vertices)?;
    if z.is_empty() || z.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateColumn(0));
    }
    let abs: Vec<f64> = z.iter().map(|v| v.abs()).collect();
    let tau = quantile(&abs, 1.0 - 1.0 / beta as f64);
    Ok(induce_with_threshold(z, edges, dist, n_vertices, tau))
}

/// Same as [`induce_digraph`] with an explicit threshold.
pub fn induce_with_threshold(z: &[f64], edges: &[[usize; 2]], dist: &[f64], n_vertices: usize, tau: f64) -> InducedDigraph {
    let snap = snap_level(z);
    let arcs = edges
        .iter()
        .enumerate()
        .filter(|&(e, _)| z[e].abs() > snap && z[e].abs() >= tau)
        .map(|(e, &[s, t])| {
            let (tail, head) = if z[e] > 0.0 { (s, t) } else { (t, s) };
            Arc { tail, head, edge: e, weight: dist[e] }
        })
        .collect();
    InducedDigraph { n_vertices, arcs, tau }
}

impl InducedDigraph {
    fn graph(&self) -> DiGraph<(), f64> {
        let mut g = DiGraph::with_capacity(self.n_vertices, self.arcs.len());
        for _ in 0..self.n_vertices {
            g.add_node(());
        }
        for a in &self.arcs {
            g.add_edge(NodeIndex::new(a.tail), NodeIndex::new(a.head), a.weight);
        }
        g
    }

    /// Strongly connected components, each sorted, in ascending order of first vertex.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let mut comps: Vec<Vec<usize>> = tarjan_scc(&self.graph())
            .into_iter()
            .map(|c| {
                let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                c.sort_unstable();
                c
            })
            .collect();
        comps.sort();
        comps
    }

    /// Vertices with at least one incident arc that lie in a singleton
    /// component, i.e. cannot travel back to themselves.
    pub fn stranded_vertices(&self) -> Vec<usize> {
        let mut touched = vec![false; self.n_vertices];
        for a in &self.arcs {
            touched[a.tail] = true;
            touched[a.head] = true;
        }
        self.strongly_connected_components()
            .into_iter()
            .filter(|c| c.len() == 1 && touched[c[0]])
            .map(|c| c[0])
            .collect()
    }

    /// Shortest path lengths from `source` plus a deterministic
    /// predecessor tree (smallest-index predecessor among exact ties).
    fn shortest_paths(&self, g: &DiGraph<(), f64>, incoming: &[Vec<(usize, f64)>], source: usize) -> (Vec<f64>, Vec<usize>) {
        let map = dijkstra(g, NodeIndex::new(source), None, |e| *e.weight());
        let mut dist = vec![f64::INFINITY; self.n_vertices];
        for (node, d) in map {
            dist[node.index()] = d;
        }
        let pred = (0..self.n_vertices)
            .map(|v| {
                if v == source || !dist[v].is_finite() {
                    return usize::MAX;
                }
                incoming[v]
                    .iter()
                    .filter(|&&(u, w)| dist[u] + w == dist[v])
                    .map(|&(u, _)| u)
                    .min()
                    .unwrap_or(usize::MAX)
            })
            .collect();
        (dist, pred)
    }

    fn incoming(&self) -> Vec<Vec<(usize, f64)>> {
        let mut inc = vec![Vec::new(); self.n_vertices];
        for a in &self.arcs {
            inc[a.head].push((a.tail, a.weight));
        }
        inc
    }
}

fn path_to(pred: &[usize], source: usize, target: usize) -> Option<Vec<usize>> {
    let mut path = vec![target];
    let mut v = target;
    while v != source {
        v = pred[v];
        if v == usize::MAX || path.len() > pred.len() {
            return None;
        }
        path.push(v);
    }
    path.reverse();
    Some(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopResult {
    pub class: usize,
    /// `[t, s0, s1, ..., t]`
    pub cycle: Vec<usize>,
    pub length: f64,
    pub path_integral: f64,
    pub tau: f64,
    /// How many times the threshold was halved before a loop was found.
    pub relaxations: usize,
    pub nontrivial: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoopVariant {
    /// Try every arc as the closing arc.
    Exhaustive,
    /// Close only through the arc of largest `|z|`, without thresholding.
    MaxEdge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopOptions {
    pub variant: LoopVariant,
    /// Threshold halvings attempted after an empty search.
    pub max_relaxations: usize,
}

impl Default for LoopOptions {
    fn default() -> Self {
        Self { variant: LoopVariant::Exhaustive, max_relaxations: 3 }
    }
}

/// Best closed loop in `g`, or `None` when the digraph is acyclic.
/// `seeds` restricts which arcs may close the loop.
fn best_loop(g: &InducedDigraph, seeds: &[Arc]) -> Option<(Vec<usize>, f64)> {
    let pg = g.graph();
    let incoming = g.incoming();
    // one search per distinct head s0 serves every arc (t, s0)
    let mut by_head: BTreeMap<usize, Vec<&Arc>> = BTreeMap::new();
    for a in seeds {
        by_head.entry(a.head).or_default().push(a);
    }
    let per_source: Vec<(f64, Vec<Vec<usize>>)> = by_head
        .into_par_iter()
        .filter_map(|(s0, arcs)| {
            let (dist, pred) = g.shortest_paths(&pg, &incoming, s0);
            let best = arcs.iter().map(|a| a.weight + dist[a.tail]).filter(|l| l.is_finite()).fold(f64::INFINITY, f64::min);
            if !best.is_finite() {
                return None;
            }
            let cycles = arcs
                .iter()
                .filter(|a| a.weight + dist[a.tail] == best)
                .filter_map(|a| {
                    let path = path_to(&pred, s0, a.tail)?;
                    let mut cycle = Vec::with_capacity(path.len() + 1);
                    cycle.push(a.tail);
                    cycle.extend(path);
                    Some(cycle)
                })
                .collect();
            Some((best, cycles))
        })
        .collect();
    let best = per_source.iter().map(|(l, _)| *l).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    per_source
        .into_iter()
        .filter(|(l, _)| *l == best)
        .flat_map(|(_, c)| c)
        .min()
        .map(|c| (c, best))
}

/// Signed integral of `z` along a closed vertex walk. Traversing `[a, b]`
/// with `a < b` counts `+z`, the reverse direction `-z`.
pub fn path_integral(cycle: &[usize], z: &[f64], edges: &[[usize; 2]]) -> Result<f64> {
    let lookup: std::collections::HashMap<[usize; 2], usize> = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let mut total = 0.0;
    for w in cycle.windows(2) {
        let (a, b) = (w[0], w[1]);
        let key = if a < b { [a, b] } else { [b, a] };
        let e = *lookup.get(&key).ok_or_else(|| Error::Input(format!("cycle uses missing edge [{a}, {b}]")))?;
        total += if a < b { z[e] } else { -z[e] };
    }
    Ok(total)
}

/// Path integral of a loop and whether it clears the nontriviality threshold
/// `1e-8 * max|z| * (number of arcs)`.
pub fn certify_nontrivial(cycle: &[usize], z: &[f64], edges: &[[usize; 2]]) -> Result<(f64, bool)> {
    if cycle.len() < 3 || cycle.first() != cycle.last() {
        return Err(Error::Input("cycle must be closed and have at least two arcs".into()));
    }
    let value = path_integral(cycle, z, edges)?;
    let zmax = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let nontrivial = value.abs() > 1e-8 * zmax * (cycle.len() - 1) as f64;
    if !nontrivial {
        log::warn!("loop has negligible path integral {value:e}; it may not represent its class");
    }
    Ok((value, nontrivial))
}

fn loop_for_class(
    class: usize,
    z: &[f64],
    edges: &[[usize; 2]],
    dist: &[f64],
    n_vertices: usize,
    beta: usize,
    opts: &LoopOptions,
) -> Result<LoopResult> {
    let (found, tau, relaxations) = match opts.variant {
        LoopVariant::Exhaustive => {
            let mut g = induce_digraph(z, edges, dist, n_vertices, beta).map_err(|e| match e {
                Error::DegenerateColumn(_) => Error::DegenerateColumn(class),
                e => e,
            })?;
            let mut attempt = 0;
            loop {
                if let Some(found) = best_loop(&g, &g.arcs) {
                    break (found, g.tau, attempt);
                }
                if attempt == opts.max_relaxations {
                    return Err(Error::NoLoop { class });
                }
                attempt += 1;
                g = induce_with_threshold(z, edges, dist, n_vertices, g.tau / 2.0);
                log::info!("class {class}: no loop, relaxing threshold to {:e}", g.tau);
            }
        }
        LoopVariant::MaxEdge => {
            check_inputs(z, edges, dist, n_vertices)?;
            let g = induce_with_threshold(z, edges, dist, n_vertices, 0.0);
            // ties on |z| go to the lowest edge index
            let seed = g
                .arcs
                .iter()
                .copied()
                .fold(None::<Arc>, |best, a| match best {
                    Some(b) if z[b.edge].abs() >= z[a.edge].abs() => Some(b),
                    _ => Some(a),
                })
                .ok_or(Error::DegenerateColumn(class))?;
            let found = best_loop(&g, &[seed]).ok_or(Error::NoLoop { class })?;
            (found, 0.0, 0)
        }
    };
    let (cycle, length) = found;
    let (value, nontrivial) = certify_nontrivial(&cycle, z, edges)?;
    Ok(LoopResult { class, cycle, length, path_integral: value, tau, relaxations, nontrivial })
}

/// One loop per column of `z`, searched in parallel and returned in column order.
pub fn shortest_homologous_loops(
    z: &DMatrix<f64>,
    n_vertices: usize,
    edges: &[[usize; 2]],
    dist: &[f64],
    opts: &LoopOptions,
) -> Result<Vec<LoopResult>> {
    if z.nrows() != edges.len() {
        return Err(Error::Dimension(format!("Z has {} rows for {} edges", z.nrows(), edges.len())));
    }
    let beta = z.ncols();
    (0..beta)
        .into_par_iter()
        .map(|i| {
            let col: Vec<f64> = z.column(i).iter().copied().collect();
            loop_for_class(i, &col, edges, dist, n_vertices, beta, opts)
        })
        .collect()
}

/// The max-edge variant for every column.
pub fn shortest_loops_maxedge(z: &DMatrix<f64>, n_vertices: usize, edges: &[[usize; 2]], dist: &[f64]) -> Result<Vec<LoopResult>> {
    shortest_homologous_loops(z, n_vertices, edges, dist, &LoopOptions { variant: LoopVariant::MaxEdge, max_relaxations: 0 })
}
