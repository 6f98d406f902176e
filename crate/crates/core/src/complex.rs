//! Complex construction: CkNN neighborhood graphs and clique complexes for
//! point clouds, cubical complexes for thresholded images, and furthest
//! point subsampling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` points in `R^D`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or_else(|| Error::Input("empty point cloud".into()))?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::Input(format!("point {i} has dimension {} (expected {dim})", p.len())));
            }
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("points must have dimension >= 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::Input("empty point cloud".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::Input("coordinate count is not a multiple of the dimension".into()));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::Input(format!("non-finite coordinate in point {}", pos / dim)));
        }
        Ok(Self { dim, coords })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.point(i), self.point(j)).sqrt()
    }

    pub fn subset(&self, indices: &[usize]) -> PointCloud {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointCloud { dim: self.dim, coords }
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Greedy max-min subsampling starting from a point drawn with `seed`.
pub fn furthest_point_sample(cloud: &PointCloud, n: usize, seed: u64) -> Result<Vec<usize>> {
    if cloud.is_empty() {
        return Err(Error::Input("empty point cloud".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = rng.random_range(0..cloud.len());
    furthest_point_sample_from(cloud, n, start)
}

/// Greedy max-min subsampling from a fixed first point. Each pick maximizes
/// the distance to the nearest already-selected point; ties go to the
/// smallest index.
pub fn furthest_point_sample_from(cloud: &PointCloud, n: usize, start: usize) -> Result<Vec<usize>> {
    let total = cloud.len();
    if total == 0 {
        return Err(Error::Input("empty point cloud".into()));
    }
    if n == 0 || n > total {
        return Err(Error::Size { requested: n, available: total });
    }
    if start >= total {
        return Err(Error::Parameter(format!("start index {start} out of range")));
    }
    let mut selected = Vec::with_capacity(n);
    let mut min_d = vec![f64::INFINITY; total];
    let mut current = start;
    selected.push(current);
    min_d[current] = f64::NEG_INFINITY;
    while selected.len() < n {
        let anchor = cloud.point(current);
        let (best, _) = min_d
            .par_chunks_mut(4096)
            .enumerate()
            .map(|(chunk, slice)| {
                let base = chunk * 4096;
                let mut best = (usize::MAX, f64::NEG_INFINITY);
                for (off, m) in slice.iter_mut().enumerate() {
                    if *m == f64::NEG_INFINITY {
                        continue;
                    }
                    let idx = base + off;
                    let d = sq_dist(anchor, cloud.point(idx));
                    if d < *m {
                        *m = d;
                    }
                    if *m > best.1 {
                        best = (idx, *m);
                    }
                }
                best
            })
            .reduce(
                || (usize::MAX, f64::NEG_INFINITY),
                |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a },
            );
        current = best;
        selected.push(current);
        min_d[current] = f64::NEG_INFINITY;
    }
    Ok(selected)
}

/// Distance from every point to its `k`-th nearest neighbor, the point itself excluded.
pub fn knn_radius(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let n = cloud.len();
    if k == 0 || k >= n {
        return Err(Error::Parameter(format!("k = {k} must satisfy 1 <= k < n = {n}")));
    }
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let mut d: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| sq_dist(p, cloud.point(j))).collect();
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            kth.sqrt()
        })
        .collect())
}

/// Undirected neighborhood graph; edges are `(i, j)` with `i < j`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodGraph {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub edge_dist: Vec<f64>,
    pub rho: Vec<f64>,
}

/// Continuous k-nearest-neighbor graph: `(i, j)` is an edge iff
/// `|x_i - x_j| <= delta * sqrt(rho_k(x_i) rho_k(x_j))`.
pub fn cknn_graph(cloud: &PointCloud, k: usize, delta: f64) -> Result<NeighborhoodGraph> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    let rho = knn_radius(cloud, k)?;
    cknn_graph_with_radius(cloud, &rho, delta)
}

pub fn cknn_graph_with_radius(cloud: &PointCloud, rho: &[f64], delta: f64) -> Result<NeighborhoodGraph> {
    let n = cloud.len();
    if rho.len() != n {
        return Err(Error::Dimension(format!("{} radii for {n} points", rho.len())));
    }
    let rows: Vec<Result<Vec<(usize, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            let mut out = Vec::new();
            for j in i + 1..n {
                let d = sq_dist(p, cloud.point(j)).sqrt();
                if d <= delta * (rho[i] * rho[j]).sqrt() {
                    if d == 0.0 {
                        return Err(Error::Input(format!("points {i} and {j} coincide")));
                    }
                    out.push((j, d));
                }
            }
            Ok(out)
        })
        .collect();
    let mut edges = Vec::new();
    let mut edge_dist = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        for (j, d) in row? {
            edges.push((i, j));
            edge_dist.push(d);
        }
    }
    Ok(NeighborhoodGraph { n_vertices: n, edges, edge_dist, rho: rho.to_vec() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComplexKind {
    Simplicial,
    Cubical,
}

impl ComplexKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComplexKind::Simplicial => "simplicial",
            ComplexKind::Cubical => "cubical",
        }
    }
}

/// A 2-complex: vertices, canonically oriented edges (`a < b`) and 2-cells.
///
/// Triangles are stored with ascending vertices `[x, y, z]`; rectangles are
/// stored in cyclic order `[x, y, z, w]` (top-left, top-right, bottom-right,
/// bottom-left for image grids). Either way a 2-cell's boundary is the
/// closed walk through its vertex list.
#[derive(Debug, Clone)]
pub struct Complex2 {
    kind: ComplexKind,
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    cells: Vec<Vec<usize>>,
    lookup: HashMap<(usize, usize), usize>,
}

impl PartialEq for Complex2 {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.n_vertices == other.n_vertices
            && self.edges == other.edges
            && self.cells == other.cells
    }
}

impl Complex2 {
    /// Validates and builds a complex. Edges must be canonical and unique and
    /// every 2-cell must have all of its boundary edges present.
    pub fn new(kind: ComplexKind, n_vertices: usize, edges: Vec<[usize; 2]>, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut lookup = HashMap::with_capacity(edges.len());
        for (idx, &[a, b]) in edges.iter().enumerate() {
            if a >= b {
                return Err(Error::Input(format!("edge {idx} = [{a}, {b}] is not canonically oriented")));
            }
            if b >= n_vertices {
                return Err(Error::Closure(format!("edge {idx} references vertex {b} >= {n_vertices}")));
            }
            if lookup.insert((a, b), idx).is_some() {
                return Err(Error::Input(format!("duplicate edge [{a}, {b}]")));
            }
        }
        let arity = match kind {
            ComplexKind::Simplicial => 3,
            ComplexKind::Cubical => 4,
        };
        let mut seen = std::collections::HashSet::with_capacity(cells.len());
        for (idx, cell) in cells.iter().enumerate() {
            if cell.len() != arity {
                return Err(Error::Input(format!("cell {idx} has {} vertices, expected {arity}", cell.len())));
            }
            if kind == ComplexKind::Simplicial && !(cell[0] < cell[1] && cell[1] < cell[2]) {
                return Err(Error::Input(format!("triangle {idx} = {cell:?} is not in ascending order")));
            }
            let mut key = cell.clone();
            key.sort_unstable();
            if key.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Input(format!("cell {idx} repeats a vertex")));
            }
            if !seen.insert(key) {
                return Err(Error::Input(format!("duplicate cell {cell:?}")));
            }
            for (a, b) in cycle_pairs(cell) {
                if !lookup.contains_key(&(a.min(b), a.max(b))) {
                    return Err(Error::Closure(format!("cell {idx} = {cell:?} is missing edge [{}, {}]", a.min(b), a.max(b))));
                }
            }
        }
        Ok(Self { kind, n_vertices, edges, cells, lookup })
    }

    pub fn kind(&self) -> ComplexKind {
        self.kind
    }

    pub fn n0(&self) -> usize {
        self.n_vertices
    }

    pub fn n1(&self) -> usize {
        self.edges.len()
    }

    pub fn n2(&self) -> usize {
        self.cells.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    /// Index of the edge joining `a` and `b`, in either order.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.lookup.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn edge_lengths(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        if cloud.len() != self.n_vertices {
            return Err(Error::Dimension(format!("{} points for {} vertices", cloud.len(), self.n_vertices)));
        }
        Ok(self.edges.iter().map(|&[a, b]| cloud.dist(a, b)).collect())
    }
}

/// Consecutive vertex pairs of the closed walk through `cell`.
pub(crate) fn cycle_pairs(cell: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..cell.len()).map(move |i| (cell[i], cell[(i + 1) % cell.len()]))
}

/// Clique (flag) complex of a graph, truncated at triangles.
pub fn clique_complex(graph: &NeighborhoodGraph) -> Result<Complex2> {
    let n = graph.n_vertices;
    let mut up: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(a, b) in &graph.edges {
        if a == b {
            return Err(Error::Input(format!("self-loop at vertex {a}")));
        }
        up[a.min(b)].push(a.max(b));
    }
    up.iter_mut().for_each(|v| v.sort_unstable());
    let mut edges: Vec<[usize; 2]> = graph.edges.iter().map(|&(a, b)| [a.min(b), a.max(b)]).collect();
    edges.sort_unstable();
    let triangles: Vec<Vec<Vec<usize>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            for &j in &up[i] {
                // sorted intersection of up[i] and up[j]
                let (mut p, mut q) = (0, 0);
                let (a, b) = (&up[i], &up[j]);
                while p < a.len() && q < b.len() {
                    match a[p].cmp(&b[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            out.push(vec![i, j, a[p]]);
                            p += 1;
                            q += 1;
                        }
                    }
                }
            }
            out
        })
        .collect();
    let cells: Vec<Vec<usize>> = triangles.into_iter().flatten().collect();
    Complex2::new(ComplexKind::Simplicial, n, edges, cells)
}

/// Product-of-Gaussians triangle weights with bandwidth `delta^(2/3) / 3`.
pub fn triangle_weights(cloud: &PointCloud, complex: &Complex2, k: usize, delta: f64) -> Result<Vec<f64>> {
    let rho = knn_radius(cloud, k)?;
    triangle_weights_with_radius(cloud, complex, &rho, delta)
}

pub fn triangle_weights_with_radius(cloud: &PointCloud, complex: &Complex2, rho: &[f64], delta: f64) -> Result<Vec<f64>> {
    if complex.kind() != ComplexKind::Simplicial {
        return Err(Error::Kind { expected: "simplicial" });
    }
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!("delta must be positive, got {delta}")));
    }
    if cloud.len() != complex.n0() || rho.len() != complex.n0() {
        return Err(Error::Dimension("cloud, radii and complex disagree on vertex count".into()));
    }
    let eps = delta.powf(2.0 / 3.0) / 3.0;
    let kernel = |a: usize, b: usize| (-sq_dist(cloud.point(a), cloud.point(b)) / (eps * rho[a] * rho[b])).exp();
    Ok(complex
        .cells()
        .iter()
        .map(|t| kernel(t[0], t[1]) * kernel(t[1], t[2]) * kernel(t[0], t[2]))
        .collect())
}

/// Grayscale raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub max_val: u32,
    pub data: Vec<u32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, max_val: u32, data: Vec<u32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Input(format!("{} pixels for a {width}x{height} image", data.len())));
        }
        if max_val == 0 {
            return Err(Error::Input("max_val must be positive".into()));
        }
        if let Some(v) = data.iter().find(|&&v| v > max_val) {
            return Err(Error::Input(format!("pixel value {v} exceeds max_val {max_val}")));
        }
        Ok(Self { width, height, max_val, data })
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.data[row * self.width + col]
    }
}

/// A cubical complex together with the pixel coordinates `(col, row)` of its vertices.
#[derive(Debug, Clone)]
pub struct ImageComplex {
    pub complex: Complex2,
    pub coords: Option<PointCloud>,
}

/// Thresholds an image (`intensity >= threshold`, or `<=` when inverted),
/// applies a morphological closing with a `(2r+1)`-square element, and
/// builds the cubical complex of the foreground.
pub fn cubical_complex(img: &GrayImage, threshold: u32, closing_radius: usize, invert: bool) -> Result<ImageComplex> {
    if threshold > img.max_val {
        return Err(Error::Parameter(format!("threshold {threshold} exceeds max_val {}", img.max_val)));
    }
    let mask: Vec<bool> = img
        .data
        .iter()
        .map(|&v| if invert { v <= threshold } else { v >= threshold })
        .collect();
    let mask = closing(&mask, img.width, img.height, closing_radius);
    Ok(cubical_from_mask(&mask, img.width, img.height))
}

pub fn cubical_from_mask(mask: &[bool], width: usize, height: usize) -> ImageComplex {
    let mut id = vec![usize::MAX; width * height];
    let mut coords = Vec::new();
    let mut n = 0;
    for (p, &fg) in mask.iter().enumerate() {
        if fg {
            id[p] = n;
            n += 1;
            coords.push(vec![(p % width) as f64, (p / width) as f64]);
        }
    }
    let mut edges = Vec::new();
    let mut cells = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let p = r * width + c;
            if !mask[p] {
                continue;
            }
            if c + 1 < width && mask[p + 1] {
                edges.push([id[p], id[p + 1]]);
            }
            if r + 1 < height && mask[p + width] {
                edges.push([id[p], id[p + width]]);
            }
            if c + 1 < width && r + 1 < height && mask[p + 1] && mask[p + width] && mask[p + width + 1] {
                cells.push(vec![id[p], id[p + 1], id[p + width + 1], id[p + width]]);
            }
        }
    }
    edges.sort_unstable();
    let complex = Complex2::new(ComplexKind::Cubical, n, edges, cells).expect("grid construction is closed");
    let coords = if n > 0 { Some(PointCloud::new(coords).expect("finite pixel coordinates")) } else { None };
    ImageComplex { complex, coords }
}

/// Dilation followed by erosion. Pixels outside the image count as
/// background for the dilation and foreground for the erosion, so the result
/// always contains the input mask.
fn closing(mask: &[bool], width: usize, height: usize, radius: usize) -> Vec<bool> {
    if radius == 0 {
        return mask.to_vec();
    }
    let window = |m: &[bool], want: bool, outside: bool| -> Vec<bool> {
        let r = radius as isize;
        let mut out = vec![!want; m.len()];
        for y in 0..height as isize {
            for x in 0..width as isize {
                let mut hit = false;
                'scan: for dy in -r..=r {
                    for dx in -r..=r {
                        let (yy, xx) = (y + dy, x + dx);
                        let v = if yy < 0 || xx < 0 || yy >= height as isize || xx >= width as isize {
                            outside
                        } else {
                            m[yy as usize * width + xx as usize]
                        };
                        if v == want {
                            hit = true;
                            break 'scan;
                        }
                    }
                }
                out[y as usize * width + x as usize] = if hit { want } else { !want };
            }
        }
        out
    };
    // dilation: any foreground in window; erosion: any background in window clears
    let dilated = window(mask, true, false);
    window(&dilated, false, true)
}
