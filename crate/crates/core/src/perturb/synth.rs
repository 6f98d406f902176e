//! Synthetic manifolds with known first Betti numbers.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::complex::{furthest_point_sample, PointCloud};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    Torus,
    ThreeTorus,
    Genus2,
    PunctPlane,
    ToriConcat,
}

impl Manifold {
    pub fn beta1(self) -> usize {
        match self {
            Manifold::Torus => 2,
            Manifold::ThreeTorus => 3,
            Manifold::Genus2 => 4,
            Manifold::PunctPlane => 2,
            Manifold::ToriConcat => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Manifold::Torus => "torus",
            Manifold::ThreeTorus => "three_torus",
            Manifold::Genus2 => "genus2",
            Manifold::PunctPlane => "punctplane",
            Manifold::ToriConcat => "tori_concat",
        }
    }
}

impl std::str::FromStr for Manifold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "torus" => Ok(Manifold::Torus),
            "three_torus" | "3_torus" => Ok(Manifold::ThreeTorus),
            "genus2" | "genus_2" => Ok(Manifold::Genus2),
            "punctplane" => Ok(Manifold::PunctPlane),
            "tori_concat" => Ok(Manifold::ToriConcat),
            _ => Err(Error::Parameter(format!("unknown manifold '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub manifold: Manifold,
    pub cloud: PointCloud,
    pub beta1: usize,
    /// Prime-manifold label per point, where the manifold is a connected sum.
    pub labels: Option<Vec<usize>>,
    /// Intrinsic angles per point for the tori.
    pub angles: Option<Vec<Vec<f64>>>,
}

/// Extra pure-noise coordinates appended to the tori.
pub const TORUS_NOISE_DIMS: usize = 10;
/// Dense sample size before subsampling the three-torus.
pub const THREE_TORUS_DENSE: usize = 100_000;
/// Grid resolution per axis for the genus-2 surface.
pub const GENUS2_GRID: usize = 1000;

fn torus_point(t1: f64, t2: f64) -> [f64; 3] {
    let r = 1.0 + 0.5 * t1.cos();
    [r * t2.cos(), r * t2.sin(), 1.0 + 0.5 * t1.sin()]
}

/// Angle pairs on a `side x side` grid, topped up with uniform draws when
/// `n` is not a perfect square.
fn torus_angles(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let side = (n as f64).sqrt().floor() as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..side {
        for j in 0..side {
            out.push(vec![TAU * i as f64 / side as f64, TAU * j as f64 / side as f64]);
        }
    }
    while out.len() < n {
        out.push(vec![rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)]);
    }
    out
}

fn noisy_torus(n: usize, noise: f64, shift: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let normal = Normal::new(0.0, noise).map_err(|e| Error::Parameter(e.to_string()))?;
    let angles = torus_angles(n, rng);
    let points = angles
        .iter()
        .map(|a| {
            let [x1, x2, x3] = torus_point(a[0], a[1]);
            let mut p = vec![x1 - shift, x2, x3];
            p.extend(std::iter::repeat_n(0.0, TORUS_NOISE_DIMS));
            if noise > 0.0 {
                p.iter_mut().for_each(|v| *v += normal.sample(rng));
            }
            p
        })
        .collect();
    Ok((points, angles))
}

fn three_torus_point(t: [f64; 3]) -> Vec<f64> {
    let a = 4.0 + (2.0 + t[0].cos()) * t[1].cos();
    vec![a * t[2].cos(), a * t[2].sin(), (2.0 + t[0].cos()) * t[1].sin(), t[0].sin()]
}

/// `((x1² + x2²)² - 0.75 x1² + 0.75 x2²)`; the surface is `F² + x3² = 0.01`.
pub fn genus2_f(x1: f64, x2: f64) -> f64 {
    let r2 = x1 * x1 + x2 * x2;
    r2 * r2 - 0.75 * x1 * x1 + 0.75 * x2 * x2
}

fn genus2_dense() -> Vec<Vec<f64>> {
    // |F| <= 0.1 confines the surface to |x1| < 0.95 and |x2| < 0.5
    let (ax, ay) = (0.95, 0.5);
    let g = GENUS2_GRID;
    let mut pts = Vec::new();
    for i in 0..g {
        let x1 = -ax + 2.0 * ax * i as f64 / (g - 1) as f64;
        for j in 0..g {
            let x2 = -ay + 2.0 * ay * j as f64 / (g - 1) as f64;
            let f = genus2_f(x1, x2);
            let rem = 0.01 - f * f;
            if rem < 0.0 {
                continue;
            }
            let x3 = rem.sqrt();
            pts.push(vec![x1, x2, x3]);
            if x3 > 0.0 {
                pts.push(vec![x1, x2, -x3]);
            }
        }
    }
    pts
}

/// Geometry of the punctured-plane pair: two unit squares with centered
/// square holes of side 1/3. Each square grows a tab of length
/// `bridge_length` and height `bridge_height` toward the other, and the
/// tabs are separated by a slit, `slit` lattice spacings wide, that the
/// neighborhood graph bridges sparsely.
///
/// Tabs are sampled on a square lattice at `bridge_density` times the
/// density of the squares. A random tab would leave the few points at its
/// tip with erratic k-NN radii, and those points alone decide how much the
/// two sides see of each other.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PunctPlaneShape {
    pub bridge_length: f64,
    pub bridge_height: f64,
    pub bridge_density: f64,
    pub slit: f64,
}

impl Default for PunctPlaneShape {
    fn default() -> Self {
        Self { bridge_length: 0.3, bridge_height: 0.5, bridge_density: 1.0, slit: 3.6 }
    }
}

fn in_hole(x: f64, y: f64) -> bool {
    (1.0 / 3.0..2.0 / 3.0).contains(&x) && (1.0 / 3.0..2.0 / 3.0).contains(&y)
}

/// Tab lattice in the local frame (square on `[0, 1]`, tab tip at
/// `1 + len`) and its spacing.
fn tab_lattice(n: usize, shape: &PunctPlaneShape) -> (Vec<(f64, f64)>, f64) {
    let plane_area = 1.0 - 1.0 / 9.0;
    let side_area = plane_area + shape.bridge_length * shape.bridge_height * shape.bridge_density;
    let plane_density = n as f64 / (2.0 * side_area);
    let a = 1.0 / (shape.bridge_density * plane_density).sqrt();
    let cols = ((shape.bridge_length / a).round() as usize).max(1);
    let rows = (shape.bridge_height / a).floor() as usize + 1;
    let mut out = Vec::with_capacity(cols * rows);
    for i in 0..cols {
        for j in 0..rows {
            let y = 0.5 + (j as f64 - (rows - 1) as f64 / 2.0) * a;
            out.push((1.0 + shape.bridge_length - i as f64 * a, y));
        }
    }
    (out, a)
}

/// Samples the punctured-plane pair. Points are labelled by the side of
/// the slit they lie on.
pub fn punctplane(n: usize, noise: f64, shape: PunctPlaneShape, seed: u64) -> Result<SynthData> {
    let PunctPlaneShape { bridge_length: len, bridge_height: h, bridge_density: dens, slit } = shape;
    if !(len > 0.0 && h > 0.0 && h <= 1.0 && dens > 0.0 && slit >= 0.0) {
        return Err(Error::Parameter("invalid punctured-plane shape".into()));
    }
    let (tab, spacing) = tab_lattice(n, &shape);
    if 2 * tab.len() >= n {
        return Err(Error::Parameter(format!("{n} points cannot cover the bridge lattice")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise.max(0.0)).map_err(|e| Error::Parameter(e.to_string()))?;
    let offset = 1.0 + 2.0 * len + slit * spacing;
    let n_plane = n - 2 * tab.len();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for label in 0..2usize {
        let count = n_plane / 2 + usize::from(label == 0) * (n_plane % 2);
        let local = tab.iter().copied().chain((0..count).map(|_| loop {
            let (x, y): (f64, f64) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            if !in_hole(x, y) {
                break (x, y);
            }
        }));
        for (x, y) in local.collect::<Vec<_>>() {
            let x = if label == 0 { x } else { offset + 1.0 - x };
            let (nx, ny) = if noise > 0.0 { (normal.sample(&mut rng), normal.sample(&mut rng)) } else { (0.0, 0.0) };
            labels.push(label);
            points.push(vec![x + nx, y + ny]);
        }
    }
    Ok(SynthData {
        manifold: Manifold::PunctPlane,
        cloud: PointCloud::new(points)?,
        beta1: 2,
        labels: Some(labels),
        angles: None,
    })
}

/// Samples one of the built-in manifolds.
pub fn synth_manifold(manifold: Manifold, n: usize, noise: f64, seed: u64) -> Result<SynthData> {
    if n < 100 {
        return Err(Error::Parameter(format!("n = {n} is below the minimum of 100")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Parameter(format!("noise = {noise} must be a nonnegative real")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta1 = manifold.beta1();
    match manifold {
        Manifold::Torus => {
            let (points, angles) = noisy_torus(n, noise, 0.0, &mut rng)?;
            Ok(SynthData { manifold, cloud: PointCloud::new(points)?, beta1, labels: None, angles: Some(angles) })
        }
        Manifold::ToriConcat => {
            let mut points = Vec::with_capacity(n);
            let mut angles = Vec::with_capacity(n);
            let mut labels = Vec::with_capacity(n);
            for (i, a) in [-3.0, 0.0, 3.0, 6.0].into_iter().enumerate() {
                let m = n / 4 + usize::from(i < n % 4);
                let (p, t) = noisy_torus(m, noise, a, &mut rng)?;
                points.extend(p);
                angles.extend(t);
                labels.extend(std::iter::repeat_n(i, m));
            }
            Ok(SynthData { manifold, cloud: PointCloud::new(points)?, beta1, labels: Some(labels), angles: Some(angles) })
        }
        Manifold::ThreeTorus => {
            let normal = Normal::new(0.0, noise).map_err(|e| Error::Parameter(e.to_string()))?;
            let dense_n = THREE_TORUS_DENSE.max(n);
            let angles: Vec<[f64; 3]> = (0..dense_n)
                .map(|_| [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)])
                .collect();
            let dense = PointCloud::new(angles.iter().map(|&t| three_torus_point(t)).collect())?;
            let pick = furthest_point_sample(&dense, n, seed)?;
            let points = pick
                .iter()
                .map(|&i| {
                    let mut p = dense.point(i).to_vec();
                    if noise > 0.0 {
                        p.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
                    }
                    p
                })
                .collect();
            let angles = pick.iter().map(|&i| angles[i].to_vec()).collect();
            Ok(SynthData { manifold, cloud: PointCloud::new(points)?, beta1, labels: None, angles: Some(angles) })
        }
        Manifold::Genus2 => {
            let dense = PointCloud::new(genus2_dense())?;
            let pick = furthest_point_sample(&dense, n, seed)?;
            let normal = Normal::new(0.0, noise).map_err(|e| Error::Parameter(e.to_string()))?;
            let mut labels = Vec::with_capacity(n);
            let points = pick
                .iter()
                .map(|&i| {
                    let mut p = dense.point(i).to_vec();
                    labels.push(usize::from(p[0] >= 0.0));
                    if noise > 0.0 {
                        p.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
                    }
                    p
                })
                .collect();
            Ok(SynthData { manifold, cloud: PointCloud::new(points)?, beta1, labels: Some(labels), angles: None })
        }
        Manifold::PunctPlane => punctplane(n, noise, PunctPlaneShape::default(), seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_torus_satisfies_parameterization() {
        let d = synth_manifold(Manifold::Torus, 144, 0.0, 1).unwrap();
        assert_eq!(d.cloud.dim(), 3 + TORUS_NOISE_DIMS);
        for (p, a) in d.cloud.points().zip(d.angles.as_ref().unwrap()) {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            assert!(((r - 1.0).powi(2) + (p[2] - 1.0).powi(2) - 0.25).abs() < 1e-12);
            assert!((r - (1.0 + 0.5 * a[0].cos())).abs() < 1e-12);
            assert!(p[3..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn ground_truth_betti() {
        assert_eq!(Manifold::ToriConcat.beta1(), 8);
        assert_eq!(Manifold::Genus2.beta1(), 4);
        assert_eq!("three-torus".parse::<Manifold>().unwrap(), Manifold::ThreeTorus);
    }

    #[test]
    fn genus2_box_contains_surface() {
        // the sampling box must not clip the surface
        for k in 0..=400 {
            let t = k as f64 / 400.0;
            assert!(genus2_f(0.95, -0.5 + t).abs() > 0.1);
            assert!(genus2_f(-0.95 + 1.9 * t, 0.5).abs() > 0.1);
        }
    }

    #[test]
    fn punctplane_labels_and_holes() {
        let shape = PunctPlaneShape::default();
        let d = punctplane(500, 0.0, shape, 2).unwrap();
        let spacing = tab_lattice(500, &shape).1;
        let mid = 1.0 + shape.bridge_length + shape.slit * spacing / 2.0;
        let offset = 1.0 + 2.0 * shape.bridge_length + shape.slit * spacing;
        for (p, &l) in d.cloud.points().zip(d.labels.as_ref().unwrap()) {
            assert_eq!(l, usize::from(p[0] > mid));
            assert!((p[0] - mid).abs() >= shape.slit * spacing / 2.0 - 1e-12);
            let x = if l == 0 { p[0] } else { offset + 1.0 - p[0] };
            assert!(!in_hole(x, p[1]));
            if x > 1.0 {
                assert!((p[1] - 0.5).abs() <= shape.bridge_height / 2.0 + 1e-12);
            }
        }
        assert!(synth_manifold(Manifold::Torus, 50, 0.0, 0).is_err());
    }
}
