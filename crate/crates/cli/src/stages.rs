use std::path::Path;

use hodgeloop::boundary::{boundary_maps, graph_boundary_maps};
use hodgeloop::complex::{cubical_complex, furthest_point_sample};
use hodgeloop::hodge::propagate_weights;
use hodgeloop::ica::{ica_no_prewhite, IcaOptions, UnmixingResult};
use hodgeloop::io::{
    atomic_write, atomic_write_with, read_csv_column, read_csv_matrix, read_csv_rows, read_pgm, to_json_string, write_csv_column,
    write_csv_matrix, ComplexFile, FORMAT_VERSION,
};
use hodgeloop::loops::{shortest_homologous_loops, LoopOptions, LoopResult, LoopVariant};
use hodgeloop::nullspace::NullspaceOptions;
use hodgeloop::perturb::{perturb_check, point_cloud_complex, Bandwidth, Manifold, PerturbOptions, PerturbReport};
use hodgeloop::pipeline::{edge_laplacian, embed, Embedding};
use hodgeloop::{Complex2, Error, HodgeSystem, PointCloud, Result, WeightOptions, WeightSeed, WeightVector};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::{
    BandwidthArg, BuildArgs, EmbedArgs, ExportArgs, FpsArgs, IcaArgs, IcaFlags, InputArgs, LoopsArgs, PerturbArgs, RunAllArgs,
    SpectralArgs, Variant,
};

fn read_input(path: &Path, manifest: &mut RunManifest) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path).map_err(|e| Error::Input(format!("cannot read '{}': {e}", path.display())))?;
    manifest.record_input(path, &bytes);
    Ok(bytes)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T, manifest: &mut RunManifest) -> Result<()> {
    atomic_write(&dir.join(name), to_json_string(value)?.as_bytes())?;
    manifest.record_output(name);
    Ok(())
}

fn write_matrix(dir: &Path, name: &str, m: &DMatrix<f64>, manifest: &mut RunManifest) -> Result<()> {
    // a matrix without columns is an empty file rather than rows of nothing
    if m.ncols() == 0 {
        atomic_write(&dir.join(name), b"")?;
    } else {
        atomic_write_with(&dir.join(name), |buf| write_csv_matrix(buf, m))?;
    }
    manifest.record_output(name);
    Ok(())
}

fn write_column(dir: &Path, name: &str, v: &[f64], manifest: &mut RunManifest) -> Result<()> {
    atomic_write_with(&dir.join(name), |buf| write_csv_column(buf, v))?;
    manifest.record_output(name);
    Ok(())
}

fn read_complex(path: &Path, manifest: &mut RunManifest) -> Result<(Complex2, Option<Vec<f64>>)> {
    let bytes = read_input(path, manifest)?;
    let file: ComplexFile = serde_json::from_slice(&bytes).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    Ok((file.to_complex()?, file.w2))
}

fn read_matrix(path: &Path, manifest: &mut RunManifest) -> Result<DMatrix<f64>> {
    read_csv_matrix(&read_input(path, manifest)?[..], false)
}

pub struct Built {
    pub complex: Complex2,
    pub w2: Option<Vec<f64>>,
    pub dist: Vec<f64>,
}

fn build(input: &InputArgs, seed: u64, manifest: &mut RunManifest) -> Result<Built> {
    let bytes = read_input(&input.input, manifest)?;
    let is_image = input.image || input.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_image {
        let img = read_pgm(&bytes[..])?;
        let ic = cubical_complex(&img, input.threshold, input.closing_radius, input.invert)?;
        let dist = match &ic.coords {
            Some(c) => ic.complex.edge_lengths(c)?,
            None => Vec::new(),
        };
        log::info!("image complex: {} vertices, {} edges, {} squares", ic.complex.n0(), ic.complex.n1(), ic.complex.n2());
        return Ok(Built { complex: ic.complex, w2: None, dist });
    }
    let delta = input.delta.ok_or_else(|| Error::Parameter("--delta is required for point clouds".into()))?;
    let mut cloud = PointCloud::new(read_csv_rows(&bytes[..], input.header)?)?;
    if let Some(n) = input.fps {
        manifest.seeds.insert("fps".into(), seed);
        cloud = cloud.subset(&furthest_point_sample(&cloud, n, seed)?);
    }
    let wc = point_cloud_complex(&cloud, input.knn, delta)?;
    let dist = wc.complex.edge_lengths(&cloud)?;
    log::info!("clique complex: {} vertices, {} edges, {} triangles", wc.complex.n0(), wc.complex.n1(), wc.complex.n2());
    Ok(Built { complex: wc.complex, w2: Some(wc.w2), dist })
}

fn write_built(b: &Built, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    write_json(out, "complex.json", &ComplexFile::new(&b.complex, b.w2.clone()), manifest)?;
    write_column(out, "distances.csv", &b.dist, manifest)
}

pub fn build_complex_cmd(a: &BuildArgs, manifest: &mut RunManifest) -> Result<()> {
    let b = build(&a.input, a.seed, manifest)?;
    write_built(&b, &a.out, manifest)
}

#[derive(Serialize)]
struct EmbedSidecar {
    format_version: u32,
    beta: usize,
    eigenvalues: Vec<f64>,
    residuals: Vec<f64>,
    spectrum: Vec<f64>,
    gap_ratio: Option<f64>,
    floored_cells: [usize; 2],
}

fn nullspace_options(s: &SpectralArgs, seed: u64) -> NullspaceOptions {
    let mut ns = NullspaceOptions { zero_tol: s.zero_tol, gap_factor: s.gap_factor, ..Default::default() };
    ns.eigen.seed = seed;
    ns
}

fn run_embed(complex: &Complex2, w2: Option<&[f64]>, s: &SpectralArgs, seed: u64, out: &Path, manifest: &mut RunManifest) -> Result<Embedding> {
    manifest.seeds.insert("eigensolver".into(), seed);
    let emb = embed(complex, w2, &WeightOptions::default(), &nullspace_options(s, seed))?;
    let b = &emb.basis;
    log::info!("beta_1 = {}", b.beta());
    let ratio = b.gap_ratio(s.zero_tol);
    let sidecar = EmbedSidecar {
        format_version: FORMAT_VERSION,
        beta: b.beta(),
        eigenvalues: b.eigenvalues.clone(),
        residuals: b.residuals.clone(),
        spectrum: b.spectrum.clone(),
        gap_ratio: ratio.is_finite().then_some(ratio),
        floored_cells: emb.system.floored_counts(),
    };
    write_matrix(out, "Y.csv", &b.matrix, manifest)?;
    write_json(out, "embed.json", &sidecar, manifest)?;
    Ok(emb)
}

pub fn embed_cmd(a: &EmbedArgs, manifest: &mut RunManifest) -> Result<()> {
    let (complex, w2) = read_complex(&a.complex, manifest)?;
    run_embed(&complex, w2.as_deref(), &a.spectral, a.seed, &a.out, manifest).map(|_| ())
}

#[derive(Serialize)]
struct IcaSidecar {
    format_version: u32,
    unmix: Vec<Vec<f64>>,
    iterations: usize,
    converged: bool,
    last_update: f64,
    condition: f64,
    /// `|L z_i|` per column, when the Laplacian is known.
    column_residuals: Option<Vec<f64>>,
}

fn run_ica(y: &DMatrix<f64>, flags: &IcaFlags, seed: u64, system: Option<&HodgeSystem>, out: &Path, manifest: &mut RunManifest) -> Result<DMatrix<f64>> {
    if y.ncols() == 0 {
        log::info!("beta = 0, nothing to unmix");
        let sidecar = IcaSidecar {
            format_version: FORMAT_VERSION,
            unmix: Vec::new(),
            iterations: 0,
            converged: true,
            last_update: 0.0,
            condition: 1.0,
            column_residuals: system.map(|_| Vec::new()),
        };
        write_matrix(out, "Z.csv", y, manifest)?;
        write_json(out, "ica.json", &sidecar, manifest)?;
        return Ok(y.clone());
    }
    manifest.seeds.insert("ica".into(), seed);
    let opts = IcaOptions { lr: flags.lr, max_iter: flags.max_iter, conv_tol: flags.conv_tol, seed, ..Default::default() };
    let UnmixingResult { z, unmix, iterations, converged, last_update, condition } = ica_no_prewhite(y, &opts)?;
    let column_residuals = match system {
        Some(sys) if sys.dim() == z.nrows() => {
            let lz = sys.laplacian().mul_dense(&z);
            Some(lz.column_iter().map(|c| c.norm()).collect())
        }
        Some(sys) => {
            return Err(Error::Dimension(format!("Z has {} rows but the complex has {} edges", z.nrows(), sys.dim())));
        }
        None => None,
    };
    let sidecar = IcaSidecar {
        format_version: FORMAT_VERSION,
        unmix: unmix.row_iter().map(|r| r.iter().copied().collect()).collect(),
        iterations,
        converged,
        last_update,
        condition,
        column_residuals,
    };
    write_matrix(out, "Z.csv", &z, manifest)?;
    write_json(out, "ica.json", &sidecar, manifest)?;
    Ok(z)
}

pub fn ica_cmd(a: &IcaArgs, manifest: &mut RunManifest) -> Result<()> {
    let y = read_matrix(&a.y, manifest)?;
    let system = match &a.complex {
        Some(p) => {
            let (complex, w2) = read_complex(p, manifest)?;
            Some(edge_laplacian(&complex, w2.as_deref(), &WeightOptions::default())?)
        }
        None => None,
    };
    run_ica(&y, &a.ica, a.seed, system.as_ref(), &a.out, manifest).map(|_| ())
}

#[derive(Serialize)]
struct LoopsFile<'a> {
    format_version: u32,
    loops: &'a [LoopResult],
}

fn run_loops(z: &DMatrix<f64>, complex: &Complex2, dist: &[f64], variant: Variant, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let loops = if z.ncols() == 0 {
        Vec::new()
    } else {
        let variant = match variant {
            Variant::Exhaustive => LoopVariant::Exhaustive,
            Variant::Maxedge => LoopVariant::MaxEdge,
        };
        shortest_homologous_loops(z, complex.n0(), complex.edges(), dist, &LoopOptions { variant, ..Default::default() })?
    };
    for l in &loops {
        log::info!("class {}: {} arcs, length {:.4}, integral {:.3e}", l.class, l.cycle.len() - 1, l.length, l.path_integral);
    }
    write_json(out, "loops.json", &LoopsFile { format_version: FORMAT_VERSION, loops: &loops }, manifest)
}

pub fn loops_cmd(a: &LoopsArgs, manifest: &mut RunManifest) -> Result<()> {
    let z = read_matrix(&a.z, manifest)?;
    let (complex, _) = read_complex(&a.complex, manifest)?;
    let dist = read_csv_column(&read_input(&a.dist, manifest)?[..], false)?;
    run_loops(&z, &complex, &dist, a.variant, &a.out, manifest)
}

pub fn run_all_cmd(a: &RunAllArgs, manifest: &mut RunManifest) -> Result<()> {
    let b = build(&a.input, a.seed, manifest)?;
    write_built(&b, &a.out, manifest)?;
    let emb = run_embed(&b.complex, b.w2.as_deref(), &a.spectral, a.seed, &a.out, manifest)?;
    let z = run_ica(&emb.basis.matrix, &a.ica, a.seed, Some(&emb.system), &a.out, manifest)?;
    run_loops(&z, &b.complex, &b.dist, a.variant, &a.out, manifest)
}

#[derive(Serialize)]
struct PerturbFile<'a> {
    format_version: u32,
    reports: &'a [PerturbReport],
}

const PERTURB_COLUMNS: [&str; 17] = [
    "seed", "n", "eps1", "eps0", "epsp1", "epsp0", "min_eigengap", "lambda_k", "diff_down", "diff_up", "cap_down", "cap_up",
    "caps_met", "lhs", "rhs", "bound_holds", "beta",
];

fn perturb_row(r: &PerturbReport) -> Vec<String> {
    let f = hodgeloop::io::fmt_f64;
    let gap = r.eigengaps.iter().copied().fold(f64::INFINITY, f64::min);
    vec![
        r.seed.to_string(),
        r.n.to_string(),
        f(r.eps_k),
        f(r.eps_km1),
        f(r.epsp_k),
        f(r.epsp_km1),
        f(gap),
        f(r.lambda_k),
        f(r.diff_down_norm),
        f(r.diff_up_norm),
        f(r.cap_down),
        f(r.cap_up),
        r.caps_met.to_string(),
        f(r.lhs),
        f(r.rhs),
        r.bound_holds.to_string(),
        r.beta_glued.to_string(),
    ]
}

pub fn perturb_cmd(a: &PerturbArgs, manifest: &mut RunManifest) -> Result<()> {
    let manifold: Manifold = a.manifold.parse()?;
    let bandwidth = match a.bandwidth {
        BandwidthArg::Glued => Bandwidth::Glued,
        BandwidthArg::PerPart => Bandwidth::PerPart,
    };
    let opts = PerturbOptions { k_nn: a.knn, delta: a.delta, bandwidth, ..Default::default() };
    let mut reports = Vec::new();
    for seed in a.seed..a.seed + a.repeats.max(1) {
        manifest.seeds.insert(format!("instance_{}", seed - a.seed), seed);
        let r = perturb_check(manifold, a.n, a.noise, seed, &opts)?;
        log::info!("seed {seed}: eps1 {:.4} eps0 {:.4} lhs {:.3e} rhs {:.3e} caps met {}", r.eps_k, r.eps_km1, r.lhs, r.rhs, r.caps_met);
        reports.push(r);
    }
    write_json(&a.out, "perturb.json", &PerturbFile { format_version: FORMAT_VERSION, reports: &reports }, manifest)?;
    let mut text = PERTURB_COLUMNS.join(",");
    text.push('\n');
    for r in &reports {
        text.push_str(&perturb_row(r).join(","));
        text.push('\n');
    }
    atomic_write(&a.out.join("perturb.csv"), text.as_bytes())?;
    manifest.record_output("perturb.csv");
    Ok(())
}

fn check_k(k: usize) -> Result<()> {
    if k > 1 {
        return Err(Error::UnsupportedDimension(k));
    }
    Ok(())
}

pub fn export_boundary_cmd(a: &ExportArgs, manifest: &mut RunManifest) -> Result<()> {
    check_k(a.k)?;
    let (complex, _) = read_complex(&a.complex, manifest)?;
    let (bk, bk1) = if a.k == 0 { graph_boundary_maps(&complex) } else { boundary_maps(&complex, 1)? };
    for (name, b) in [(format!("B{}.mtx", a.k), bk), (format!("B{}.mtx", a.k + 1), bk1)] {
        atomic_write_with(&a.out.join(&name), |buf| b.write_matrix_market(buf))?;
        manifest.record_output(&name);
    }
    Ok(())
}

pub fn export_laplacian_cmd(a: &ExportArgs, manifest: &mut RunManifest) -> Result<()> {
    check_k(a.k)?;
    let (complex, w2) = read_complex(&a.complex, manifest)?;
    let opts = WeightOptions::default();
    let sys = if a.k == 1 {
        edge_laplacian(&complex, w2.as_deref(), &opts)?
    } else {
        // vertex Laplacian seeded with the edge weights the 2-cells induce
        let w1 = if complex.n2() > 0 {
            let (_, b2) = boundary_maps(&complex, 1)?;
            let w2 = WeightVector::new(2, w2.unwrap_or_else(|| vec![1.0; complex.n2()]))?;
            propagate_weights(&b2, &w2, &opts)?.0
        } else {
            WeightVector::constant(1, complex.n1(), 1.0)
        };
        let (b0, b1) = graph_boundary_maps(&complex);
        HodgeSystem::assemble(0, &b0, &b1, WeightSeed::Top(w1), complex.kind(), &opts)?
    };
    let name = format!("L{}.mtx", a.k);
    atomic_write_with(&a.out.join(&name), |buf| sys.laplacian().write_matrix_market(buf, false))?;
    manifest.record_output(&name);
    let levels = [(a.k.checked_sub(1), sys.w_km1()), (Some(a.k), sys.w_k()), (Some(a.k + 1), sys.w_k1())];
    for (level, w) in levels {
        if let Some(l) = level {
            write_column(&a.out, &format!("w{l}.csv"), w.values(), manifest)?;
        }
    }
    Ok(())
}

pub fn fps_cmd(a: &FpsArgs, manifest: &mut RunManifest) -> Result<()> {
    let cloud = PointCloud::new(read_csv_rows(&read_input(&a.input, manifest)?[..], a.header)?)?;
    manifest.seeds.insert("fps".into(), a.seed);
    let idx = furthest_point_sample(&cloud, a.n, a.seed)?;
    let text: String = idx.iter().map(|i| format!("{i}\n")).collect();
    atomic_write(&a.out.join("fps_indices.csv"), text.as_bytes())?;
    manifest.record_output("fps_indices.csv");
    let pts = cloud.subset(&idx);
    let m = DMatrix::from_fn(pts.len(), pts.dim(), |r, c| pts.point(r)[c]);
    write_matrix(&a.out, "fps_points.csv", &m, manifest)
}
