//! The end-to-end chain: complex, Hodge Laplacian, harmonic basis,
//! ICA unmixing and loop extraction.

use nalgebra::DMatrix;

use crate::boundary::boundary_maps;
use crate::complex::{Complex2, PointCloud};
use crate::error::Result;
use crate::hodge::{HodgeSystem, WeightOptions, WeightSeed, WeightVector};
use crate::ica::{ica_no_prewhite, IcaOptions, UnmixingResult};
use crate::loops::{shortest_homologous_loops, LoopOptions, LoopResult};
use crate::nullspace::{harmonic_basis, HomologyBasis, NullspaceOptions};
use crate::perturb::point_cloud_complex;

#[derive(Debug, Clone)]
pub struct Embedding {
    pub system: HodgeSystem,
    pub basis: HomologyBasis,
}

/// Weighted `L_1` of a complex. Without 2-cells the edges get unit weight.
pub fn edge_laplacian(complex: &Complex2, w2: Option<&[f64]>, opts: &WeightOptions) -> Result<HodgeSystem> {
    let (b1, b2) = boundary_maps(complex, 1)?;
    let seed = if complex.n2() > 0 {
        let w = w2.map_or_else(|| vec![1.0; complex.n2()], <[f64]>::to_vec);
        WeightSeed::Top(WeightVector::new(2, w)?)
    } else {
        WeightSeed::Middle(WeightVector::constant(1, complex.n1(), 1.0))
    };
    HodgeSystem::assemble(1, &b1, &b2, seed, complex.kind(), opts)
}

pub fn embed(complex: &Complex2, w2: Option<&[f64]>, weights: &WeightOptions, ns: &NullspaceOptions) -> Result<Embedding> {
    let system = edge_laplacian(complex, w2, weights)?;
    let mut ns = *ns;
    if ns.eigen.upper_bound.is_none() {
        ns.eigen.upper_bound = Some(system.spectral_norm_upper());
    }
    let basis = harmonic_basis(system.laplacian(), &ns)?;
    Ok(Embedding { system, basis })
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub complex: Complex2,
    pub w2: Vec<f64>,
    pub embedding: Embedding,
    pub unmixing: Option<UnmixingResult>,
    pub loops: Vec<LoopResult>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineOptions {
    pub weights: WeightOptions,
    pub nullspace: NullspaceOptions,
    pub ica: IcaOptions,
    pub loops: LoopOptions,
}

/// Runs the loop stages on an existing embedding. With `β = 0` there is
/// nothing to unmix and no loops are returned.
pub fn unmix_and_loops(complex: &Complex2, dist: &[f64], basis: &DMatrix<f64>, opts: &PipelineOptions) -> Result<(Option<UnmixingResult>, Vec<LoopResult>)> {
    if basis.ncols() == 0 {
        return Ok((None, Vec::new()));
    }
    let unmixing = ica_no_prewhite(basis, &opts.ica)?;
    let loops = shortest_homologous_loops(&unmixing.z, complex.n0(), complex.edges(), dist, &opts.loops)?;
    Ok((Some(unmixing), loops))
}

/// CkNN clique complex of a point cloud through to loops.
pub fn run_point_cloud(cloud: &PointCloud, k: usize, delta: f64, opts: &PipelineOptions) -> Result<PipelineResult> {
    let wc = point_cloud_complex(cloud, k, delta)?;
    let embedding = embed(&wc.complex, Some(&wc.w2), &opts.weights, &opts.nullspace)?;
    let dist = wc.complex.edge_lengths(cloud)?;
    let (unmixing, loops) = unmix_and_loops(&wc.complex, &dist, &embedding.basis.matrix, opts)?;
    Ok(PipelineResult { complex: wc.complex, w2: wc.w2, embedding, unmixing, loops })
}
