//! Homology embeddings from weighted Hodge Laplacians.
//!
//! The pipeline goes point cloud or image → 2-complex → boundary maps →
//! normalized Hodge Laplacian → harmonic basis → independent basis via
//! Infomax ICA → shortest homologous loops. `perturb` holds the synthetic
//! manifolds and the connected-sum perturbation diagnostics.

pub mod boundary;
pub mod complex;
pub mod error;
pub mod hodge;
pub mod ica;
pub mod io;
pub mod loops;
pub mod nullspace;
pub mod perturb;
pub mod pipeline;
pub mod sparse;

pub use boundary::{boundary_maps, BoundaryMatrix};
pub use complex::{Complex2, ComplexKind, GrayImage, NeighborhoodGraph, PointCloud};
pub use error::{Error, Result};
pub use hodge::{HodgeSystem, WeightFloor, WeightOptions, WeightSeed, WeightVector};
pub use nullspace::{estimate_betti, harmonic_basis, smallest_eigenpairs, HomologyBasis};
pub use sparse::SparseMatrix;
