//! Python bindings. Matrices cross the boundary as lists of rows.

use hodgeloop::complex::{cubical_from_mask as build_cubical, furthest_point_sample as fps};
use hodgeloop::ica::{ica_no_prewhite, IcaOptions};
use hodgeloop::io::ComplexFile;
use hodgeloop::loops::{shortest_homologous_loops, LoopOptions, LoopResult, LoopVariant};
use hodgeloop::nullspace::NullspaceOptions;
use hodgeloop::perturb::{self, Manifold, PerturbOptions};
use hodgeloop::pipeline::{self, PipelineOptions};
use hodgeloop::{Complex2, ComplexKind, Error, PointCloud, WeightOptions};
use nalgebra::DMatrix;
use pyo3::conversion::IntoPyObjectExt;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

create_exception!(hodgeloop, HodgeloopError, PyException);
create_exception!(hodgeloop, AmbiguousBettiError, HodgeloopError);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::AmbiguousBetti { .. } => AmbiguousBettiError::new_err(e.to_string()),
        _ => HodgeloopError::new_err(e.to_string()),
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(HodgeloopError::new_err("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

fn json_to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_bound_py_any(py),
            None => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

fn loops_to_py<'py>(py: Python<'py>, loops: &[LoopResult]) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &serde_json::to_value(loops).map_err(|e| HodgeloopError::new_err(e.to_string()))?)
}

/// A 2-complex: vertices, sorted edges and triangles or squares.
#[pyclass(name = "Complex", frozen, module = "hodgeloop")]
struct PyComplex {
    inner: Complex2,
}

#[pymethods]
impl PyComplex {
    #[new]
    #[pyo3(signature = (kind, n_vertices, edges, cells=Vec::new()))]
    fn new(kind: &str, n_vertices: usize, edges: Vec<[usize; 2]>, cells: Vec<Vec<usize>>) -> PyResult<Self> {
        let kind = match kind {
            "simplicial" => ComplexKind::Simplicial,
            "cubical" => ComplexKind::Cubical,
            other => return Err(HodgeloopError::new_err(format!("unknown kind '{other}'"))),
        };
        Ok(Self { inner: Complex2::new(kind, n_vertices, edges, cells).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: ComplexFile = serde_json::from_str(text).map_err(|e| HodgeloopError::new_err(e.to_string()))?;
        Ok(Self { inner: file.to_complex().map_err(to_py)? })
    }

    fn to_json(&self) -> PyResult<String> {
        ComplexFile::new(&self.inner, None).to_json().map_err(to_py)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind().as_str()
    }

    #[getter]
    fn n0(&self) -> usize {
        self.inner.n0()
    }

    #[getter]
    fn n1(&self) -> usize {
        self.inner.n1()
    }

    #[getter]
    fn n2(&self) -> usize {
        self.inner.n2()
    }

    #[getter]
    fn edges(&self) -> Vec<[usize; 2]> {
        self.inner.edges().to_vec()
    }

    #[getter]
    fn cells(&self) -> Vec<Vec<usize>> {
        self.inner.cells().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("Complex({}, n0={}, n1={}, n2={})", self.kind(), self.n0(), self.n1(), self.n2())
    }
}

/// CkNN clique complex of a point cloud with its triangle weights.
#[pyfunction]
#[pyo3(signature = (points, delta, knn=30))]
fn point_cloud_complex(points: Vec<Vec<f64>>, delta: f64, knn: usize) -> PyResult<(PyComplex, Vec<f64>)> {
    let cloud = PointCloud::new(points).map_err(to_py)?;
    let wc = perturb::point_cloud_complex(&cloud, knn, delta).map_err(to_py)?;
    Ok((PyComplex { inner: wc.complex }, wc.w2))
}

/// Cubical complex of a boolean image given as rows.
#[pyfunction]
fn cubical_from_mask(mask: Vec<Vec<bool>>) -> PyResult<PyComplex> {
    let width = mask.first().map_or(0, Vec::len);
    if mask.iter().any(|r| r.len() != width) {
        return Err(HodgeloopError::new_err("ragged mask rows"));
    }
    let flat: Vec<bool> = mask.concat();
    Ok(PyComplex { inner: build_cubical(&flat, width, mask.len()).complex })
}

/// Harmonic basis of the edge Laplacian: `{"Y", "beta", "eigenvalues", "spectrum"}`.
#[pyfunction]
#[pyo3(signature = (complex, w2=None, zero_tol=1e-8, gap_factor=100.0, seed=0))]
fn embed<'py>(
    py: Python<'py>,
    complex: &PyComplex,
    w2: Option<Vec<f64>>,
    zero_tol: f64,
    gap_factor: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mut ns = NullspaceOptions { zero_tol, gap_factor, ..Default::default() };
    ns.eigen.seed = seed;
    let emb = py
        .detach(|| pipeline::embed(&complex.inner, w2.as_deref(), &WeightOptions::default(), &ns))
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("Y", rows(&emb.basis.matrix))?;
    out.set_item("beta", emb.basis.beta())?;
    out.set_item("eigenvalues", emb.basis.eigenvalues.clone())?;
    out.set_item("spectrum", emb.basis.spectrum.clone())?;
    Ok(out)
}

/// Unmixes `Y` into `Z = Y @ unmix`: `{"Z", "unmix", "iterations", "converged"}`.
#[pyfunction]
#[pyo3(signature = (y, lr=0.01, max_iter=10_000, conv_tol=1e-7, seed=0))]
fn ica<'py>(py: Python<'py>, y: Vec<Vec<f64>>, lr: f64, max_iter: usize, conv_tol: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let y = matrix(&y)?;
    let opts = IcaOptions { lr, max_iter, conv_tol, seed, ..Default::default() };
    let res = py.detach(|| ica_no_prewhite(&y, &opts)).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("Z", rows(&res.z))?;
    out.set_item("unmix", rows(&res.unmix))?;
    out.set_item("iterations", res.iterations)?;
    out.set_item("converged", res.converged)?;
    Ok(out)
}

/// One shortest homologous loop per column of `Z`.
#[pyfunction]
#[pyo3(signature = (z, complex, dist, variant="exhaustive"))]
fn shortest_loops<'py>(py: Python<'py>, z: Vec<Vec<f64>>, complex: &PyComplex, dist: Vec<f64>, variant: &str) -> PyResult<Bound<'py, PyAny>> {
    let variant = match variant {
        "exhaustive" => LoopVariant::Exhaustive,
        "maxedge" => LoopVariant::MaxEdge,
        other => return Err(HodgeloopError::new_err(format!("unknown variant '{other}'"))),
    };
    let z = matrix(&z)?;
    let cx = &complex.inner;
    let loops = py
        .detach(|| shortest_homologous_loops(&z, cx.n0(), cx.edges(), &dist, &LoopOptions { variant, ..Default::default() }))
        .map_err(to_py)?;
    loops_to_py(py, &loops)
}

/// Point cloud to loops in one call.
#[pyfunction]
#[pyo3(signature = (points, delta, knn=30))]
fn run_point_cloud<'py>(py: Python<'py>, points: Vec<Vec<f64>>, delta: f64, knn: usize) -> PyResult<Bound<'py, PyDict>> {
    let cloud = PointCloud::new(points).map_err(to_py)?;
    let res = py.detach(|| pipeline::run_point_cloud(&cloud, knn, delta, &PipelineOptions::default())).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("beta", res.embedding.basis.beta())?;
    out.set_item("Y", rows(&res.embedding.basis.matrix))?;
    out.set_item("Z", res.unmixing.as_ref().map(|u| rows(&u.z)))?;
    out.set_item("loops", loops_to_py(py, &res.loops)?)?;
    out.set_item("complex", Bound::new(py, PyComplex { inner: res.complex })?)?;
    Ok(out)
}

/// Synthetic point cloud: `(points, labels or None)`.
#[pyfunction]
#[pyo3(signature = (manifold, n, noise=0.0, seed=0))]
fn synth(manifold: &str, n: usize, noise: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Option<Vec<usize>>)> {
    let m: Manifold = manifold.parse().map_err(to_py)?;
    let data = perturb::synth_manifold(m, n, noise, seed).map_err(to_py)?;
    Ok((data.cloud.points().map(<[f64]>::to_vec).collect(), data.labels))
}

/// Perturbation diagnostics on a synthetic connected sum, as a dict.
#[pyfunction]
#[pyo3(signature = (manifold="punctplane", n=1000, noise=0.0, seed=0, delta=1.2, knn=30))]
fn perturb_check<'py>(py: Python<'py>, manifold: &str, n: usize, noise: f64, seed: u64, delta: f64, knn: usize) -> PyResult<Bound<'py, PyAny>> {
    let m: Manifold = manifold.parse().map_err(to_py)?;
    let opts = PerturbOptions { k_nn: knn, delta, ..Default::default() };
    let report = py.detach(|| perturb::perturb_check(m, n, noise, seed, &opts)).map_err(to_py)?;
    json_to_py(py, &serde_json::to_value(&report).map_err(|e| HodgeloopError::new_err(e.to_string()))?)
}

#[pyfunction]
#[pyo3(signature = (points, n, seed=0))]
fn furthest_point_sample(points: Vec<Vec<f64>>, n: usize, seed: u64) -> PyResult<Vec<usize>> {
    fps(&PointCloud::new(points).map_err(to_py)?, n, seed).map_err(to_py)
}

#[pymodule(name = "hodgeloop")]
fn hodgeloop_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HodgeloopError", m.py().get_type::<HodgeloopError>())?;
    m.add("AmbiguousBettiError", m.py().get_type::<AmbiguousBettiError>())?;
    m.add_class::<PyComplex>()?;
    m.add_function(wrap_pyfunction!(point_cloud_complex, m)?)?;
    m.add_function(wrap_pyfunction!(cubical_from_mask, m)?)?;
    m.add_function(wrap_pyfunction!(embed, m)?)?;
    m.add_function(wrap_pyfunction!(ica, m)?)?;
    m.add_function(wrap_pyfunction!(shortest_loops, m)?)?;
    m.add_function(wrap_pyfunction!(run_point_cloud, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_check, m)?)?;
    m.add_function(wrap_pyfunction!(furthest_point_sample, m)?)?;
    Ok(())
}
