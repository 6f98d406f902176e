//! Consistent cell weights and the normalized weighted Hodge Laplacian.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryMatrix;
use crate::complex::ComplexKind;
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    level: usize,
    values: Vec<f64>,
}

impl WeightVector {
    /// Weights must be finite and nonnegative. Zeros are allowed here and
    /// handled by the floor during propagation.
    pub fn new(level: usize, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Input(format!("weight {v} at level {level} is not a nonnegative real")));
        }
        Ok(Self { level, values })
    }

    pub fn constant(level: usize, n: usize, value: f64) -> Self {
        Self { level, values: vec![value; n] }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { level: self.level, values: self.values.iter().map(|v| v * c).collect() }
    }
}

/// Replacement value for cells that receive zero weight because they have no coface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightFloor {
    /// A fixed value.
    Absolute(f64),
    /// The smallest positive weight on the same level (1 if there is none).
    /// Scale covariant, and keeps floored cells on the same footing as the
    /// lightest genuine cell so they cannot fake a near-zero eigenvalue.
    MinPositive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightOptions {
    pub floor: WeightFloor,
    /// Refuse coface-free cells instead of flooring them.
    pub strict: bool,
}

impl Default for WeightOptions {
    fn default() -> Self {
        Self { floor: WeightFloor::MinPositive, strict: false }
    }
}

/// `w_l = |B_{l+1}| w_{l+1}`, floored where the sum is zero. Returns the
/// weights and the number of floored cells.
pub fn propagate_weights(b_next: &BoundaryMatrix, w_next: &WeightVector, opts: &WeightOptions) -> Result<(WeightVector, usize)> {
    if b_next.cols() != w_next.len() {
        return Err(Error::Dimension(format!(
            "boundary has {} columns but weight vector has {} entries",
            b_next.cols(),
            w_next.len()
        )));
    }
    let mut w = vec![0.0; b_next.rows()];
    for &(r, c, _) in b_next.entries() {
        w[r] += w_next.values[c];
    }
    let level = w_next.level.saturating_sub(1);
    let zeros: Vec<usize> = (0..w.len()).filter(|&i| w[i] <= 0.0).collect();
    if let (true, Some(&index)) = (opts.strict, zeros.first()) {
        return Err(Error::IsolatedCell { level, index });
    }
    let floor = match opts.floor {
        WeightFloor::Absolute(v) if v > 0.0 => v,
        WeightFloor::Absolute(v) => return Err(Error::Parameter(format!("weight floor {v} must be positive"))),
        WeightFloor::MinPositive => w.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min),
    };
    let floor = if floor.is_finite() { floor } else { 1.0 };
    for &i in &zeros {
        w[i] = floor;
    }
    Ok((WeightVector { level, values: w }, zeros.len()))
}

/// Where the weight recursion starts.
#[derive(Debug, Clone)]
pub enum WeightSeed {
    /// `w_{k+1}`; `w_k` and `w_{k-1}` are propagated.
    Top(WeightVector),
    /// `w_k` directly, for complexes without `(k+1)`-cells.
    Middle(WeightVector),
}

#[derive(Debug, Clone)]
pub struct HodgeSystem {
    k: usize,
    kind: ComplexKind,
    a_k: SparseMatrix,
    a_k1: SparseMatrix,
    l: SparseMatrix,
    l_down: SparseMatrix,
    l_up: SparseMatrix,
    w_km1: WeightVector,
    w_k: WeightVector,
    w_k1: WeightVector,
    floored: [usize; 2],
}

fn sqrt_all(w: &[f64]) -> Vec<f64> {
    w.iter().map(|v| v.sqrt()).collect()
}

fn inv_sqrt_all(w: &[f64]) -> Vec<f64> {
    w.iter().map(|v| 1.0 / v.sqrt()).collect()
}

impl HodgeSystem {
    /// Assembles `L_k = A_kᵀA_k + A_{k+1}A_{k+1}ᵀ` with
    /// `A_l = W_{l-1}^{-1/2} B_l W_l^{1/2}`.
    pub fn assemble(
        k: usize,
        b_k: &BoundaryMatrix,
        b_k1: &BoundaryMatrix,
        seed: WeightSeed,
        kind: ComplexKind,
        opts: &WeightOptions,
    ) -> Result<Self> {
        if b_k.cols() != b_k1.rows() {
            return Err(Error::Dimension(format!(
                "B_k is {}x{} but B_(k+1) is {}x{}",
                b_k.rows(),
                b_k.cols(),
                b_k1.rows(),
                b_k1.cols()
            )));
        }
        if !b_k.compose(b_k1)?.is_empty() {
            return Err(Error::Closure("B_k B_(k+1) is not zero".into()));
        }
        let (w_k1, w_k, floored_k) = match seed {
            WeightSeed::Top(w) => {
                if w.values.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Input("top-level weights must be strictly positive".into()));
                }
                let (wk, f) = propagate_weights(b_k1, &w, opts)?;
                (w, wk, f)
            }
            WeightSeed::Middle(w) => {
                if b_k1.cols() > 0 {
                    return Err(Error::Parameter("a w_k seed is only allowed when there are no (k+1)-cells".into()));
                }
                if w.len() != b_k.cols() {
                    return Err(Error::Dimension(format!("w_k has {} entries, expected {}", w.len(), b_k.cols())));
                }
                if w.values.iter().any(|&v| v <= 0.0) {
                    return Err(Error::Input("seed weights must be strictly positive".into()));
                }
                // without (k+1)-cells there is nothing to propagate from
                let top = WeightVector { level: k + 1, values: vec![1.0; b_k1.cols()] };
                (top, WeightVector { level: k, ..w }, 0)
            }
        };
        let (w_km1, floored_km1) = if b_k.rows() == 0 {
            (WeightVector { level: k.saturating_sub(1), values: Vec::new() }, 0)
        } else {
            propagate_weights(b_k, &w_k, opts)?
        };

        let a_k = b_k.to_sparse().scale(&inv_sqrt_all(&w_km1.values), &sqrt_all(&w_k.values));
        let a_k1 = b_k1.to_sparse().scale(&inv_sqrt_all(&w_k.values), &sqrt_all(&w_k1.values));
        let l_down = a_k.transpose().matmul(&a_k).symmetrized();
        let l_up = a_k1.matmul(&a_k1.transpose()).symmetrized();
        let l = l_down.add(&l_up).symmetrized();
        Ok(Self {
            k,
            kind,
            a_k,
            a_k1,
            l,
            l_down,
            l_up,
            w_km1,
            w_k,
            w_k1,
            floored: [floored_km1, floored_k],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> ComplexKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn a_k(&self) -> &SparseMatrix {
        &self.a_k
    }

    pub fn a_k1(&self) -> &SparseMatrix {
        &self.a_k1
    }

    pub fn laplacian(&self) -> &SparseMatrix {
        &self.l
    }

    pub fn l_down(&self) -> &SparseMatrix {
        &self.l_down
    }

    pub fn l_up(&self) -> &SparseMatrix {
        &self.l_up
    }

    pub fn w_km1(&self) -> &WeightVector {
        &self.w_km1
    }

    pub fn w_k(&self) -> &WeightVector {
        &self.w_k
    }

    pub fn w_k1(&self) -> &WeightVector {
        &self.w_k1
    }

    /// Cells floored at levels `k-1` and `k`.
    pub fn floored_counts(&self) -> [usize; 2] {
        self.floored
    }

    pub fn spectral_norm_upper(&self) -> f64 {
        spectral_cap(self.kind, self.k)
    }
}

/// `k + 2` for simplicial complexes, `2k + 2` for cubical ones.
pub fn spectral_cap(kind: ComplexKind, k: usize) -> f64 {
    match kind {
        ComplexKind::Simplicial => (k + 2) as f64,
        ComplexKind::Cubical => (2 * k + 2) as f64,
    }
}
