//! Signed boundary matrices.

use std::collections::HashMap;

use crate::complex::{cycle_pairs, Complex2};
use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Sparse `{0, ±1}` incidence of `cols` cells onto `rows` faces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMatrix {
    rows: usize,
    cols: usize,
    /// (face, cell, sign), grouped by cell
    entries: Vec<(usize, usize, i8)>,
}

impl BoundaryMatrix {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self { rows, cols, entries: Vec::new() }
    }

    /// Assembles a boundary map from a per-cell callback returning
    /// `(face index, sign)` pairs. This is the generic path for complexes of
    /// any dimension where the caller owns the cell lists.
    pub fn from_cells<F>(rows: usize, cols: usize, mut faces_of: F) -> Result<Self>
    where
        F: FnMut(usize) -> Result<Vec<(usize, i8)>>,
    {
        let mut entries = Vec::new();
        for cell in 0..cols {
            let mut faces = faces_of(cell)?;
            faces.sort_unstable_by_key(|&(f, _)| f);
            for w in faces.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Input(format!("cell {cell} lists face {} twice", w[0].0)));
                }
            }
            for (face, sign) in faces {
                if face >= rows {
                    return Err(Error::Closure(format!("cell {cell} references face {face} >= {rows}")));
                }
                if sign != 1 && sign != -1 {
                    return Err(Error::Input(format!("sign {sign} is not ±1")));
                }
                entries.push((face, cell, sign));
            }
        }
        Ok(Self { rows, cols, entries })
    }

    /// Boundary of sorted simplices given as vertex lists, with the
    /// alternating convention `∂[v0..vl] = Σ (-1)^i [.. v̂i ..]`.
    pub fn simplicial(faces: &[Vec<usize>], cells: &[Vec<usize>]) -> Result<Self> {
        let index: HashMap<&[usize], usize> = faces.iter().enumerate().map(|(i, f)| (f.as_slice(), i)).collect();
        Self::from_cells(faces.len(), cells.len(), |c| {
            let cell = &cells[c];
            if cell.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Input(format!("simplex {cell:?} is not strictly ascending")));
            }
            (0..cell.len())
                .map(|drop| {
                    let face: Vec<usize> = cell.iter().enumerate().filter(|&(i, _)| i != drop).map(|(_, &v)| v).collect();
                    let idx = index
                        .get(face.as_slice())
                        .ok_or_else(|| Error::Closure(format!("face {face:?} of {cell:?} missing")))?;
                    Ok((*idx, if drop % 2 == 0 { 1 } else { -1 }))
                })
                .collect()
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, i8)] {
        &self.entries
    }

    /// Nonzero count of every column.
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.cols];
        for &(_, c, _) in &self.entries {
            counts[c] += 1;
        }
        counts
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.rows, self.cols, self.entries.iter().map(|&(r, c, s)| (r, c, s as f64)))
    }

    /// `|B|` as a real matrix.
    pub fn abs_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.rows, self.cols, self.entries.iter().map(|&(r, c, _)| (r, c, 1.0)))
    }

    /// Exact integer product `self * other`, returned as its nonzero entries.
    pub fn compose(&self, other: &BoundaryMatrix) -> Result<Vec<((usize, usize), i64)>> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot compose {}x{} with {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut by_row: Vec<Vec<(usize, i64)>> = vec![Vec::new(); self.cols];
        for &(r, c, s) in &self.entries {
            by_row[c].push((r, s as i64));
        }
        let mut acc: HashMap<(usize, usize), i64> = HashMap::new();
        for &(mid, c, s) in &other.entries {
            for &(r, s1) in &by_row[mid] {
                *acc.entry((r, c)).or_insert(0) += s1 * s as i64;
            }
        }
        let mut nz: Vec<_> = acc.into_iter().filter(|&(_, v)| v != 0).collect();
        nz.sort_unstable();
        Ok(nz)
    }

    /// Flips the orientation of the given face (row): negates that row.
    pub fn negate_row(&mut self, row: usize) {
        for e in self.entries.iter_mut().filter(|e| e.0 == row) {
            e.2 = -e.2;
        }
    }

    /// Flips the orientation of the given cell (column).
    pub fn negate_col(&mut self, col: usize) {
        for e in self.entries.iter_mut().filter(|e| e.1 == col) {
            e.2 = -e.2;
        }
    }

    pub fn write_matrix_market<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.to_sparse().write_matrix_market(out, true)
    }

    pub fn read_matrix_market<R: std::io::BufRead>(input: R) -> Result<Self> {
        let m = SparseMatrix::read_matrix_market(input)?;
        let mut entries = Vec::with_capacity(m.nnz());
        for (r, c, v) in m.triplets() {
            let s = match v {
                v if v == 1.0 => 1,
                v if v == -1.0 => -1,
                v if v == 0.0 => continue,
                v => return Err(Error::Parse(format!("boundary entry {v} is not ±1"))),
            };
            entries.push((r, c, s));
        }
        entries.sort_unstable_by_key(|&(r, c, _)| (c, r));
        Ok(Self { rows: m.nrows(), cols: m.ncols(), entries })
    }
}

/// Vertex-to-edge incidence: `+1` at the tail `x` and `-1` at the head `y` of `[x, y]`.
pub fn edge_boundary(complex: &Complex2) -> BoundaryMatrix {
    let entries = complex
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(e, &[x, y])| [(x, e, 1i8), (y, e, -1i8)])
        .collect();
    BoundaryMatrix { rows: complex.n0(), cols: complex.n1(), entries }
}

/// Edge-to-cell incidence. A cell's boundary walks its vertex list
/// cyclically; each step `a -> b` contributes `+1` on the edge when it
/// agrees with the stored orientation (`a < b`) and `-1` otherwise. For a
/// triangle `[x, y, z]` that is `+[x,y] +[y,z] -[x,z]`; for a rectangle
/// `[x, y, z, w]` it is `+[x,y] +[y,z] +[z,w] -[x,w]` relative to the walk.
pub fn cell_boundary(complex: &Complex2) -> Result<BoundaryMatrix> {
    BoundaryMatrix::from_cells(complex.n1(), complex.n2(), |c| {
        let cell = &complex.cells()[c];
        cycle_pairs(cell)
            .map(|(a, b)| {
                let e = complex
                    .edge_index(a, b)
                    .ok_or_else(|| Error::Closure(format!("cell {cell:?} is missing edge [{a}, {b}]")))?;
                Ok((e, if a < b { 1 } else { -1 }))
            })
            .collect()
    })
}

/// `(B_k, B_{k+1})` for a 2-complex; only `k = 1` is materialized.
pub fn boundary_maps(complex: &Complex2, k: usize) -> Result<(BoundaryMatrix, BoundaryMatrix)> {
    if k != 1 {
        return Err(Error::UnsupportedDimension(k));
    }
    Ok((edge_boundary(complex), cell_boundary(complex)?))
}

/// Boundary maps for `k = 0`: an empty `0 x n0` map and the edge incidence.
pub fn graph_boundary_maps(complex: &Complex2) -> (BoundaryMatrix, BoundaryMatrix) {
    (BoundaryMatrix::empty(0, complex.n0()), edge_boundary(complex))
}
