use super::mesh::StructuredQuadMesh;
use crate::error::{Error, Result};

/// Square sparse matrix in CSR form holding both triangles.
///
/// Everything built by the assemblers in this crate is symmetric; `symmetric`
/// records that promise so the solvers can rely on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetricSystem {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    symmetric: bool,
}

impl SparseSymmetricSystem {
    /// Zero matrix with the nodal-adjacency pattern of `mesh`, `dofs_per_node`
    /// interleaved unknowns per node (`dof = node * dofs_per_node + component`).
    pub fn with_mesh_pattern(mesh: &StructuredQuadMesh, dofs_per_node: usize) -> Self {
        let nn = mesh.node_count();
        let mut neighbours: Vec<Vec<usize>> = vec![Vec::with_capacity(9); nn];
        for conn in mesh.elements() {
            for &a in conn {
                for &b in conn {
                    neighbours[a].push(b);
                }
            }
        }
        for list in &mut neighbours {
            list.sort_unstable();
            list.dedup();
        }

        let dim = nn * dofs_per_node;
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for list in &neighbours {
            for _ in 0..dofs_per_node {
                for &b in list {
                    for c in 0..dofs_per_node {
                        col_idx.push(b * dofs_per_node + c);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let nnz = col_idx.len();
        Self {
            dim,
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
            symmetric: true,
        }
    }

    /// Build from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(dim: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
        for &(r, c, v) in triplets {
            if r >= dim || c >= dim {
                return Err(Error::invalid(format!(
                    "entry ({r}, {c}) outside a {dim}x{dim} matrix"
                )));
            }
            rows[r].push((c, v));
        }
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                if col_idx.len() > *row_ptr.last().unwrap() && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let mut m = Self {
            dim,
            row_ptr,
            col_idx,
            values,
            symmetric: false,
        };
        m.symmetric = m.is_numerically_symmetric(0.0);
        Ok(m)
    }

    /// Dense row-major input, zeros dropped.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut triplets = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(dim, &triplets)
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: (0..=dim).collect(),
            col_idx: (0..dim).collect(),
            values: vec![1.0; dim],
            symmetric: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    fn position(&self, r: usize, c: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[s..e].binary_search(&c).ok().map(|k| s + k)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |k| self.values[k])
    }

    /// Adds to an existing entry of the pattern; panics if `(r, c)` is structurally zero.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let k = self
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) is not in the sparsity pattern"));
        self.values[k] += v;
    }

    /// Scatter a dense `dofs.len()`-square element block (row-major).
    pub fn add_block(&mut self, dofs: &[usize], block: &[f64]) {
        let n = dofs.len();
        debug_assert_eq!(block.len(), n * n);
        for (i, &r) in dofs.iter().enumerate() {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let cols = &self.col_idx[s..e];
            for (j, &c) in dofs.iter().enumerate() {
                let k = s + cols
                    .binary_search(&c)
                    .unwrap_or_else(|_| panic!("entry ({r}, {c}) is not in the sparsity pattern"));
                self.values[k] += block[i * n + j];
            }
        }
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (r, yr) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[r], self.row_ptr[r + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `x^T A x`
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mul_vec(x))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r)).collect()
    }

    /// Sum of all entries, i.e. `1^T A 1`.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// `alpha * self + beta * other`; both operands must share a pattern.
    pub fn linear_combination(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.row_ptr != other.row_ptr || self.col_idx != other.col_idx {
            return Err(Error::invalid("matrices do not share a sparsity pattern"));
        }
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v = alpha * *v + beta * *w;
        }
        out.symmetric = self.symmetric && other.symmetric;
        Ok(out)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= alpha);
        out
    }

    pub fn is_numerically_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).all(|(&c, &v)| {
                let t = self.get(c, r);
                (v - t).abs() <= tol * v.abs().max(t.abs())
            })
        })
    }

    /// Principal submatrix on the `keep` indices (ascending) plus, for every kept
    /// row, its entries in the removed columns, used to move prescribed values to
    /// the right-hand side.
    pub fn split_free(&self, keep: &[usize]) -> (Self, Vec<Vec<(usize, f64)>>) {
        let mut map = vec![usize::MAX; self.dim];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut coupling = Vec::with_capacity(keep.len());
        row_ptr.push(0);
        for &old in keep {
            let (cols, vals) = self.row(old);
            let mut fixed = Vec::new();
            for (&c, &v) in cols.iter().zip(vals) {
                if map[c] == usize::MAX {
                    fixed.push((c, v));
                } else {
                    col_idx.push(map[c]);
                    values.push(v);
                }
            }
            coupling.push(fixed);
            row_ptr.push(col_idx.len());
        }
        (
            Self {
                dim: keep.len(),
                row_ptr,
                col_idx,
                values,
                symmetric: self.symmetric,
            },
            coupling,
        )
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.dim]; self.dim];
        for (r, row) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mesh_pattern_is_symmetric_and_sized() {
        let mesh = StructuredQuadMesh::new(3, 2, 1.0, 1.0).unwrap();
        let a = SparseSymmetricSystem::with_mesh_pattern(&mesh, 2);
        assert_eq!(a.dim(), 24);
        // interior node has 9 neighbours -> 18 columns per row
        let interior = mesh.node_id(1, 1);
        assert_eq!(a.row(2 * interior).0.len(), 18);
        for r in 0..a.dim() {
            for &c in a.row(r).0 {
                assert!(a.position(c, r).is_some());
            }
        }
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseSymmetricSystem::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0), (0, 1, 1.0), (1, 0, 1.0)])
            .unwrap();
        assert_eq!(a.get(0, 0), 3.0);
        assert!(a.is_symmetric());
        assert_eq!(a.mul_vec(&[1.0, 1.0]), vec![4.0, 5.0]);
    }

    #[test]
    fn split_free_moves_fixed_columns() {
        let a = SparseSymmetricSystem::from_dense(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, 0.0],
            vec![0.5, 0.0, 2.0],
        ])
        .unwrap();
        let (sub, coupling) = a.split_free(&[0, 2]);
        assert_eq!(sub.to_dense(), vec![vec![4.0, 0.5], vec![0.5, 2.0]]);
        assert_eq!(coupling[0], vec![(1, 1.0)]);
        assert!(coupling[1].is_empty());
    }
}
