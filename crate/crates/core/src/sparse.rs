//! Compressed sparse row matrices.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Row pointers and sorted column indices, shared between matrices assembled
/// on the same pair of spaces.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pattern {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (unsorted, duplicates allowed).
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let mut indices = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            indices.extend_from_slice(row);
            indptr.push(indices.len());
        }
        Pattern {
            nrows,
            ncols,
            indptr,
            indices,
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Position of `(row, col)` in the value array.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (lo, hi) = (self.indptr[row], self.indptr[row + 1]);
        self.indices[lo..hi].binary_search(&col).ok().map(|k| lo + k)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<Pattern>,
    data: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let data = vec![0.0; pattern.nnz()];
        SparseMatrix { pattern, data }
    }

    pub fn from_parts(pattern: Arc<Pattern>, data: Vec<f64>) -> Result<Self> {
        if data.len() != pattern.nnz() {
            return Err(Error::DimensionMismatch {
                expected: pattern.nnz(),
                got: data.len(),
            });
        }
        Ok(SparseMatrix { pattern, data })
    }

    /// Sums duplicate entries in input order, so the result does not depend on
    /// how equal positions are interleaved with others.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); nrows];
        for &(i, j, _) in triplets {
            if i >= nrows {
                return Err(Error::IndexOutOfRange { index: i, len: nrows });
            }
            if j >= ncols {
                return Err(Error::IndexOutOfRange { index: j, len: ncols });
            }
            rows[i].push(j);
        }
        let pattern = Arc::new(Pattern::from_rows(ncols, rows));
        let mut m = SparseMatrix::zeros(pattern);
        for &(i, j, v) in triplets {
            m.add_at(i, j, v);
        }
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        let pattern = Pattern {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
        };
        SparseMatrix {
            pattern: Arc::new(pattern),
            data: vec![1.0; n],
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let ncols = rows.first().map_or(0, Vec::len);
        let triplets: Vec<_> = rows
            .iter()
            .enumerate()
            .flat_map(|(i, r)| {
                r.iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(move |(j, &v)| (i, j, v))
            })
            .collect();
        SparseMatrix::from_triplets(rows.len(), ncols, &triplets).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.pattern.indptr[i], self.pattern.indptr[i + 1]);
        self.pattern.indices[lo..hi]
            .iter()
            .copied()
            .zip(self.data[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |p| self.data[p])
    }

    /// Adds `v` at `(i, j)`; the position must exist in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let p = self
            .pattern
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.data[p] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ncols(),
                got: x.len(),
            });
        }
        Ok((0..self.nrows())
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect())
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> Result<f64> {
        if y.len() != self.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows(),
                got: y.len(),
            });
        }
        let ax = self.matvec(x)?;
        Ok(dot(y, &ax))
    }

    pub fn transpose(&self) -> SparseMatrix {
        let (nrows, ncols) = (self.nrows(), self.ncols());
        let mut counts = vec![0usize; ncols + 1];
        for &j in &self.pattern.indices {
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..nrows {
            for p in self.pattern.indptr[i]..self.pattern.indptr[i + 1] {
                let j = self.pattern.indices[p];
                indices[next[j]] = i;
                data[next[j]] = self.data[p];
                next[j] += 1;
            }
        }
        let pattern = Pattern {
            nrows: ncols,
            ncols: nrows,
            indptr,
            indices,
        };
        SparseMatrix {
            pattern: Arc::new(pattern),
            data,
        }
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        SparseMatrix {
            pattern: Arc::clone(&self.pattern),
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn same_pattern(&self, other: &SparseMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern
    }

    /// `Σ cₖ Aₖ` over matrices sharing one pattern.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<SparseMatrix> {
        let (_, first) = terms.first().ok_or(Error::DimensionMismatch { expected: 1, got: 0 })?;
        let mut out = SparseMatrix::zeros(Arc::clone(&first.pattern));
        for (c, m) in terms {
            if !first.same_pattern(m) {
                return Err(Error::DimensionMismatch {
                    expected: first.nnz(),
                    got: m.nnz(),
                });
            }
            for (o, v) in out.data.iter_mut().zip(&m.data) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// General sum `A + s·B` for matrices of equal shape but any pattern.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.nrows() != other.nrows() || self.ncols() != other.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.nrows() * self.ncols(),
                got: other.nrows() * other.ncols(),
            });
        }
        if self.same_pattern(other) {
            return SparseMatrix::linear_combination(&[(1.0, self), (s, other)]);
        }
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows() {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, s * v)));
        }
        SparseMatrix::from_triplets(self.nrows(), self.ncols(), &triplets)
    }

    /// Block-diagonal matrix with `copies` copies of `self` on the diagonal.
    pub fn block_diagonal(&self, copies: usize) -> SparseMatrix {
        let (nr, nc) = (self.nrows(), self.ncols());
        let mut indptr = Vec::with_capacity(copies * nr + 1);
        indptr.push(0);
        let mut indices = Vec::with_capacity(copies * self.nnz());
        let mut data = Vec::with_capacity(copies * self.nnz());
        for c in 0..copies {
            for i in 0..nr {
                for (j, v) in self.row(i) {
                    indices.push(c * nc + j);
                    data.push(v);
                }
                indptr.push(indices.len());
            }
        }
        let pattern = Pattern {
            nrows: copies * nr,
            ncols: copies * nc,
            indptr,
            indices,
        };
        SparseMatrix {
            pattern: Arc::new(pattern),
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.ncols()]; self.nrows()];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] += v;
            }
        }
        out
    }

    /// Compressed-column arrays `(colptr, rowidx, values)` of the same matrix.
    pub fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let t = self.transpose();
        let pattern = Arc::try_unwrap(t.pattern).unwrap_or_else(|p| (*p).clone());
        (pattern.indptr, pattern.indices, t.data)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `Σ cₖ vₖ` for equally long vectors.
pub fn combine(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let n = terms.first().map_or(0, |(_, v)| v.len());
    let mut out = vec![0.0; n];
    for (c, v) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, x) in out.iter_mut().zip(v.iter()) {
            *o += c * x;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, 3, &[(0, 2, 1.0), (1, 0, 2.0), (0, 2, 0.5)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert!(SparseMatrix::from_triplets(1, 1, &[(0, 1, 1.0)]).is_err());
    }

    #[test]
    fn transpose_and_matvec() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0, 2.0], vec![0.0, 3.0, 4.0]]);
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![vec![1.0, 0.0], vec![0.0, 3.0], vec![2.0, 4.0]]);
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert!(a.matvec(&[1.0]).is_err());
        let (colptr, rowidx, vals) = a.to_csc();
        assert_eq!(colptr, vec![0, 1, 2, 4]);
        assert_eq!(rowidx, vec![0, 1, 0, 1]);
        assert_eq!(vals, vec![1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn block_diagonal_and_combination() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]);
        let b = a.block_diagonal(2);
        assert_eq!(b.nrows(), 4);
        assert_eq!(b.get(2, 3), 2.0);
        assert_eq!(b.get(0, 3), 0.0);
        let c = SparseMatrix::linear_combination(&[(2.0, &a), (-1.0, &a)]).unwrap();
        assert_eq!(c.to_dense(), a.to_dense());
        let d = a.add_scaled(1.0, &SparseMatrix::identity(2)).unwrap();
        assert_eq!(d.to_dense(), vec![vec![2.0, 2.0], vec![0.0, 4.0]]);
    }
}
