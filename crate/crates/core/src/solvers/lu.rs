//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are processed in a fill-reducing order; for each column the sparse
//! triangular solve against the already computed part of `L` is restricted
//! to the nonzeros reachable in the elimination graph.

use std::sync::Arc;

use super::ordering::fill_reducing_order;
use crate::error::{Error, Result};
use crate::sparse::{Pattern, SparseMatrix};

/// Candidates within this factor of the column maximum are accepted as
/// pivots when they sit on the (permuted) diagonal.
const DIAGONAL_PREFERENCE: f64 = 0.1;

/// Column ordering computed once per sparsity pattern and reused for every
/// numeric factorization of matrices sharing that pattern.
#[derive(Clone, Debug)]
pub struct SymbolicLu {
    n: usize,
    order: Vec<usize>,
    pattern: Arc<Pattern>,
}

impl SymbolicLu {
    pub fn analyze(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotSquare {
                nrows: a.nrows(),
                ncols: a.ncols(),
            });
        }
        Ok(SymbolicLu {
            n: a.nrows(),
            order: fill_reducing_order(a),
            pattern: Arc::clone(a.pattern()),
        })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// True when `a` has the sparsity pattern this analysis was built for.
    pub fn matches(&self, a: &SparseMatrix) -> bool {
        Arc::ptr_eq(&self.pattern, a.pattern()) || *self.pattern == **a.pattern()
    }

    pub fn factorize(&self, a: &SparseMatrix) -> Result<Factorization> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotSquare {
                nrows: a.nrows(),
                ncols: a.ncols(),
            });
        }
        if a.nrows() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: a.nrows(),
            });
        }
        numeric(a, &self.order)
    }
}

/// `P A Q = L U` with unit lower triangular `L`.
#[derive(Clone, Debug)]
pub struct Factorization {
    n: usize,
    /// Row permutation: original row `i` is pivot row `pinv[i]`.
    pinv: Vec<usize>,
    q: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
}

/// Orders and factorizes `a` in one call.
pub fn factorize(a: &SparseMatrix) -> Result<Factorization> {
    SymbolicLu::analyze(a)?.factorize(a)
}

pub fn solve(f: &Factorization, b: &[f64]) -> Result<Vec<f64>> {
    f.solve(b)
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U`.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: b.len(),
            });
        }
        let mut y = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            y[self.pinv[i]] = bi;
        }
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    y[self.li[p]] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let end = self.up[j + 1] - 1;
            y[j] /= self.ux[end];
            let yj = y[j];
            if yj != 0.0 {
                for p in self.up[j]..end {
                    y[self.ui[p]] -= self.ux[p] * yj;
                }
            }
        }
        let mut x = vec![0.0; self.n];
        for (k, &qk) in self.q.iter().enumerate() {
            x[qk] = y[k];
        }
        Ok(x)
    }
}

fn numeric(a: &SparseMatrix, q: &[usize]) -> Result<Factorization> {
    let n = a.nrows();
    let (ap, ai, ax) = a.to_csc();
    let tiny = 64.0 * f64::EPSILON * a.max_abs();
    let mut lp = Vec::with_capacity(n + 1);
    let mut up = Vec::with_capacity(n + 1);
    let guess = 4 * ax.len() + n;
    let (mut li, mut lx) = (Vec::with_capacity(guess), Vec::with_capacity(guess));
    let (mut ui, mut ux) = (Vec::with_capacity(guess), Vec::with_capacity(guess));
    const NONE: usize = usize::MAX;
    let mut pinv = vec![NONE; n];
    let mut x = vec![0.0; n];
    // Reach computation scratch: output occupies xi[top..n].
    let mut xi = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut pstack = vec![0usize; n];
    let mut mark = vec![usize::MAX; n];

    for k in 0..n {
        lp.push(li.len());
        up.push(ui.len());
        let col = q[k];

        // Nonzero pattern of L \ A(:, col), in topological order.
        let mut top = n;
        for p in ap[col]..ap[col + 1] {
            let start = ai[p];
            if mark[start] == k {
                continue;
            }
            let mut head = 0usize;
            stack[0] = start;
            loop {
                let j = stack[head];
                let jnew = pinv[j];
                if mark[j] != k {
                    mark[j] = k;
                    pstack[head] = if jnew == NONE { 0 } else { lp[jnew] + 1 };
                }
                let end = if jnew == NONE { 0 } else { lp[jnew + 1] };
                let mut descended = false;
                let mut pp = pstack[head];
                while pp < end {
                    let i = li[pp];
                    pp += 1;
                    if mark[i] != k {
                        pstack[head] = pp;
                        head += 1;
                        stack[head] = i;
                        descended = true;
                        break;
                    }
                }
                if !descended {
                    top -= 1;
                    xi[top] = j;
                    if head == 0 {
                        break;
                    }
                    head -= 1;
                }
            }
        }

        for &i in &xi[top..n] {
            x[i] = 0.0;
        }
        for p in ap[col]..ap[col + 1] {
            x[ai[p]] = ax[p];
        }
        for px in top..n {
            let j = xi[px];
            let jnew = pinv[j];
            if jnew == NONE {
                continue;
            }
            let xj = x[j];
            if xj != 0.0 {
                for p in lp[jnew] + 1..lp[jnew + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }
        }

        let mut ipiv = NONE;
        let mut amax = -1.0;
        for &i in &xi[top..n] {
            if pinv[i] == NONE {
                let t = x[i].abs();
                if t > amax {
                    amax = t;
                    ipiv = i;
                }
            } else {
                ui.push(pinv[i]);
                ux.push(x[i]);
            }
        }
        if ipiv == NONE || amax <= tiny {
            return Err(Error::Singular {
                column: col,
                magnitude: amax.max(0.0),
            });
        }
        if pinv[col] == NONE && mark[col] == k && x[col].abs() >= DIAGONAL_PREFERENCE * amax {
            ipiv = col;
        }
        let pivot = x[ipiv];
        ui.push(k);
        ux.push(pivot);
        pinv[ipiv] = k;
        li.push(ipiv);
        lx.push(1.0);
        for &i in &xi[top..n] {
            if pinv[i] == NONE {
                li.push(i);
                lx.push(x[i] / pivot);
            }
            x[i] = 0.0;
        }
    }
    lp.push(li.len());
    up.push(ui.len());
    for r in li.iter_mut() {
        *r = pinv[*r];
    }
    Ok(Factorization {
        n,
        pinv,
        q: q.to_vec(),
        lp,
        li,
        lx,
        up,
        ui,
        ux,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.matvec(x).unwrap();
        ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn identity_and_diagonal() {
        let f = factorize(&SparseMatrix::identity(3)).unwrap();
        assert_eq!(f.solve(&[1.0, -2.0, 3.0]).unwrap(), vec![1.0, -2.0, 3.0]);
        let d = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        assert_eq!(solve(&factorize(&d).unwrap(), &[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        assert!(f.solve(&[1.0]).is_err());
    }

    #[test]
    fn singular_matrices_are_reported() {
        let s = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(factorize(&s), Err(Error::Singular { .. })));
        let empty_col = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![2.0, 0.0]]);
        assert!(matches!(factorize(&empty_col), Err(Error::Singular { column: 1, .. })));
        let rect = SparseMatrix::from_dense(&[vec![1.0, 0.0]]);
        assert!(matches!(factorize(&rect), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn needs_pivoting() {
        let a = SparseMatrix::from_dense(&[
            vec![0.0, 1.0, 0.0],
            vec![1.0, 0.0, 2.0],
            vec![0.0, 3.0, 1.0],
        ]);
        let b = [1.0, 2.0, 3.0];
        let x = factorize(&a).unwrap().solve(&b).unwrap();
        assert!(residual(&a, &x, &b) < 1e-14);
    }

    #[test]
    fn random_spd_recovers_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..i {
                if rng.gen_bool(0.1) {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    dense[i][j] = v;
                    dense[j][i] = v;
                }
            }
        }
        for i in 0..n {
            let off: f64 = dense[i].iter().map(|v| v.abs()).sum();
            dense[i][i] = off + 1.0;
        }
        let a = SparseMatrix::from_dense(&dense);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&x0).unwrap();
        let f = factorize(&a).unwrap();
        let x = f.solve(&b).unwrap();
        let err = x.iter().zip(&x0).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9);
        assert_eq!(f.solve(&b).unwrap(), x);
        assert!(f.solve(&vec![0.0; n]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn random_unsymmetric_with_zero_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 80;
        let mut trip = Vec::new();
        for i in 0..n {
            // Permuted strong entry keeps the matrix nonsingular; diagonal empty.
            trip.push((i, (i + 1) % n, 5.0 + rng.gen_range(0.0..1.0)));
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    trip.push((i, j, rng.gen_range(-1.0..1.0)));
                }
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let sym = SymbolicLu::analyze(&a).unwrap();
        assert!(sym.matches(&a));
        let x = sym.factorize(&a).unwrap().solve(&b).unwrap();
        let scale = a.max_abs() * x.iter().fold(0.0f64, |m, v| m.max(v.abs())) + 1.0;
        assert!(residual(&a, &x, &b) < 1e-12 * scale);
    }
}
