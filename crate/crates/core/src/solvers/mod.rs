//! Sparse direct solution of the per-step linear systems.

pub mod lu;
pub mod ordering;

pub use lu::{factorize, solve, Factorization, SymbolicLu};

use crate::error::{Error, Result};
use crate::sparse::{norm_inf, SparseMatrix};

#[derive(Clone, Debug)]
pub struct LinearSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Index of the Lagrange multiplier unknown enforcing zero-mean pressure.
    pub multiplier: Option<usize>,
}

impl LinearSystem {
    pub fn new(matrix: SparseMatrix, rhs: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                nrows: matrix.nrows(),
                ncols: matrix.ncols(),
            });
        }
        if rhs.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        Ok(LinearSystem {
            matrix,
            rhs,
            multiplier: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    /// `‖A x − b‖∞ / (‖A‖∞ ‖x‖∞ + ‖b‖∞)`, using the max-entry norm for `A`.
    pub fn relative_residual(&self, x: &[f64]) -> Result<f64> {
        let ax = self.matrix.matvec(x)?;
        let r = ax.iter().zip(&self.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = self.matrix.max_abs() * norm_inf(x) + norm_inf(&self.rhs);
        Ok(if scale > 0.0 { r / scale } else { r })
    }
}

/// Block system
/// ```text
/// [ Auu  Bᵀ  0 ] [u]   [f_u]
/// [ B    0   m ] [p] = [ 0 ]
/// [ 0    mᵀ  0 ] [λ]   [ 0 ]
/// ```
/// where `m` holds the integrals of the pressure basis functions, so the
/// last row enforces `∫p = 0`.
pub fn build_saddle_system(auu: &SparseMatrix, b: &SparseMatrix, f_u: &[f64], m: &[f64]) -> Result<LinearSystem> {
    let nu = auu.nrows();
    let np = b.nrows();
    if auu.ncols() != nu {
        return Err(Error::NotSquare {
            nrows: nu,
            ncols: auu.ncols(),
        });
    }
    if b.ncols() != nu {
        return Err(Error::DimensionMismatch {
            expected: nu,
            got: b.ncols(),
        });
    }
    if f_u.len() != nu {
        return Err(Error::DimensionMismatch {
            expected: nu,
            got: f_u.len(),
        });
    }
    if m.len() != np {
        return Err(Error::DimensionMismatch { expected: np, got: m.len() });
    }
    let n = nu + np + 1;
    let mut triplets = Vec::with_capacity(auu.nnz() + 2 * b.nnz() + 2 * np);
    for i in 0..nu {
        triplets.extend(auu.row(i).map(|(j, v)| (i, j, v)));
    }
    for a in 0..np {
        for (j, v) in b.row(a) {
            triplets.push((nu + a, j, v));
            triplets.push((j, nu + a, v));
        }
        triplets.push((nu + a, n - 1, m[a]));
        triplets.push((n - 1, nu + a, m[a]));
    }
    let matrix = SparseMatrix::from_triplets(n, n, &triplets)?;
    let mut rhs = vec![0.0; n];
    rhs[..nu].copy_from_slice(f_u);
    Ok(LinearSystem {
        matrix,
        rhs,
        multiplier: Some(n - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_divergence, assemble_load, assemble_stiffness};
    use crate::fespace::{apply_dirichlet, build_space, DirichletSet};
    use crate::mesh::{structured_triangulation, BoundaryTag, Rect};
    use std::sync::Arc;

    #[test]
    fn stokes_saddle_point_on_small_mesh() {
        let mesh = Arc::new(structured_triangulation(4, 4, Rect::unit_square()).unwrap());
        let vel = build_space(Arc::clone(&mesh), 2, 2).unwrap();
        let pres = build_space(Arc::clone(&mesh), 1, 1).unwrap();
        let a = assemble_stiffness(&vel, 1.0).unwrap();
        let b = assemble_divergence(&vel, &pres).unwrap();
        let m = assemble_load(&pres, |_, _, _| [1.0], 0.0).unwrap();
        let f = assemble_load(&vel, |x, y, _| [y * y + x, x.sin()], 0.0).unwrap();
        let bc = DirichletSet::homogeneous(&vel.boundary_dofs(&[BoundaryTag::DirichletWall]));
        let sys = build_saddle_system(&a, &b.scaled(-1.0), &f, &m).unwrap();
        assert_eq!(sys.dim(), vel.n_dofs() + pres.n_dofs() + 1);
        let sys = apply_dirichlet(sys, &bc, 0.0).unwrap();
        let x = factorize(&sys.matrix).unwrap().solve(&sys.rhs).unwrap();
        assert!(sys.relative_residual(&x).unwrap() < 1e-12);
        let (u, p) = (&x[..vel.n_dofs()], &x[vel.n_dofs()..vel.n_dofs() + pres.n_dofs()]);
        let mean: f64 = p.iter().zip(&m).map(|(a, b)| a * b).sum();
        assert!(mean.abs() < 1e-10);
        let div = b.matvec(u).unwrap();
        let unorm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(div.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1e-9 * unorm);
        for d in bc.dofs() {
            assert!(u[d].abs() < 1e-14);
        }

        let zero = build_saddle_system(&a, &b, &vec![0.0; vel.n_dofs()], &m).unwrap();
        let zero = apply_dirichlet(zero, &bc, 0.0).unwrap();
        let x = factorize(&zero.matrix).unwrap().solve(&zero.rhs).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn saddle_dimension_checks() {
        let a = SparseMatrix::identity(2);
        let b = SparseMatrix::from_dense(&[vec![1.0, 1.0]]);
        assert!(build_saddle_system(&a, &b, &[0.0], &[1.0]).is_err());
        assert!(build_saddle_system(&a, &b, &[0.0, 0.0], &[]).is_err());
        assert!(LinearSystem::new(a, vec![1.0]).is_err());
    }
}
