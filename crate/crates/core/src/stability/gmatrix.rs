//! The G-matrix of the blended BDF derivative and the norms it induces on
//! triples of consecutive time levels.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sparse::{dot, SparseMatrix};
use crate::timestepping::SchemeCoeffs;

/// Eigenvalues of [`GMatrix::standard`] in increasing order, from a 40-digit
/// dense eigensolve.
pub const G_EIGENVALUES: [f64; 3] = [
    0.001_475_734_665_773_771_045_7,
    0.168_285_860_191_957_878_4,
    2.330_238_405_142_268_350_6,
];

/// `1 / λ_max(G)`.
pub const C_L: f64 = 0.429_140_639_770_267_140_98;

/// `1 / λ_min(G)`.
pub const C_U: f64 = 677.628_589_469_822_217_46;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GMatrix {
    pub entries: [[f64; 3]; 3],
}

impl Default for GMatrix {
    fn default() -> Self {
        GMatrix::standard()
    }
}

impl GMatrix {
    /// `(1/12) [[19, −12, 3], [−12, 10, −3], [3, −3, 1]]`.
    pub fn standard() -> Self {
        let raw = [[19.0, -12.0, 3.0], [-12.0, 10.0, -3.0], [3.0, -3.0, 1.0]];
        GMatrix {
            entries: raw.map(|row| row.map(|v| v / 12.0)),
        }
    }

    /// Eigenvalues in increasing order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let m = Matrix3::from_fn(|i, j| self.entries[i][j]);
        let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2]]
    }

    /// `Σ G_ij (w_i, w_j)` given the Gram matrix of the three levels.
    pub fn quadratic_form(&self, gram: &[[f64; 3]; 3]) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.entries[i][j] * gram[i][j];
            }
        }
        s
    }
}

/// Norm-equivalence constants `(C_l, C_u) = (1/λ_max, 1/λ_min)` so that
/// `C_l ‖W‖_G² ≤ ‖W‖² ≤ C_u ‖W‖_G²`.
pub fn g_eigen_bounds() -> (f64, f64) {
    let ev = GMatrix::standard().eigenvalues();
    (1.0 / ev[2], 1.0 / ev[0])
}

/// Three consecutive levels `(w^{n+1}, w^n, w^{n-1})` of one field together
/// with the mass matrix of its space.
#[derive(Clone, Copy, Debug)]
pub struct GTriple<'a> {
    pub levels: [&'a [f64]; 3],
    pub mass: &'a SparseMatrix,
}

impl<'a> GTriple<'a> {
    pub fn new(levels: [&'a [f64]; 3], mass: &'a SparseMatrix) -> Result<Self> {
        for l in levels {
            if l.len() != mass.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: mass.ncols(),
                    got: l.len(),
                });
            }
        }
        Ok(GTriple { levels, mass })
    }

    /// Mass-weighted Gram matrix of the three levels.
    pub fn gram(&self) -> Result<[[f64; 3]; 3]> {
        let m: Vec<Vec<f64>> = self
            .levels
            .iter()
            .map(|l| self.mass.matvec(l))
            .collect::<Result<_>>()?;
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                g[i][j] = dot(&m[i], self.levels[j]);
                g[j][i] = g[i][j];
            }
        }
        Ok(g)
    }

    /// `Σ ‖w_i‖²`.
    pub fn l2_sq(&self) -> Result<f64> {
        let g = self.gram()?;
        Ok(g[0][0] + g[1][1] + g[2][2])
    }
}

/// `‖W‖_G² = Σ G_ij (w_i, w_j)_M`.
pub fn gnorm_sq(t: &GTriple<'_>) -> Result<f64> {
    Ok(GMatrix::standard().quadratic_form(&t.gram()?))
}

/// Both sides of the telescoping identity
/// `(5/3 w⁺ − 5/2 w + w⁻ − 1/6 w⁼, w⁺) = ‖W⁺‖_G² − ‖W‖_G² + (1/12)‖w⁺ − 3w + 3w⁻ − w⁼‖²`
/// for levels given newest first.
pub fn g_identity_sides(levels: [&[f64]; 4], mass: &SparseMatrix) -> Result<(f64, f64)> {
    let a = SchemeCoeffs::BLEBDF.derivative;
    let m: Vec<Vec<f64>> = levels.iter().map(|l| mass.matvec(l)).collect::<Result<_>>()?;
    let mut gram = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in i..4 {
            gram[i][j] = dot(&m[i], levels[j]);
            gram[j][i] = gram[i][j];
        }
    }
    let lhs: f64 = (0..4).map(|k| a[k] * gram[k][0]).sum();
    let g = GMatrix::standard();
    let upper = g.quadratic_form(&sub_gram(&gram, 0));
    let lower = g.quadratic_form(&sub_gram(&gram, 1));
    let c = [1.0, -3.0, 3.0, -1.0];
    let mut jump = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            jump += c[i] * c[j] * gram[i][j];
        }
    }
    Ok((lhs, upper - lower + jump / 12.0))
}

fn sub_gram(gram: &[[f64; 4]; 4], offset: usize) -> [[f64; 3]; 3] {
    let mut s = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = gram[i + offset][j + offset];
        }
    }
    s
}

/// `|LHS − RHS|` of the telescoping identity.
pub fn verify_g_identity(levels: [&[f64]; 4], mass: &SparseMatrix) -> Result<f64> {
    let (lhs, rhs) = g_identity_sides(levels, mass)?;
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigenvalues_match_frozen_values() {
        let ev = GMatrix::standard().eigenvalues();
        for (a, b) in ev.iter().zip(G_EIGENVALUES) {
            assert!((a - b).abs() <= 1e-12 * b.max(1e-3), "{a} vs {b}");
        }
        assert!(ev.iter().all(|v| *v > 0.0));
        assert!((ev.iter().sum::<f64>() - 2.5).abs() < 1e-14);
        let (cl, cu) = g_eigen_bounds();
        assert!((cl - C_L).abs() < 1e-12 * C_L);
        assert!((cu - C_U).abs() < 1e-12 * C_U);
        assert!(0.0 < cl && cl < cu);
    }

    #[test]
    fn gnorm_of_unit_newest_level() {
        let mass = SparseMatrix::identity(2);
        let a = [0.6, 0.8];
        let z = [0.0, 0.0];
        let t = GTriple::new([&a, &z, &z], &mass).unwrap();
        assert!((gnorm_sq(&t).unwrap() - 19.0 / 12.0).abs() < 1e-15);
        let t = GTriple::new([&z, &z, &z], &mass).unwrap();
        assert_eq!(gnorm_sq(&t).unwrap(), 0.0);
        assert!(GTriple::new([&a, &z, &[0.0]], &mass).is_err());
    }

    #[test]
    fn identity_hand_cases() {
        let mass = SparseMatrix::identity(3);
        let c = [1.5, -2.0, 0.25];
        assert!(verify_g_identity([&c, &c, &c, &c], &mass).unwrap() < 1e-14);
        let e = [1.0, 0.0, 0.0];
        let z = [0.0; 3];
        let (lhs, rhs) = g_identity_sides([&e, &z, &z, &z], &mass).unwrap();
        assert!((lhs - 5.0 / 3.0).abs() < 1e-15 && (rhs - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_and_equivalence_on_random_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let d = SparseMatrix::from_dense(&[vec![2.0, 0.5, 0.0], vec![0.5, 1.0, 0.1], vec![0.0, 0.1, 0.7]]);
        let (cl, cu) = g_eigen_bounds();
        for _ in 0..200 {
            let lv: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
            let (lhs, rhs) = g_identity_sides([&lv[0], &lv[1], &lv[2], &lv[3]], &d).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs() + rhs.abs() + 1.0));
            let t = GTriple::new([&lv[0], &lv[1], &lv[2]], &d).unwrap();
            let g = gnorm_sq(&t).unwrap();
            let l2 = t.l2_sq().unwrap();
            assert!(cl * g <= l2 * (1.0 + 1e-10) && l2 <= cu * g * (1.0 + 1e-10));
        }
    }
}
