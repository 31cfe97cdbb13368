//! Stability toolkit: G-norms, Poincaré constants, long-time bound
//! evaluators, the per-step energy ledger and the ODE error-constant harness.

pub mod bounds;
pub mod gmatrix;
pub mod ledger;

pub use bounds::{
    coupled_bound_harmonized, doublediff_bound_rhs, energy_functional, natconv_bound_rhs, nse_bound_rhs, CoupledBound,
    FieldBoundData, VelocityBoundData,
};
pub use gmatrix::{g_eigen_bounds, g_identity_sides, gnorm_sq, verify_g_identity, GMatrix, GTriple, C_L, C_U, G_EIGENVALUES};
pub use ledger::{EnergyLedger, FieldLedger, LedgerEntry};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh, Rect, Side};
use crate::timestepping::{scalar_ode_step, step_count, SchemeCoeffs};

/// `‖v‖ ≤ C_P ‖∇v‖` for `v` vanishing on the whole boundary of `rect`:
/// `C_P = 1/√λ₁` with `λ₁ = π²(1/a² + 1/b²)`.
pub fn poincare_constant(rect: &Rect) -> f64 {
    let (a, b) = (rect.width(), rect.height());
    1.0 / (PI * PI * (1.0 / (a * a) + 1.0 / (b * b))).sqrt()
}

/// Poincaré constant for functions vanishing only on the listed sides of
/// `rect` (zero flux elsewhere). Fails when no side is essential.
pub fn poincare_constant_mixed(rect: &Rect, essential: &[Side]) -> Result<f64> {
    let has = |s: Side| essential.contains(&s);
    let mode = |lo: bool, hi: bool, len: f64| match (lo, hi) {
        (true, true) => (PI / len).powi(2),
        (true, false) | (false, true) => (PI / (2.0 * len)).powi(2),
        (false, false) => 0.0,
    };
    let lambda = mode(has(Side::Left), has(Side::Right), rect.width()) + mode(has(Side::Bottom), has(Side::Top), rect.height());
    if lambda <= 0.0 {
        return Err(Error::Config("no essential boundary side: Poincaré constant is unbounded".into()));
    }
    Ok(1.0 / lambda.sqrt())
}

/// Poincaré constant of the scalar spaces of `mesh`, whose essential sides
/// are those tagged `DirichletWall` or `GammaT`.
pub fn scalar_poincare_constant(mesh: &Mesh) -> Result<f64> {
    let mut sides = mesh.sides_with_tag(BoundaryTag::DirichletWall);
    sides.extend(mesh.sides_with_tag(BoundaryTag::GammaT));
    poincare_constant_mixed(&mesh.rect, &sides)
}

/// Constants entering the long-time bounds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityConstants {
    pub c_l: f64,
    pub c_u: f64,
    /// Poincaré constant of the velocity space.
    pub c_p: f64,
    /// Poincaré constant of the scalar spaces (mixed boundary conditions).
    pub c_p_scalar: f64,
}

impl StabilityConstants {
    pub fn new(c_p: f64, c_p_scalar: f64) -> Self {
        let (c_l, c_u) = g_eigen_bounds();
        StabilityConstants {
            c_l,
            c_u,
            c_p,
            c_p_scalar,
        }
    }

    pub fn for_mesh(mesh: &Mesh) -> Self {
        let c_p = poincare_constant(&mesh.rect);
        let c_p_scalar = scalar_poincare_constant(mesh).unwrap_or(f64::INFINITY);
        StabilityConstants::new(c_p, c_p_scalar)
    }

    /// `min{C_l D Δt / (16 C²), 3/4}` for a given Poincaré constant `C`.
    pub fn rate_with(&self, diffusivity: f64, dt: f64, c: f64) -> f64 {
        (self.c_l * diffusivity * dt / (16.0 * c * c)).min(0.75)
    }

    /// Velocity decay rate α.
    pub fn alpha(&self, nu: f64, dt: f64) -> f64 {
        self.rate_with(nu, dt, self.c_p)
    }

    /// Velocity decay rate including Darcy drag, `min{C_l(ν + C_P² Da⁻¹)Δt/(16C_P²), 3/4}`.
    pub fn alpha_darcy(&self, nu: f64, da_inv: f64, dt: f64) -> f64 {
        self.rate_with(nu + self.c_p * self.c_p * da_inv, dt, self.c_p)
    }

    /// Scalar decay rate (β for temperature, δ for concentration) using the
    /// scalar Poincaré constant.
    pub fn scalar_rate(&self, diffusivity: f64, dt: f64) -> f64 {
        self.rate_with(diffusivity, dt, self.c_p_scalar)
    }

    /// Natural convection coupling `K_α = 49 C_u C_P² ν⁻¹ Ri² Δt / α`.
    pub fn k_alpha(&self, nu: f64, ri: f64, dt: f64) -> f64 {
        49.0 * self.c_u * self.c_p * self.c_p * ri * ri * dt / (nu * self.alpha(nu, dt))
    }

    /// Darcy coupling `49 C_u Da Δt (β g)² / α`; infinite for `Da⁻¹ = 0`
    /// unless the coupling vanishes.
    pub fn k_darcy(&self, nu: f64, da_inv: f64, coupling: f64, dt: f64) -> f64 {
        if coupling == 0.0 {
            return 0.0;
        }
        let da = 1.0 / da_inv;
        49.0 * self.c_u * da * dt * coupling * coupling / self.alpha_darcy(nu, da_inv, dt)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OdeErrorComparison {
    pub dt: f64,
    pub error_blebdf: f64,
    pub error_bdf2: f64,
    pub ratio: f64,
}

/// Maximum nodal error of a scheme on `y' = λy`, `y(0) = y0`, over
/// `[0, t_end]`, with the history seeded from the exact solution.
pub fn ode_max_error(coeffs: &SchemeCoeffs, lambda: f64, y0: f64, t_end: f64, dt: f64) -> Result<f64> {
    let n = step_count(t_end, dt)?;
    let exact = |t: f64| y0 * (lambda * t).exp();
    let mut h = [exact(0.0), exact(-dt), exact(-2.0 * dt)];
    let mut err: f64 = 0.0;
    for k in 1..=n {
        let y = scalar_ode_step(coeffs, h, lambda, dt);
        h = [y, h[0], h[1]];
        err = err.max((y - exact(k as f64 * dt)).abs());
    }
    Ok(err)
}

/// Error ratio BLEBDF / BDF2 on `y' = λy` for each step size.
pub fn ode_error_constant_ratio(lambda: f64, y0: f64, t_end: f64, dts: &[f64]) -> Result<Vec<OdeErrorComparison>> {
    if !(lambda < 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "decay rate must be negative",
        });
    }
    dts.iter()
        .map(|&dt| {
            let error_blebdf = ode_max_error(&SchemeCoeffs::BLEBDF, lambda, y0, t_end, dt)?;
            let error_bdf2 = ode_max_error(&SchemeCoeffs::BDF2, lambda, y0, t_end, dt)?;
            Ok(OdeErrorComparison {
                dt,
                error_blebdf,
                error_bdf2,
                ratio: error_blebdf / error_bdf2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_triangulation, tag_boundaries, SideTags};

    #[test]
    fn poincare_constants() {
        assert!((poincare_constant(&Rect::unit_square()) - 0.225_079_079_039_276_51).abs() < 1e-15);
        let tall = Rect::new(0.0, 1.0, 0.0, 2.0).unwrap();
        assert!((poincare_constant(&tall) - 0.284_705_017_366_870_8).abs() < 1e-15);
        let big = Rect::new(0.0, 2.0, 0.0, 2.0).unwrap();
        assert!((poincare_constant(&big) - 2.0 * poincare_constant(&Rect::unit_square())).abs() < 1e-15);
        let vertical = poincare_constant_mixed(&tall, &[Side::Left, Side::Right]).unwrap();
        assert!((vertical - 1.0 / PI).abs() < 1e-15);
        let one = poincare_constant_mixed(&Rect::unit_square(), &[Side::Left]).unwrap();
        assert!((one - 2.0 / PI).abs() < 1e-15);
        assert!(poincare_constant_mixed(&tall, &[]).is_err());
        let all = poincare_constant_mixed(&tall, &Side::ALL).unwrap();
        assert!((all - poincare_constant(&tall)).abs() < 1e-15);
    }

    #[test]
    fn scalar_constant_follows_tags() {
        let m = structured_triangulation(2, 2, Rect::unit_square()).unwrap();
        let m = tag_boundaries(m, &SideTags::differentially_heated()).unwrap();
        assert!((scalar_poincare_constant(&m).unwrap() - 1.0 / PI).abs() < 1e-15);
        let c = StabilityConstants::for_mesh(&m);
        assert!((c.c_u - C_U).abs() < 1e-9 && (c.c_l - C_L).abs() < 1e-12);
        assert_eq!(c.alpha(1e6, 1.0), 0.75);
        assert_eq!(c.alpha_darcy(0.1, 0.0, 0.5), c.alpha(0.1, 0.5));
        assert!(c.k_darcy(1.0, 0.0, 2.0, 0.1).is_infinite());
        assert_eq!(c.k_darcy(1.0, 0.0, 0.0, 0.1), 0.0);
        assert_eq!(c.k_alpha(1.0, 0.0, 0.1), 0.0);
    }

    #[test]
    fn ode_error_ratio_is_one_half() {
        let r = ode_error_constant_ratio(-1.0, 1.0, 1.0, &[1.0 / 128.0, 1.0 / 256.0]).unwrap();
        assert!((r[1].ratio - 0.498_53).abs() < 5e-5, "{}", r[1].ratio);
        for s in [r[0].error_blebdf / r[1].error_blebdf, r[0].error_bdf2 / r[1].error_bdf2] {
            let order = s.log2();
            assert!((order - 2.0).abs() < 0.2, "{order}");
        }
        assert!(ode_error_constant_ratio(1.0, 1.0, 1.0, &[0.1]).is_err());
    }
}
