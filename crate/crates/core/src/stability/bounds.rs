//! Right-hand sides of the long-time stability estimates.
//!
//! The `*_bound_rhs` functions evaluate the estimates with their coefficients
//! exactly as stated (including the unsquared forcing norm and the `16`/`4`
//! velocity coefficients of the natural convection estimate, and the
//! Darcy-number constants of the double-diffusive one).
//! [`coupled_bound_harmonized`] evaluates a version of the coupled estimate
//! derived with squared dual norms throughout, which is the one runs are
//! checked against.

use super::StabilityConstants;

/// `X = ‖W‖_G² + (DΔt/4)‖∇w^{n+1}‖² + (DΔt/16)‖∇w^n‖²`.
pub fn energy_functional(gnorm_sq: f64, diffusivity: f64, dt: f64, grad_new_sq: f64, grad_old_sq: f64) -> f64 {
    gnorm_sq + diffusivity * dt / 4.0 * grad_new_sq + diffusivity * dt / 16.0 * grad_old_sq
}

/// Velocity data of a bound evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityBoundData {
    /// Initial energy functional `X_0`.
    pub x0: f64,
    /// Upper bound of `sup_t ‖f(t)‖_{V_h*}`.
    pub f_dual: f64,
    pub nu: f64,
    pub da_inv: f64,
}

/// Data of one transported scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldBoundData {
    pub x0: f64,
    /// Upper bound of the source dual norm (not squared).
    pub dual: f64,
    pub diffusivity: f64,
    /// Coefficient of the scalar in the momentum buoyancy term.
    pub coupling: f64,
}

/// `(1+α)^{-(n+1)} X_0 + max{8C_P²/(C_l ν²), 2ν⁻¹Δt/3} ‖f‖²`.
pub fn nse_bound_rhs(c: &StabilityConstants, x0: f64, f_dual: f64, n: usize, dt: f64, nu: f64) -> f64 {
    let alpha = c.alpha(nu, dt);
    let decay = (1.0 + alpha).powf(-((n + 1) as f64));
    let coef = (8.0 * c.c_p * c.c_p / (c.c_l * nu * nu)).max(2.0 * dt / (3.0 * nu));
    decay * x0 + coef * f_dual * f_dual
}

/// Natural convection estimate as stated, with `β` from the domain Poincaré
/// constant and `K_α = 49 C_u C_P² ν⁻¹ Ri² Δt / α`.
pub fn natconv_bound_rhs(c: &StabilityConstants, u: &VelocityBoundData, t: &FieldBoundData, n: usize, dt: f64) -> f64 {
    let nu = u.nu;
    let kappa = t.diffusivity;
    let alpha = c.alpha(nu, dt);
    let beta = c.rate_with(kappa, dt, c.c_p);
    let k = c.k_alpha(nu, t.coupling, dt);
    let cp2 = c.c_p * c.c_p;
    let nf = n as f64;
    (1.0 + alpha).powf(-(nf + 1.0)) * u.x0
        + (k + 1.0 / (1.0 + beta)) * (1.0 + beta).powf(-nf) * t.x0
        + (k + 1.0) * (8.0 * cp2 / (c.c_l * kappa * kappa)).max(2.0 * dt / (3.0 * kappa)) * t.dual * t.dual
        + (16.0 * cp2 / (c.c_l * nu * nu)).max(4.0 * dt / (3.0 * nu)) * u.f_dual
}

/// Double-diffusive estimate as stated. `u.x0` must include the Darcy terms
/// `(Da⁻¹Δt/4)‖u⁰‖² + (Da⁻¹Δt/16)‖u⁻¹‖²`. Infinite when `Da⁻¹ = 0` and a
/// buoyancy coupling is active.
pub fn doublediff_bound_rhs(
    c: &StabilityConstants,
    u: &VelocityBoundData,
    t: &FieldBoundData,
    conc: &FieldBoundData,
    n: usize,
    dt: f64,
) -> f64 {
    let nu = u.nu;
    let alpha = c.alpha_darcy(nu, u.da_inv, dt);
    let cp2 = c.c_p * c.c_p;
    let nf = n as f64;
    let mut total = (1.0 + alpha).powf(-(nf + 1.0)) * u.x0;
    for s in [t, conc] {
        let rate = c.rate_with(s.diffusivity, dt, c.c_p);
        let k = c.k_darcy(nu, u.da_inv, s.coupling, dt);
        if k.is_infinite() {
            return f64::INFINITY;
        }
        let d = s.diffusivity;
        total += (k + 1.0 / (1.0 + rate)) * (1.0 + rate).powf(-nf) * s.x0;
        total += (k + 1.0) * (8.0 * cp2 / (c.c_l * d * d)).max(2.0 * dt / (3.0 * d)) * s.dual * s.dual;
    }
    let coef = (8.0 * cp2 / (c.c_l * nu * (nu + cp2 * u.da_inv))).max(2.0 * dt / (3.0 * nu));
    total + coef * u.f_dual * u.f_dual
}

/// Per-field right-hand sides of the harmonized coupled estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledBound {
    pub velocity: f64,
    pub scalars: Vec<f64>,
}

impl CoupledBound {
    pub fn total(&self) -> f64 {
        self.velocity + self.scalars.iter().sum::<f64>()
    }
}

/// Harmonized coupled estimate at step `n + 1`. With `m = 1 + #scalars`,
/// `φ = mΔt/(2ν)`, `c_s = 49 C_u C_P² φ (coupling_s)²` and
/// `q_s = D_s⁻¹Δt/(2β_s)`:
///
/// ```text
/// X_s(n+1) ≤ (1+β_s)^{-(n+1)} X_s0 + q_s G_s²
/// X_U(n+1) ≤ (1+α)^{-(n+1)} X_U0 + Σ_s c_s [X_s0 S_s(n) + q_s G_s² / α] + (φ/α) F²
/// ```
///
/// where `S_s(n) = Σ_{k=0}^{n} r₁^{n+1-k} r₂^k` with `r₁ = 1/(1+α)`,
/// `r₂ = 1/(1+β_s)`. The rates use the Darcy-free `α`, which remains valid
/// for any `Da⁻¹ ≥ 0`, and the scalar Poincaré constant for `β_s`.
pub fn coupled_bound_harmonized(
    c: &StabilityConstants,
    u: &VelocityBoundData,
    scalars: &[FieldBoundData],
    n: usize,
    dt: f64,
) -> CoupledBound {
    let nu = u.nu;
    let m = 1.0 + scalars.len() as f64;
    let phi = m * dt / (2.0 * nu);
    let alpha = c.alpha(nu, dt);
    let r1 = 1.0 / (1.0 + alpha);
    let p = (n + 1) as i32;
    let mut velocity = r1.powi(p) * u.x0 + phi / alpha * u.f_dual * u.f_dual;
    let mut out = Vec::with_capacity(scalars.len());
    for s in scalars {
        let beta = c.scalar_rate(s.diffusivity, dt);
        let r2 = 1.0 / (1.0 + beta);
        let q = dt / (2.0 * s.diffusivity * beta);
        let g2 = s.dual * s.dual;
        out.push(r2.powi(p) * s.x0 + q * g2);
        let cs = 49.0 * c.c_u * c.c_p * c.c_p * phi * s.coupling * s.coupling;
        if cs > 0.0 {
            velocity += cs * (s.x0 * geometric_mix(r1, r2, n) + q * g2 / alpha);
        }
    }
    CoupledBound { velocity, scalars: out }
}

/// `Σ_{k=0}^{n} r₁^{n+1-k} r₂^k`.
fn geometric_mix(r1: f64, r2: f64, n: usize) -> f64 {
    let p = (n + 1) as i32;
    if (r1 - r2).abs() > 1e-6 * r1 {
        r1 * (r1.powi(p) - r2.powi(p)) / (r1 - r2)
    } else {
        (0..=n).map(|k| r1.powi(p - k as i32) * r2.powi(k as i32)).sum()
    }
}
