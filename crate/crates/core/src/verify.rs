//! Randomized property checks of the discrete building blocks and a temporal
//! convergence study of the flow stepper.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_convection_skew, assemble_mass};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fespace::{build_space, FunctionSpace};
use crate::mesh::{structured_triangulation, tag_boundaries, BoundaryTag, Rect, SideTags};
use crate::sparse::SparseMatrix;
use crate::stability::{g_eigen_bounds, g_identity_sides, gnorm_sq, ode_error_constant_ratio, GMatrix, GTriple};
use crate::timestepping::{Discretization, FlowModel, FlowSolver, Scheme, VectorSource};

/// Outcome of one property check.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    /// Worst observed value of the checked quantity.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} cases, worst {:.3e} (tol {:.1e}), {:.2}s{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.worst,
            self.tolerance,
            self.elapsed_s,
            if self.detail.is_empty() { String::new() } else { format!(", {}", self.detail) }
        )
    }
}

fn p2_space(n: usize) -> Result<FunctionSpace> {
    let mesh = Arc::new(structured_triangulation(n, n, Rect::unit_square())?);
    build_space(mesh, 2, 1)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Telescoping G-identity on `sequences` random four-level sequences in a
/// P2 space on a 4x4 mesh. The error is relative to `Σ ‖w_k‖²`.
pub fn g_identity_suite(sequences: usize, seed: u64) -> Result<CheckOutcome> {
    const TOL: f64 = 1e-12;
    let start = Instant::now();
    let space = p2_space(4)?;
    let mass = assemble_mass(&space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..sequences {
        let amp = 10f64.powf(rng.gen_range(-3.0..3.0));
        let w: Vec<Vec<f64>> = (0..4)
            .map(|_| random_vec(&mut rng, space.n_dofs()).into_iter().map(|v| v * amp).collect())
            .collect();
        let (lhs, rhs) = g_identity_sides([&w[0], &w[1], &w[2], &w[3]], &mass)?;
        let scale: f64 = w.iter().map(|l| mass.bilinear(l, l)).sum::<Result<f64>>()?;
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(CheckOutcome {
        name: "g-identity",
        cases: sequences,
        worst,
        tolerance: TOL,
        passed: worst <= TOL,
        detail: String::new(),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// Skew-symmetry of the convection matrix for `fields` random advecting
/// fields on an 8x8 mesh. `worst` is the larger of
/// `‖N + Nᵀ‖_max / ‖N‖_max` (tolerance 1e-13) and
/// `|vᵀNv| / Σ|v_i N_ij v_j|` rescaled to the same tolerance.
pub fn skew_symmetry_suite(fields: usize, seed: u64) -> Result<CheckOutcome> {
    const SYM_TOL: f64 = 1e-13;
    const FORM_TOL: f64 = 1e-12;
    let start = Instant::now();
    let mesh = Arc::new(structured_triangulation(8, 8, Rect::unit_square())?);
    let scalar = build_space(Arc::clone(&mesh), 2, 1)?;
    let vel = build_space(mesh, 2, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_sym, mut worst_form): (f64, f64) = (0.0, 0.0);
    for _ in 0..fields {
        let w = random_vec(&mut rng, vel.n_dofs());
        let n = assemble_convection_skew(&scalar, &vel, &w)?;
        let sum = n.add_scaled(1.0, &n.transpose())?;
        worst_sym = worst_sym.max(sum.max_abs() / n.max_abs());
        let v = random_vec(&mut rng, scalar.n_dofs());
        let form = n.bilinear(&v, &v)?;
        worst_form = worst_form.max(form.abs() / abs_form(&n, &v));
    }
    let worst = worst_sym.max(worst_form * SYM_TOL / FORM_TOL);
    Ok(CheckOutcome {
        name: "skew-symmetry",
        cases: fields,
        worst,
        tolerance: SYM_TOL,
        passed: worst_sym <= SYM_TOL && worst_form <= FORM_TOL,
        detail: format!("‖N+Nᵀ‖ ratio {worst_sym:.2e}, |vᵀNv| ratio {worst_form:.2e}"),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

fn abs_form(n: &SparseMatrix, v: &[f64]) -> f64 {
    (0..n.nrows()).map(|i| n.row(i).map(|(j, a)| (v[i] * a * v[j]).abs()).sum::<f64>()).sum()
}

/// Positivity of `G` and `C_l ‖W‖_G² ≤ ‖W‖² ≤ C_u ‖W‖_G²` on `triples`
/// random level triples, half of them concentrated along eigenvectors of
/// `G` so that both inequalities are nearly sharp. `worst` is the largest
/// relative violation (negative when all hold).
pub fn norm_equivalence_suite(triples: usize, seed: u64) -> Result<CheckOutcome> {
    const SLACK: f64 = 1e-10;
    let start = Instant::now();
    let ev = GMatrix::standard().eigenvalues();
    let (c_l, c_u) = g_eigen_bounds();
    let g = GMatrix::standard().entries;
    let eig = SymmetricEigen::new(Matrix3::from_fn(|i, j| g[i][j]));
    let space = p2_space(4)?;
    let mass = assemble_mass(&space);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..triples {
        let levels: Vec<Vec<f64>> = if k % 2 == 0 {
            (0..3).map(|_| random_vec(&mut rng, space.n_dofs())).collect()
        } else {
            let e = eig.eigenvectors.column(k / 2 % 3);
            let phi = random_vec(&mut rng, space.n_dofs());
            let noise = 1e-3 * rng.gen_range(0.0..1.0);
            (0..3)
                .map(|i| phi.iter().map(|p| e[i] * p + noise * rng.gen_range(-1.0..1.0)).collect())
                .collect()
        };
        let t = GTriple::new([&levels[0], &levels[1], &levels[2]], &mass)?;
        let (w2, wg) = (t.l2_sq()?, gnorm_sq(&t)?);
        worst = worst.max((c_l * wg - w2) / w2).max((w2 - c_u * wg) / w2);
        lo = lo.min(w2 / wg);
        hi = hi.max(w2 / wg);
    }
    let positive = ev.iter().all(|&l| l > 0.0);
    Ok(CheckOutcome {
        name: "g-eigen-bounds",
        cases: triples,
        worst,
        tolerance: SLACK,
        passed: positive && worst <= SLACK,
        detail: format!(
            "eigenvalues {:.6e} {:.6e} {:.6e}, ‖W‖²/‖W‖_G² in [{lo:.4}, {hi:.2}] vs [{c_l:.4}, {c_u:.2}]",
            ev[0], ev[1], ev[2]
        ),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// Error-constant ratio of the two schemes on `y' = -y` over `[0, 1]` with
/// exact history, at `Δt = 2⁻⁸`, together with the observed orders between
/// `2⁻⁷` and `2⁻⁸`. `worst` is the ratio; it must lie in `[0.45, 0.55]` and
/// both orders in `2 ± 0.2`.
pub fn ode_ratio_check() -> Result<CheckOutcome> {
    let start = Instant::now();
    let dts = [2f64.powi(-7), 2f64.powi(-8)];
    let cmp = ode_error_constant_ratio(-1.0, 1.0, 1.0, &dts)?;
    let order_b = (cmp[0].error_blebdf / cmp[1].error_blebdf).log2();
    let order_2 = (cmp[0].error_bdf2 / cmp[1].error_bdf2).log2();
    let ratio = cmp[1].ratio;
    let passed = (0.45..=0.55).contains(&ratio) && (order_b - 2.0).abs() <= 0.2 && (order_2 - 2.0).abs() <= 0.2;
    Ok(CheckOutcome {
        name: "ode-error-ratio",
        cases: 2,
        worst: ratio,
        tolerance: 0.55,
        passed,
        detail: format!("orders blebdf {order_b:.3} bdf2 {order_2:.3}"),
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}

/// The four property checks with their standard case counts.
pub fn property_suite(seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        g_identity_suite(1000, seed)?,
        skew_symmetry_suite(100, seed.wrapping_add(1))?,
        norm_equivalence_suite(1000, seed.wrapping_add(2))?,
        ode_ratio_check()?,
    ])
}

fn s0(z: f64) -> f64 {
    (PI * z).sin().powi(2)
}
fn s1(z: f64) -> f64 {
    PI * (2.0 * PI * z).sin()
}
fn s2(z: f64) -> f64 {
    2.0 * PI * PI * (2.0 * PI * z).cos()
}
fn s3(z: f64) -> f64 {
    -4.0 * PI.powi(3) * (2.0 * PI * z).sin()
}

/// `u = sin³t · curl(sin²πx sin²πy)`, divergence free and zero on the
/// boundary of the unit square.
pub fn manufactured_velocity(x: f64, y: f64, t: f64) -> [f64; 2] {
    let g = t.sin().powi(3);
    [g * s0(x) * s1(y), -g * s1(x) * s0(y)]
}

/// Body force making [`manufactured_velocity`] with zero pressure an exact
/// solution of the momentum equation with viscosity `nu`.
pub fn manufactured_forcing(nu: f64) -> impl Fn(f64, f64, f64) -> [f64; 2] + Send + Sync + Clone {
    move |x, y, t| {
        let g = t.sin().powi(3);
        let dg = 3.0 * t.sin().powi(2) * t.cos();
        let u = [s0(x) * s1(y), -s1(x) * s0(y)];
        let grad = [[s1(x) * s1(y), s0(x) * s2(y)], [-s2(x) * s0(y), -s1(x) * s1(y)]];
        let lap = [s2(x) * s1(y) + s0(x) * s3(y), -s3(x) * s0(y) - s1(x) * s2(y)];
        let mut f = [0.0; 2];
        for c in 0..2 {
            let adv = u[0] * grad[c][0] + u[1] * grad[c][1];
            f[c] = dg * u[c] + g * g * adv - nu * g * lap[c];
        }
        f
    }
}

/// Temporal errors of one scheme at the final time against a fine-step
/// reference on the same mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStudy {
    pub scheme: Scheme,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// Observed orders between consecutive step sizes.
    pub rates: Vec<f64>,
    /// Least-squares slope of `log error` against `log Δt`.
    pub fitted_order: f64,
}

/// Runs the manufactured problem on an `n x n` mesh up to `t_end` with
/// steps `t_end / k` for each `k` in `levels`, measuring the `L2` error of
/// the final velocity against the solution with step `t_end / reference`.
pub fn temporal_convergence(
    scheme: Scheme,
    n: usize,
    nu: f64,
    t_end: f64,
    levels: &[usize],
    reference: usize,
    exec: Execution,
) -> Result<ConvergenceStudy> {
    if levels.len() < 2 || levels.iter().any(|&k| k == 0 || k >= reference) {
        return Err(Error::Config("need at least two step counts, all below the reference".into()));
    }
    let mesh = tag_boundaries(
        structured_triangulation(n, n, Rect::unit_square())?,
        &SideTags::uniform(BoundaryTag::DirichletWall),
    )?;
    let disc = Arc::new(Discretization::new(Arc::new(mesh), exec)?);
    let forcing = manufactured_forcing(nu);
    let final_velocity = |steps: usize| -> Result<Vec<f64>> {
        let f = forcing.clone();
        let model = FlowModel::nse(
            nu,
            Some(VectorSource {
                f: Arc::new(f),
                steady: false,
            }),
        );
        let solver = FlowSolver::new(Arc::clone(&disc), model, scheme, t_end / steps as f64, exec)?;
        let mut state = solver.initial_state(vec![0.0; disc.velocity.n_dofs()], None, None)?;
        solver.run(&mut state, steps, |_, _, _| Ok(()))?;
        Ok(state.velocity.current().to_vec())
    };
    let u_ref = final_velocity(reference)?;
    let errors = levels
        .iter()
        .map(|&k| {
            let u = final_velocity(k)?;
            let e: Vec<f64> = u.iter().zip(&u_ref).map(|(a, b)| a - b).collect();
            Ok(disc.mass_velocity.bilinear(&e, &e)?.max(0.0).sqrt())
        })
        .collect::<Result<Vec<f64>>>()?;
    let dts: Vec<f64> = levels.iter().map(|&k| t_end / k as f64).collect();
    let rates = errors
        .windows(2)
        .zip(dts.windows(2))
        .map(|(e, d)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect();
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(ConvergenceStudy {
        scheme,
        dts,
        errors,
        rates,
        fitted_order: sxy / sxx,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Standard study: 8x8 mesh, `ν = 0.1`, `T = 1`, `Δt = T/8 … T/64` against
/// `T/512`.
pub fn standard_temporal_convergence(scheme: Scheme, exec: Execution) -> Result<ConvergenceStudy> {
    temporal_convergence(scheme, 8, 0.1, 1.0, &[8, 16, 32, 64], 512, exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(g_identity_suite(20, 1).unwrap().passed);
        assert!(skew_symmetry_suite(3, 2).unwrap().passed);
        let eq = norm_equivalence_suite(30, 3).unwrap();
        assert!(eq.passed, "{eq}");
        assert!(ode_ratio_check().unwrap().passed);
    }

    #[test]
    fn eigen_aligned_triples_are_nearly_sharp() {
        let eq = norm_equivalence_suite(60, 9).unwrap();
        assert!(eq.worst > -1e-2, "{eq}");
    }

    #[test]
    fn manufactured_velocity_is_solenoidal_and_vanishes_on_walls() {
        let h = 1e-6;
        for &(x, y, t) in &[(0.3, 0.7, 0.4), (0.55, 0.1, 1.0)] {
            let dx = (manufactured_velocity(x + h, y, t)[0] - manufactured_velocity(x - h, y, t)[0]) / (2.0 * h);
            let dy = (manufactured_velocity(x, y + h, t)[1] - manufactured_velocity(x, y - h, t)[1]) / (2.0 * h);
            assert!((dx + dy).abs() < 1e-7);
        }
        for s in [0.0, 0.37, 1.0] {
            for p in [[s, 0.0], [s, 1.0], [0.0, s], [1.0, s]] {
                let u = manufactured_velocity(p[0], p[1], 0.8);
                assert!(u[0].abs() < 1e-12 && u[1].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn manufactured_forcing_matches_finite_differences() {
        let nu = 0.1;
        let f = manufactured_forcing(nu);
        let u = manufactured_velocity;
        let h = 1e-4;
        let (x, y, t) = (0.31, 0.62, 0.7);
        for c in 0..2 {
            let ut = (u(x, y, t + h)[c] - u(x, y, t - h)[c]) / (2.0 * h);
            let ux = (u(x + h, y, t)[c] - u(x - h, y, t)[c]) / (2.0 * h);
            let uy = (u(x, y + h, t)[c] - u(x, y - h, t)[c]) / (2.0 * h);
            let lap = (u(x + h, y, t)[c] + u(x - h, y, t)[c] + u(x, y + h, t)[c] + u(x, y - h, t)[c]
                - 4.0 * u(x, y, t)[c])
                / (h * h);
            let w = u(x, y, t);
            let expect = ut + w[0] * ux + w[1] * uy - nu * lap;
            assert!((f(x, y, t)[c] - expect).abs() < 1e-4 * (1.0 + expect.abs()), "{c}");
        }
    }

    #[test]
    fn coarse_temporal_study_shows_second_order() {
        let s = temporal_convergence(Scheme::Blebdf, 4, 0.1, 1.0, &[8, 16], 64, Execution::Sequential).unwrap();
        assert_eq!(s.rates.len(), 1);
        assert!(s.errors[1] < s.errors[0]);
        assert!(s.fitted_order > 1.5, "{s:?}");
        assert!(temporal_convergence(Scheme::Bdf2, 4, 0.1, 1.0, &[8], 64, Execution::Sequential).is_err());
    }
}
