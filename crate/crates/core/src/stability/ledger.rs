//! Per-step energy bookkeeping of a BLEBDF run: the discrete energy identity,
//! the one-step stability inequality and the long-time bounds.
//!
//! Scalars with nonhomogeneous essential data are tracked through their
//! lifted part `s̃ = s − s_lift`, where `s_lift` is the nodal interpolant of
//! the wall data. The momentum load then splits into the effective forcing
//! `f + Σ c_s s_lift e₂`, whose dual norm is over-bounded by
//! `C_P (‖f‖ + Σ |c_s| ‖s_lift‖)`, and the coupling `Σ c_s (s̃* e₂, ·)`.

use crate::assembly::function_l2_norm;
use crate::error::{Error, Result};
use crate::sparse::{combine, dot, SparseMatrix};
use crate::timestepping::{FieldHistory, FlowSolver, FlowState, Scheme, SchemeCoeffs, StepReport};

use super::bounds::{
    coupled_bound_harmonized, doublediff_bound_rhs, energy_functional, natconv_bound_rhs, nse_bound_rhs, CoupledBound,
    FieldBoundData, VelocityBoundData,
};
use super::gmatrix::GMatrix;
use super::StabilityConstants;

/// Relative tolerance on the energy identity residual.
pub const IDENTITY_TOL: f64 = 1e-10;

/// Relative slack granted to inequalities for rounding.
pub const ROUNDING_SLACK: f64 = 1e-10;

/// Energy quantities of one field at one step.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldLedger {
    /// `|LHS − RHS| / Σ|terms|` of the energy identity.
    pub identity_residual: f64,
    /// G-norm increment plus jump and half the dissipation.
    pub inequality_lhs: f64,
    /// Young bound of the data work.
    pub inequality_rhs: f64,
    /// Magnitude scale of the inequality terms.
    pub scale: f64,
    /// `‖W_{n+1}‖_G²`.
    pub gnorm_sq: f64,
    /// Energy functional `X_{n+1}`.
    pub energy: f64,
    /// `‖w^{n+1}‖²`.
    pub l2_sq: f64,
    /// `‖∇w^{n+1}‖²`.
    pub grad_sq: f64,
}

impl FieldLedger {
    pub fn inequality_holds(&self) -> bool {
        self.inequality_lhs <= self.inequality_rhs + ROUNDING_SLACK * self.scale
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LedgerEntry {
    pub step: usize,
    pub t: f64,
    pub velocity: FieldLedger,
    /// Lifted scalar fields, temperature first.
    pub scalars: Vec<FieldLedger>,
    /// Harmonized coupled bound on the energy functionals.
    pub bound: CoupledBound,
    /// Left side of the estimate in its stated form.
    pub printed_lhs: f64,
    /// Right side of the estimate in its stated form.
    pub printed_rhs: f64,
}

impl LedgerEntry {
    /// Failed checks, as human-readable messages.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let fields = std::iter::once(("velocity", &self.velocity, self.bound.velocity))
            .chain(self.scalars.iter().zip(&self.bound.scalars).enumerate().map(|(k, (f, b))| {
                (if k == 0 { "scalar 0" } else { "scalar 1" }, f, *b)
            }));
        for (name, f, bound) in fields {
            if !(f.identity_residual <= IDENTITY_TOL) {
                out.push(format!(
                    "step {}: {name} energy identity residual {:e}",
                    self.step, f.identity_residual
                ));
            }
            if !f.inequality_holds() {
                out.push(format!(
                    "step {}: {name} one-step inequality {:e} > {:e}",
                    self.step, f.inequality_lhs, f.inequality_rhs
                ));
            }
            if !(f.energy <= bound * (1.0 + ROUNDING_SLACK)) {
                out.push(format!("step {}: {name} energy {:e} exceeds bound {:e}", self.step, f.energy, bound));
            }
        }
        out
    }

    pub fn printed_holds(&self) -> bool {
        self.printed_lhs <= self.printed_rhs * (1.0 + ROUNDING_SLACK)
    }

    /// `C_u` times the velocity bound: an upper bound of `‖u^{n+1}‖²`.
    pub fn velocity_l2_sq_bound(&self, c_u: f64) -> f64 {
        c_u * self.bound.velocity
    }
}

struct ScalarTrack {
    diffusivity: f64,
    coupling: f64,
    lift: Vec<f64>,
    x0: f64,
    dual_sq_sup: f64,
}

/// Accumulates [`LedgerEntry`] values over a BLEBDF run with time-independent
/// forcing.
pub struct EnergyLedger {
    constants: StabilityConstants,
    mass_s: SparseMatrix,
    stiff_s: SparseMatrix,
    mass_v: SparseMatrix,
    stiff_v: SparseMatrix,
    dt: f64,
    nu: f64,
    da_inv: f64,
    f_dual: f64,
    x_u0: f64,
    x_u0_darcy: f64,
    scalars: Vec<ScalarTrack>,
}

impl EnergyLedger {
    pub fn new(solver: &FlowSolver, initial: &FlowState) -> Result<Self> {
        if solver.coeffs().scheme != Scheme::Blebdf {
            return Err(Error::Config("the energy ledger applies to the blebdf scheme only".into()));
        }
        let d = solver.discretization();
        let model = solver.model();
        let mesh = d.mesh();
        let constants = StabilityConstants::for_mesh(mesh);
        let f_l2 = match &model.forcing {
            None => 0.0,
            Some(s) if s.steady => function_l2_norm(mesh, |x, y, t| (s.f)(x, y, t), 0.0),
            Some(_) => {
                return Err(Error::Config("the energy ledger requires time-independent forcing".into()));
            }
        };
        let dt = solver.dt();
        let mut lift_norms = 0.0;
        let mut scalars = Vec::new();
        for (k, (field, hist)) in model.scalars().into_iter().zip(initial.scalars()).enumerate() {
            let lift = solver.lift(k).to_vec();
            lift_norms += field.buoyancy.abs() * d.mass_scalar.bilinear(&lift, &lift)?.max(0.0).sqrt();
            let lifted = lifted_levels(hist, &lift);
            let x0 = initial_energy(&lifted, &d.mass_scalar, &d.stiffness_scalar, field.diffusivity, dt)?;
            scalars.push(ScalarTrack {
                diffusivity: field.diffusivity,
                coupling: field.buoyancy,
                lift,
                x0,
                dual_sq_sup: 0.0,
            });
        }
        let u = initial.velocity.levels();
        let lv = [u[0].clone(), u[1].clone(), u[2].clone()];
        let x_u0 = initial_energy(&lv, &d.mass_velocity, &d.stiffness_velocity, model.nu, dt)?;
        let l2 = |w: &[f64]| d.mass_velocity.bilinear(w, w);
        let x_u0_darcy = x_u0 + model.da_inv * dt * (l2(&u[0])? / 4.0 + l2(&u[1])? / 16.0);
        Ok(EnergyLedger {
            constants,
            mass_s: d.mass_scalar.clone(),
            stiff_s: d.stiffness_scalar.clone(),
            mass_v: d.mass_velocity.clone(),
            stiff_v: d.stiffness_velocity.clone(),
            dt,
            nu: model.nu,
            da_inv: model.da_inv,
            f_dual: constants.c_p * (f_l2 + lift_norms),
            x_u0,
            x_u0_darcy,
            scalars,
        })
    }

    pub fn constants(&self) -> &StabilityConstants {
        &self.constants
    }

    /// Over-bound of the effective forcing dual norm.
    pub fn forcing_dual(&self) -> f64 {
        self.f_dual
    }

    pub fn initial_velocity_energy(&self) -> f64 {
        self.x_u0
    }

    /// Books the step `prev → cur` described by `report`.
    pub fn record(&mut self, prev: &FlowState, cur: &FlowState, report: &StepReport) -> Result<LedgerEntry> {
        let dt = self.dt;
        let a = SchemeCoeffs::BLEBDF;
        let m = 1.0 + self.scalars.len() as f64;
        let phi = m * dt / (2.0 * self.nu);

        let prev_s = prev.scalars();
        let cur_s = cur.scalars();
        if prev_s.len() != self.scalars.len() || cur_s.len() != self.scalars.len() || report.scalars.len() != self.scalars.len() {
            return Err(Error::Config("state scalar fields do not match the ledger".into()));
        }

        let mut coupling_sq = 0.0;
        let mut scalars = Vec::with_capacity(self.scalars.len());
        for (k, track) in self.scalars.iter_mut().enumerate() {
            let star = combine(&[(1.0, &prev_s[k].extrapolate(&a)), (-1.0, &track.lift)]);
            let c_p = self.constants.c_p;
            coupling_sq += c_p * c_p * track.coupling * track.coupling * self.mass_s.bilinear(&star, &star)?;

            let data = &report.scalars[k];
            track.dual_sq_sup = track.dual_sq_sup.max(data.source_dual_sq);
            let p = lifted_levels(prev_s[k], &track.lift);
            let c = lifted_levels(cur_s[k], &track.lift);
            let four = [c[0].as_slice(), &p[0], &p[1], &p[2]];
            let e = step_energy(four, &self.mass_s, &self.stiff_s, track.diffusivity, 0.0, dt, dt * data.source_work)?;
            let d = track.diffusivity;
            let inequality_rhs = dt / (2.0 * d) * data.source_dual_sq;
            scalars.push(e.finish(d, dt, inequality_rhs));
        }

        let c = cur.velocity.levels();
        let p = prev.velocity.levels();
        let four = [c[0].as_slice(), &p[0], &p[1], &p[2]];
        let e = step_energy(four, &self.mass_v, &self.stiff_v, self.nu, self.da_inv, dt, dt * report.load_work)?;
        let inequality_rhs = phi * (self.f_dual * self.f_dual + coupling_sq);
        let velocity = e.finish(self.nu, dt, inequality_rhs);

        let n = report.step - 1;
        let u = VelocityBoundData {
            x0: self.x_u0,
            f_dual: self.f_dual,
            nu: self.nu,
            da_inv: self.da_inv,
        };
        let data: Vec<FieldBoundData> = self
            .scalars
            .iter()
            .map(|s| FieldBoundData {
                x0: s.x0,
                dual: s.dual_sq_sup.sqrt(),
                diffusivity: s.diffusivity,
                coupling: s.coupling,
            })
            .collect();
        let bound = coupled_bound_harmonized(&self.constants, &u, &data, n, dt);

        let quarter = |d: f64, f: &FieldLedger| d * dt / 4.0 * f.grad_sq;
        let (printed_lhs, printed_rhs) = match data.as_slice() {
            [] => (velocity.energy, nse_bound_rhs(&self.constants, u.x0, u.f_dual, n, dt, u.nu)),
            [t] => (
                velocity.gnorm_sq + scalars[0].gnorm_sq + quarter(self.nu, &velocity) + quarter(t.diffusivity, &scalars[0]),
                natconv_bound_rhs(&self.constants, &u, t, n, dt),
            ),
            [t, cc] => {
                let lhs = velocity.gnorm_sq
                    + scalars.iter().map(|s| s.gnorm_sq).sum::<f64>()
                    + quarter(self.nu, &velocity)
                    + quarter(t.diffusivity, &scalars[0])
                    + quarter(cc.diffusivity, &scalars[1])
                    + self.da_inv * dt / 4.0 * velocity.l2_sq;
                let ud = VelocityBoundData {
                    x0: self.x_u0_darcy,
                    ..u
                };
                (lhs, doublediff_bound_rhs(&self.constants, &ud, t, cc, n, dt))
            }
            _ => unreachable!("at most two scalar fields"),
        };

        Ok(LedgerEntry {
            step: report.step,
            t: report.t,
            velocity,
            scalars,
            bound,
            printed_lhs,
            printed_rhs,
        })
    }
}

fn lifted_levels(h: &FieldHistory, lift: &[f64]) -> [Vec<f64>; 3] {
    let l = h.levels();
    [0, 1, 2].map(|k| combine(&[(1.0, &l[k]), (-1.0, lift)]))
}

fn initial_energy(levels: &[Vec<f64>; 3], mass: &SparseMatrix, stiff: &SparseMatrix, d: f64, dt: f64) -> Result<f64> {
    let gram = gram(&[&levels[0], &levels[1], &levels[2]], mass)?;
    let g = GMatrix::standard().quadratic_form(&[
        [gram[0][0], gram[0][1], gram[0][2]],
        [gram[1][0], gram[1][1], gram[1][2]],
        [gram[2][0], gram[2][1], gram[2][2]],
    ]);
    Ok(energy_functional(
        g,
        d,
        dt,
        stiff.bilinear(&levels[0], &levels[0])?,
        stiff.bilinear(&levels[1], &levels[1])?,
    ))
}

fn gram(levels: &[&[f64]], mass: &SparseMatrix) -> Result<Vec<Vec<f64>>> {
    let m: Vec<Vec<f64>> = levels.iter().map(|l| mass.matvec(l)).collect::<Result<_>>()?;
    let n = levels.len();
    let mut g = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            g[i][j] = dot(&m[i], levels[j]);
            g[j][i] = g[i][j];
        }
    }
    Ok(g)
}

struct StepEnergy {
    g_new: f64,
    g_old: f64,
    jump: f64,
    diss: f64,
    drag: f64,
    l2_sq: f64,
    grad_sq: f64,
    grad_old_sq: f64,
    identity_residual: f64,
    scale: f64,
}

impl StepEnergy {
    fn finish(self, d: f64, dt: f64, inequality_rhs: f64) -> FieldLedger {
        FieldLedger {
            identity_residual: self.identity_residual,
            inequality_lhs: self.g_new - self.g_old + self.jump / 12.0 + self.diss / 2.0 + self.drag,
            inequality_rhs,
            scale: self.scale + inequality_rhs,
            gnorm_sq: self.g_new,
            energy: energy_functional(self.g_new, d, dt, self.grad_sq, self.grad_old_sq),
            l2_sq: self.l2_sq,
            grad_sq: self.grad_sq,
        }
    }
}

/// Energy terms of one field for levels `(w^{n+1}, w^n, w^{n-1}, w^{n-2})`
/// with diffusion `d`, zeroth-order coefficient `r` and data work `work`
/// (already multiplied by the step).
fn step_energy(levels: [&[f64]; 4], mass: &SparseMatrix, stiff: &SparseMatrix, d: f64, r: f64, dt: f64, work: f64) -> Result<StepEnergy> {
    let gram = gram(&levels, mass)?;
    let g = GMatrix::standard();
    let sub = |o: usize| {
        let mut s = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = gram[i + o][j + o];
            }
        }
        s
    };
    let g_new = g.quadratic_form(&sub(0));
    let g_old = g.quadratic_form(&sub(1));
    let c = [1.0, -3.0, 3.0, -1.0];
    let mut jump = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            jump += c[i] * c[j] * gram[i][j];
        }
    }
    let grad_sq = stiff.bilinear(levels[0], levels[0])?;
    let grad_old_sq = stiff.bilinear(levels[1], levels[1])?;
    let l2_sq = gram[0][0];
    let diss = dt * d * grad_sq;
    let drag = dt * r * l2_sq;
    let a = SchemeCoeffs::BLEBDF.derivative;
    let deriv_scale: f64 = (0..4).map(|k| (a[k] * gram[0][k]).abs()).sum();
    let lhs = g_new - g_old + jump / 12.0 + diss + drag;
    let scale = deriv_scale + diss + drag + work.abs();
    let identity_residual = if scale > 0.0 { (lhs - work).abs() / scale } else { 0.0 };
    Ok(StepEnergy {
        g_new,
        g_old,
        jump,
        diss,
        drag,
        l2_sq,
        grad_sq,
        grad_old_sq,
        identity_residual,
        scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Execution;
    use crate::mesh::{structured_triangulation, tag_boundaries, BoundaryTag, Rect, SideTags};
    use crate::timestepping::{Discretization, FlowModel, ScalarFieldData, VectorSource};
    use std::sync::Arc;

    fn disc(nx: usize, ny: usize, rect: Rect, tags: SideTags) -> Arc<Discretization> {
        let mesh = tag_boundaries(structured_triangulation(nx, ny, rect).unwrap(), &tags).unwrap();
        Arc::new(Discretization::new(Arc::new(mesh), Execution::Parallel).unwrap())
    }

    fn wall() -> ScalarFieldData {
        ScalarFieldData {
            source: None,
            wall: Some(Arc::new(|x, _| 1.0 - x)),
        }
    }

    fn run_ledger(solver: &FlowSolver, mut state: FlowState, steps: usize) -> Vec<LedgerEntry> {
        let mut ledger = EnergyLedger::new(solver, &state).unwrap();
        let mut out = Vec::new();
        solver
            .run(&mut state, steps, |p, c, r| {
                out.push(ledger.record(p, c, r)?);
                Ok(())
            })
            .unwrap();
        out
    }

    #[test]
    fn nse_ledger_holds() {
        let d = disc(4, 4, Rect::unit_square(), SideTags::uniform(BoundaryTag::DirichletWall));
        let f = VectorSource {
            f: Arc::new(|x, y, _| [y * y * (x * y * y).cos() + x.sin() * y.sin(), 2.0 * x * y * (x * y * y).cos() + x.cos() * y.cos()]),
            steady: true,
        };
        let solver = FlowSolver::new(Arc::clone(&d), FlowModel::nse(0.01, Some(f)), Scheme::Blebdf, 0.5, Execution::Parallel).unwrap();
        let u0 = d.velocity.interpolate_vector(|x, y| [x.sin() * y, x * y]).unwrap();
        let state = solver.initial_state(u0, None, None).unwrap();
        let entries = run_ledger(&solver, state, 20);
        for e in &entries {
            assert!(e.violations().is_empty(), "{:?}", e.violations());
            assert!(e.printed_holds());
            assert_eq!(e.printed_lhs, e.velocity.energy);
            assert!(e.velocity.l2_sq <= e.velocity_l2_sq_bound(crate::stability::C_U));
        }
        assert!(entries.last().unwrap().velocity.l2_sq > 0.0);
    }

    #[test]
    fn coupled_ledgers_hold() {
        let d = disc(4, 4, Rect::unit_square(), SideTags::differentially_heated());
        let model = FlowModel::boussinesq(0.01, 0.01, 1.0, None, wall());
        let solver = FlowSolver::new(Arc::clone(&d), model, Scheme::Blebdf, 0.5, Execution::Parallel).unwrap();
        let t0 = vec![0.0; d.scalar.n_dofs()];
        let state = solver.initial_state(vec![0.0; d.velocity.n_dofs()], Some(t0), None).unwrap();
        for e in run_ledger(&solver, state, 15) {
            assert!(e.violations().is_empty(), "{:?}", e.violations());
            assert_eq!(e.scalars.len(), 1);
        }

        let tall = Rect::new(0.0, 1.0, 0.0, 2.0).unwrap();
        let d = disc(3, 6, tall, SideTags::differentially_heated());
        let model = FlowModel::doublediff(1.0, 1.0, 0.5, 0.0, 1000.0, 800.0, 1.0, None, wall(), wall());
        let solver = FlowSolver::new(Arc::clone(&d), model, Scheme::Blebdf, 0.1, Execution::Parallel).unwrap();
        let z = vec![0.0; d.scalar.n_dofs()];
        let state = solver.initial_state(vec![0.0; d.velocity.n_dofs()], Some(z.clone()), Some(z)).unwrap();
        for e in run_ledger(&solver, state, 10) {
            assert!(e.violations().is_empty(), "{:?}", e.violations());
            assert!(e.printed_rhs.is_infinite());
        }
    }

    #[test]
    fn ledger_rejects_bdf2_and_unsteady_forcing() {
        let d = disc(2, 2, Rect::unit_square(), SideTags::uniform(BoundaryTag::DirichletWall));
        let s = FlowSolver::new(Arc::clone(&d), FlowModel::nse(1.0, None), Scheme::Bdf2, 0.1, Execution::Sequential).unwrap();
        let st = s.initial_state(vec![0.0; d.velocity.n_dofs()], None, None).unwrap();
        assert!(EnergyLedger::new(&s, &st).is_err());
        let f = VectorSource {
            f: Arc::new(|_, _, t| [t, 0.0]),
            steady: false,
        };
        let s = FlowSolver::new(Arc::clone(&d), FlowModel::nse(1.0, Some(f)), Scheme::Blebdf, 0.1, Execution::Sequential).unwrap();
        assert!(EnergyLedger::new(&s, &st).is_err());
    }
}
