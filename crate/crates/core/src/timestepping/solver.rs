use std::fmt;
use std::sync::Arc;

use super::{FieldHistory, FlowState, Scheme, SchemeCoeffs};
use crate::assembly::{
    assemble_buoyancy, assemble_convection_skew_with, assemble_divergence, assemble_load, assemble_mass_with,
    assemble_stiffness_with,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fespace::{apply_dirichlet, build_space, Coefficients, DirichletSet, FunctionSpace};
use crate::mesh::{BoundaryTag, Mesh};
use crate::solvers::{build_saddle_system, Factorization, LinearSystem, SymbolicLu};
use crate::sparse::{combine, dot, norm2, SparseMatrix};

pub type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;
pub type WallFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Body force `f(x, y, t)`. Steady sources are evaluated once.
#[derive(Clone)]
pub struct VectorSource {
    pub f: VectorFn,
    pub steady: bool,
}

#[derive(Clone)]
pub struct ScalarSource {
    pub f: ScalarFn,
    pub steady: bool,
}

/// A transported scalar (temperature or concentration).
#[derive(Clone)]
pub struct ScalarField {
    pub diffusivity: f64,
    /// Coefficient of `(s e₂, v)` in the momentum equation.
    pub buoyancy: f64,
    pub source: Option<ScalarSource>,
    /// Function whose values on the essential boundary are imposed. Its
    /// nodal interpolant serves as the lifting of the boundary data.
    pub wall: Option<WallFn>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("diffusivity", &self.diffusivity)
            .field("buoyancy", &self.buoyancy)
            .field("source", &self.source.is_some())
            .field("wall", &self.wall.is_some())
            .finish()
    }
}

/// Physical coefficients and data of one flow problem.
#[derive(Clone)]
pub struct FlowModel {
    pub nu: f64,
    /// Inverse Darcy number; zero disables the drag term.
    pub da_inv: f64,
    pub forcing: Option<VectorSource>,
    pub temperature: Option<ScalarField>,
    pub concentration: Option<ScalarField>,
}

impl fmt::Debug for FlowModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowModel")
            .field("nu", &self.nu)
            .field("da_inv", &self.da_inv)
            .field("forcing", &self.forcing.is_some())
            .field("temperature", &self.temperature)
            .field("concentration", &self.concentration)
            .finish()
    }
}

impl FlowModel {
    pub fn nse(nu: f64, forcing: Option<VectorSource>) -> Self {
        FlowModel {
            nu,
            da_inv: 0.0,
            forcing,
            temperature: None,
            concentration: None,
        }
    }

    /// Boussinesq system with buoyancy `Ri (T e₂, v)`.
    pub fn boussinesq(nu: f64, kappa: f64, ri: f64, forcing: Option<VectorSource>, temperature: ScalarFieldData) -> Self {
        FlowModel {
            nu,
            da_inv: 0.0,
            forcing,
            temperature: Some(ScalarField {
                diffusivity: kappa,
                buoyancy: ri,
                source: temperature.source,
                wall: temperature.wall,
            }),
            concentration: None,
        }
    }

    /// Darcy-Brinkman double-diffusive system with buoyancy
    /// `((β_T T + β_C C) g, v)`, gravity along e₂.
    #[allow(clippy::too_many_arguments)]
    pub fn doublediff(
        nu: f64,
        kappa: f64,
        dc: f64,
        da_inv: f64,
        beta_t: f64,
        beta_c: f64,
        g_mag: f64,
        forcing: Option<VectorSource>,
        temperature: ScalarFieldData,
        concentration: ScalarFieldData,
    ) -> Self {
        FlowModel {
            nu,
            da_inv,
            forcing,
            temperature: Some(ScalarField {
                diffusivity: kappa,
                buoyancy: beta_t * g_mag,
                source: temperature.source,
                wall: temperature.wall,
            }),
            concentration: Some(ScalarField {
                diffusivity: dc,
                buoyancy: beta_c * g_mag,
                source: concentration.source,
                wall: concentration.wall,
            }),
        }
    }

    /// Scalar fields, temperature first.
    pub fn scalars(&self) -> Vec<&ScalarField> {
        self.temperature.iter().chain(self.concentration.iter()).collect()
    }

    fn validate(&self) -> Result<()> {
        positive("nu", self.nu)?;
        if !(self.da_inv >= 0.0 && self.da_inv.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "da_inv",
                value: self.da_inv,
                reason: "inverse Darcy number must be nonnegative",
            });
        }
        for s in self.scalars() {
            positive("diffusivity", s.diffusivity)?;
            if !s.buoyancy.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "buoyancy",
                    value: s.buoyancy,
                    reason: "buoyancy coefficient must be finite",
                });
            }
        }
        Ok(())
    }
}

/// Source and boundary data of a scalar field.
#[derive(Clone, Default)]
pub struct ScalarFieldData {
    pub source: Option<ScalarSource>,
    pub wall: Option<WallFn>,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be positive",
        })
    }
}

/// Spaces and time-independent operators on one mesh. Velocity is no-slip on
/// every boundary edge; scalars are essential on `GammaT` and
/// `DirichletWall` edges and natural on `GammaB`.
#[derive(Debug)]
pub struct Discretization {
    pub velocity: FunctionSpace,
    pub pressure: FunctionSpace,
    pub scalar: FunctionSpace,
    pub mass_scalar: SparseMatrix,
    /// Unit-coefficient scalar stiffness.
    pub stiffness_scalar: SparseMatrix,
    pub mass_velocity: SparseMatrix,
    pub stiffness_velocity: SparseMatrix,
    /// `(q, ∇·v)`.
    pub divergence: SparseMatrix,
    /// `(s e₂, v)`.
    pub buoyancy: SparseMatrix,
    /// `∫ψ_a` for each pressure basis function.
    pub pressure_weights: Vec<f64>,
    pub velocity_bc: DirichletSet,
    pub scalar_essential_dofs: Vec<usize>,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, exec: Execution) -> Result<Self> {
        let velocity = build_space(Arc::clone(&mesh), 2, 2)?;
        let pressure = build_space(Arc::clone(&mesh), 1, 1)?;
        let scalar = build_space(Arc::clone(&mesh), 2, 1)?;
        let mass_scalar = assemble_mass_with(&scalar, exec);
        let stiffness_scalar = assemble_stiffness_with(&scalar, 1.0, exec)?;
        let mass_velocity = mass_scalar.block_diagonal(2);
        let stiffness_velocity = stiffness_scalar.block_diagonal(2);
        let divergence = assemble_divergence(&velocity, &pressure)?;
        let buoyancy = assemble_buoyancy(&velocity, &scalar, [0.0, 1.0], 1.0)?;
        let pressure_weights = assemble_load(&pressure, |_, _, _| [1.0], 0.0)?;
        let all_tags = [BoundaryTag::DirichletWall, BoundaryTag::GammaT, BoundaryTag::GammaB];
        let velocity_bc = DirichletSet::homogeneous(&velocity.boundary_dofs(&all_tags));
        let scalar_essential_dofs = scalar.boundary_scalar_dofs(&[BoundaryTag::DirichletWall, BoundaryTag::GammaT]);
        Ok(Discretization {
            velocity,
            pressure,
            scalar,
            mass_scalar,
            stiffness_scalar,
            mass_velocity,
            stiffness_velocity,
            divergence,
            buoyancy,
            pressure_weights,
            velocity_bc,
            scalar_essential_dofs,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.velocity.mesh()
    }
}

/// Per-field diagnostics of one scalar solve.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarStepData {
    pub residual: f64,
    /// `g(s̃^{n+1})`, where `g = γ − D K s_lift − N(u*) s_lift` is the source
    /// functional seen by the lifted field `s̃ = s − s_lift`.
    pub source_work: f64,
    /// Squared dual norm of `g` with respect to `‖∇·‖` on the discrete
    /// space with homogeneous essential conditions.
    pub source_dual_sq: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub momentum_residual: f64,
    /// `‖B u^{n+1}‖ / ‖u^{n+1}‖` (zero for a zero velocity).
    pub divergence_ratio: f64,
    pub pressure_mean: f64,
    /// `F·u^{n+1}` for the full momentum load `F` (body force plus buoyancy).
    pub load_work: f64,
    pub scalars: Vec<ScalarStepData>,
}

impl StepReport {
    pub fn max_residual(&self) -> f64 {
        self.scalars
            .iter()
            .map(|s| s.residual)
            .fold(self.momentum_residual, f64::max)
    }
}

struct ScalarData {
    field: ScalarField,
    bc: DirichletSet,
    lift: Coefficients,
    steady_source: Option<Coefficients>,
}

/// Advances a [`FlowState`] with fixed step, scheme and model.
pub struct FlowSolver {
    disc: Arc<Discretization>,
    model: FlowModel,
    coeffs: SchemeCoeffs,
    dt: f64,
    exec: Execution,
    neg_divergence: SparseMatrix,
    pressure_scale: f64,
    scaled_weights: Vec<f64>,
    momentum_lu: SymbolicLu,
    scalar_lu: Option<SymbolicLu>,
    scalar_dual: Option<Factorization>,
    scalars: Vec<ScalarData>,
    steady_forcing: Option<Coefficients>,
}

impl FlowSolver {
    pub fn new(disc: Arc<Discretization>, model: FlowModel, scheme: Scheme, dt: f64, exec: Execution) -> Result<Self> {
        positive("dt", dt)?;
        model.validate()?;
        let scalar_fields: Vec<ScalarField> = model.scalars().into_iter().cloned().collect();
        if !scalar_fields.is_empty() && disc.scalar_essential_dofs.is_empty() {
            return Err(Error::Config(
                "scalar fields need at least one boundary side with essential conditions".into(),
            ));
        }
        let mut scalars = Vec::new();
        for field in scalar_fields {
            let dofs = &disc.scalar_essential_dofs;
            let (bc, lift) = match &field.wall {
                Some(w) => (
                    DirichletSet::from_function(&disc.scalar, dofs, |x, y| w(x, y))?,
                    disc.scalar.interpolate(|x, y| w(x, y))?,
                ),
                None => (DirichletSet::homogeneous(dofs), vec![0.0; disc.scalar.n_dofs()]),
            };
            let steady_source = match &field.source {
                Some(s) if s.steady => {
                    let f = Arc::clone(&s.f);
                    Some(assemble_load(&disc.scalar, move |x, y, t| [f(x, y, t)], 0.0)?)
                }
                _ => None,
            };
            scalars.push(ScalarData {
                field,
                bc,
                lift,
                steady_source,
            });
        }
        let steady_forcing = match &model.forcing {
            Some(s) if s.steady => Some(assemble_load(&disc.velocity, |x, y, t| (s.f)(x, y, t), 0.0)?),
            _ => None,
        };
        // Pressure unknowns are solved for in units of `diag / max|B|`.
        let diag = disc.mass_velocity.max_abs() * SchemeCoeffs::of(scheme).derivative[0] / dt
            + model.nu * disc.stiffness_velocity.max_abs();
        let pressure_scale = diag / disc.divergence.max_abs();
        let neg_divergence = disc.divergence.scaled(-pressure_scale);
        let scaled_weights: Vec<f64> = disc.pressure_weights.iter().map(|w| w * pressure_scale).collect();
        let coeffs = SchemeCoeffs::of(scheme);

        let zero_conv = SparseMatrix::zeros(Arc::clone(disc.mass_scalar.pattern()));
        let mut solver = FlowSolver {
            disc: Arc::clone(&disc),
            model,
            coeffs,
            dt,
            exec,
            neg_divergence,
            pressure_scale,
            scaled_weights,
            momentum_lu: SymbolicLu::analyze(&SparseMatrix::identity(1))?,
            scalar_lu: None,
            scalar_dual: None,
            scalars,
            steady_forcing,
        };
        let probe = solver.momentum_system(&zero_conv, vec![0.0; disc.velocity.n_dofs()], 0.0)?;
        solver.momentum_lu = SymbolicLu::analyze(&probe.matrix)?;
        if !solver.scalars.is_empty() {
            let probe = solver.scalar_system(0, &zero_conv, vec![0.0; disc.scalar.n_dofs()], 0.0)?;
            solver.scalar_lu = Some(SymbolicLu::analyze(&probe.matrix)?);
            let k = LinearSystem::new(disc.stiffness_scalar.clone(), vec![0.0; disc.scalar.n_dofs()])?;
            let k = apply_dirichlet(k, &DirichletSet::homogeneous(&disc.scalar_essential_dofs), 0.0)?;
            solver.scalar_dual = Some(crate::solvers::factorize(&k.matrix)?);
        }
        Ok(solver)
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }

    pub fn model(&self) -> &FlowModel {
        &self.model
    }

    pub fn coeffs(&self) -> &SchemeCoeffs {
        &self.coeffs
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Nodal lifting of the boundary data of scalar field `k` (temperature first).
    pub fn lift(&self, k: usize) -> &[f64] {
        &self.scalars[k].lift
    }

    pub fn n_scalars(&self) -> usize {
        self.scalars.len()
    }

    /// Constant-history state from initial data. Velocity boundary values are
    /// set to zero and scalar boundary values to the imposed wall data.
    pub fn initial_state(
        &self,
        mut u0: Coefficients,
        temp0: Option<Coefficients>,
        conc0: Option<Coefficients>,
    ) -> Result<FlowState> {
        let disc = &self.disc;
        check_len(&u0, disc.velocity.n_dofs())?;
        disc.velocity_bc.impose(&mut u0, 0.0)?;
        let has_t = self.model.temperature.is_some();
        let has_c = self.model.concentration.is_some();
        if has_t != temp0.is_some() || has_c != conc0.is_some() {
            return Err(Error::Config(
                "initial scalar data must match the scalar fields of the model".into(),
            ));
        }
        let mut fixed = Vec::new();
        for (k, mut s0) in temp0.into_iter().chain(conc0).enumerate() {
            check_len(&s0, disc.scalar.n_dofs())?;
            self.scalars[k].bc.impose(&mut s0, 0.0)?;
            fixed.push(s0);
        }
        let mut it = fixed.into_iter();
        let temp0 = if has_t { it.next() } else { None };
        let conc0 = if has_c { it.next() } else { None };
        Ok(FlowState::startup(u0, disc.pressure.n_dofs(), temp0, conc0))
    }

    fn momentum_system(&self, conv: &SparseMatrix, rhs_u: Vec<f64>, t: f64) -> Result<LinearSystem> {
        let d = &self.disc;
        let a0 = self.coeffs.derivative[0];
        let a = SparseMatrix::linear_combination(&[
            (a0 / self.dt + self.model.da_inv, &d.mass_scalar),
            (self.model.nu, &d.stiffness_scalar),
            (1.0, conv),
        ])?
        .block_diagonal(2);
        let sys = build_saddle_system(&a, &self.neg_divergence, &rhs_u, &self.scaled_weights)?;
        apply_dirichlet(sys, &d.velocity_bc, t)
    }

    fn scalar_system(&self, k: usize, conv: &SparseMatrix, rhs: Vec<f64>, t: f64) -> Result<LinearSystem> {
        let d = &self.disc;
        let a0 = self.coeffs.derivative[0];
        let a = SparseMatrix::linear_combination(&[
            (a0 / self.dt, &d.mass_scalar),
            (self.scalars[k].field.diffusivity, &d.stiffness_scalar),
            (1.0, conv),
        ])?;
        apply_dirichlet(LinearSystem::new(a, rhs)?, &self.scalars[k].bc, t)
    }

    fn forcing_load(&self, t: f64) -> Result<Coefficients> {
        match (&self.steady_forcing, &self.model.forcing) {
            (Some(f), _) => Ok(f.clone()),
            (None, Some(s)) => assemble_load(&self.disc.velocity, |x, y, t| (s.f)(x, y, t), t),
            (None, None) => Ok(vec![0.0; self.disc.velocity.n_dofs()]),
        }
    }

    fn scalar_load(&self, k: usize, t: f64) -> Result<Coefficients> {
        let sd = &self.scalars[k];
        match (&sd.steady_source, &sd.field.source) {
            (Some(g), _) => Ok(g.clone()),
            (None, Some(s)) => assemble_load(&self.disc.scalar, |x, y, t| [(s.f)(x, y, t)], t),
            (None, None) => Ok(vec![0.0; self.disc.scalar.n_dofs()]),
        }
    }

    /// Squared dual norm `gᵀ K⁻¹ g` over the free scalar DOFs.
    fn scalar_dual_sq(&self, g: &[f64]) -> Result<f64> {
        let fact = self.scalar_dual.as_ref().expect("scalar dual factorization exists with scalar fields");
        let mut gf = g.to_vec();
        for &d in &self.disc.scalar_essential_dofs {
            gf[d] = 0.0;
        }
        let z = fact.solve(&gf)?;
        Ok(dot(&gf, &z).max(0.0))
    }

    fn solve_scalar(&self, k: usize, hist: &FieldHistory, conv: &SparseMatrix, t: f64) -> Result<(Coefficients, ScalarStepData)> {
        let d = &self.disc;
        let sd = &self.scalars[k];
        let load = self.scalar_load(k, t)?;
        let mh = d.mass_scalar.matvec(&hist.derivative_history(&self.coeffs))?;
        let rhs = combine(&[(1.0, &load), (-1.0 / self.dt, &mh)]);
        let sys = self.scalar_system(k, conv, rhs, t)?;
        let lu = self.scalar_lu.as_ref().expect("scalar analysis exists with scalar fields");
        let s_new = lu.factorize(&sys.matrix)?.solve(&sys.rhs)?;
        let residual = sys.relative_residual(&s_new)?;

        let k_lift = d.stiffness_scalar.matvec(&sd.lift)?;
        let n_lift = conv.matvec(&sd.lift)?;
        let g = combine(&[(1.0, &load), (-sd.field.diffusivity, &k_lift), (-1.0, &n_lift)]);
        let lifted = combine(&[(1.0, &s_new), (-1.0, &sd.lift)]);
        let mut work = 0.0;
        for (i, (gi, si)) in g.iter().zip(&lifted).enumerate() {
            if !sd.bc.contains(i) {
                work += gi * si;
            }
        }
        let source_dual_sq = self.scalar_dual_sq(&g)?;
        Ok((
            s_new,
            ScalarStepData {
                residual,
                source_work: work,
                source_dual_sq,
            },
        ))
    }

    fn solve_momentum(
        &self,
        state: &FlowState,
        conv: &SparseMatrix,
        stars: &[Coefficients],
        t: f64,
    ) -> Result<(Coefficients, Coefficients, f64, f64)> {
        let d = &self.disc;
        let mut load = self.forcing_load(t)?;
        for (sd, star) in self.scalars.iter().zip(stars) {
            if sd.field.buoyancy != 0.0 {
                let b = d.buoyancy.matvec(star)?;
                for (l, v) in load.iter_mut().zip(&b) {
                    *l += sd.field.buoyancy * v;
                }
            }
        }
        let mh = d.mass_velocity.matvec(&state.velocity.derivative_history(&self.coeffs))?;
        let rhs = combine(&[(1.0, &load), (-1.0 / self.dt, &mh)]);
        let sys = self.momentum_system(conv, rhs, t)?;
        let x = self.momentum_lu.factorize(&sys.matrix)?.solve(&sys.rhs)?;
        let residual = sys.relative_residual(&x)?;
        let nu = d.velocity.n_dofs();
        let np = d.pressure.n_dofs();
        let u = x[..nu].to_vec();
        let p = x[nu..nu + np].iter().map(|v| v * self.pressure_scale).collect();
        let work = dot(&load, &u);
        Ok((u, p, residual, work))
    }

    /// Advances `state` by one step.
    pub fn step(&self, state: &mut FlowState) -> Result<StepReport> {
        let d = &self.disc;
        let t = state.t0 + (state.step + 1) as f64 * self.dt;
        let u_star = state.velocity.extrapolate(&self.coeffs);
        let conv = assemble_convection_skew_with(&d.scalar, &d.velocity, &u_star, self.exec)?;
        let hists = state.scalars();
        if hists.len() != self.scalars.len() {
            return Err(Error::Config("state scalar fields do not match the model".into()));
        }
        let stars: Vec<Coefficients> = hists.iter().map(|h| h.extrapolate(&self.coeffs)).collect();

        let solve_scalars = || -> Result<Vec<(Coefficients, ScalarStepData)>> {
            match hists.as_slice() {
                [] => Ok(Vec::new()),
                [h] => Ok(vec![self.solve_scalar(0, h, &conv, t)?]),
                [ht, hc] => {
                    let (a, b) = self.exec.join(
                        || self.solve_scalar(0, ht, &conv, t),
                        || self.solve_scalar(1, hc, &conv, t),
                    );
                    Ok(vec![a?, b?])
                }
                _ => unreachable!("at most two scalar fields"),
            }
        };
        let (scalar_results, momentum) =
            self.exec
                .join(solve_scalars, || self.solve_momentum(state, &conv, &stars, t));
        let scalar_results = scalar_results?;
        let (u, p, momentum_residual, load_work) = momentum?;

        let bu = d.divergence.matvec(&u)?;
        let un = norm2(&u);
        let divergence_ratio = if un > 0.0 { norm2(&bu) / un } else { norm2(&bu) };
        let pressure_mean = dot(&p, &d.pressure_weights);

        state.velocity.push(u)?;
        state.pressure = p;
        let mut data = Vec::new();
        let mut results = scalar_results.into_iter();
        if let Some(h) = state.temperature.as_mut() {
            let (s, sd) = results.next().expect("temperature result");
            h.push(s)?;
            data.push(sd);
        }
        if let Some(h) = state.concentration.as_mut() {
            let (s, sd) = results.next().expect("concentration result");
            h.push(s)?;
            data.push(sd);
        }
        state.step += 1;
        Ok(StepReport {
            step: state.step,
            t,
            momentum_residual,
            divergence_ratio,
            pressure_mean,
            load_work,
            scalars: data,
        })
    }

    /// Takes `n_steps` steps, calling `probe(previous, current, report)` after
    /// each. Errors carry the index of the failing step.
    pub fn run<F>(&self, state: &mut FlowState, n_steps: usize, mut probe: F) -> Result<()>
    where
        F: FnMut(&FlowState, &FlowState, &StepReport) -> Result<()>,
    {
        for _ in 0..n_steps {
            let prev = state.clone();
            let report = self.step(state).map_err(|e| e.at_step(prev.step + 1))?;
            probe(&prev, state, &report).map_err(|e| e.at_step(report.step))?;
        }
        Ok(())
    }
}

fn check_len(c: &[f64], n: usize) -> Result<()> {
    if c.len() == n {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected: n, got: c.len() })
    }
}
