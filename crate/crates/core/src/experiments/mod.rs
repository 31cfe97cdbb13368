//! Long-time cavity experiments, CSV output and the CPU-time harness.

pub mod config;
pub mod output;

pub use config::{CavityCoefficients, DimensionlessGroups, ProblemConfig, ProblemKind};
pub use output::{format_csv, parse_csv, write_csv, TimeSeriesRecord, CSV_HEADER};

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mesh::{structured_triangulation, tag_boundaries, BoundaryTag, SideTags};
use crate::stability::{gnorm_sq, EnergyLedger, GTriple, C_U};
use crate::timestepping::{
    step_count, Discretization, FlowModel, FlowSolver, FlowState, ScalarFieldData, Scheme, VectorSource, WallFn,
};

/// Largest admissible relative residual of a per-step solve.
pub const SOLVER_RESIDUAL_TOL: f64 = 1e-9;
/// Largest admissible `‖Bu‖ / ‖u‖`.
pub const DIVERGENCE_TOL: f64 = 1e-9;
/// Largest admissible `|∫p|`.
pub const PRESSURE_MEAN_TOL: f64 = 1e-10;

/// Initial velocity of the NSE cavity.
pub fn truesol_velocity(x: f64, y: f64) -> [f64; 2] {
    [(PI * x).sin() * (PI * y).sin(), (PI * x).cos() * (PI * y).cos()]
}

/// Body force of the NSE cavity.
pub fn truesol_forcing(x: f64, y: f64) -> [f64; 2] {
    let c = (x * y * y).cos();
    [y * y * c + x.sin() * y.sin(), 2.0 * x * y * c + x.cos() * y.cos()]
}

/// A configured solver with its initial state.
pub struct Problem {
    pub config: ProblemConfig,
    pub solver: FlowSolver,
    pub state: FlowState,
}

fn wall_profile(x0: f64, width: f64, (left, right): (f64, f64)) -> WallFn {
    Arc::new(move |x, _| left + (right - left) * (x - x0) / width)
}

/// Builds mesh, spaces, model and initial state for `cfg`.
pub fn build_problem(cfg: &ProblemConfig) -> Result<Problem> {
    cfg.validate()?;
    let rect = cfg.rect();
    let tags = match cfg.problem {
        ProblemKind::Nse => SideTags::uniform(BoundaryTag::DirichletWall),
        _ => SideTags::differentially_heated(),
    };
    let mesh = tag_boundaries(structured_triangulation(cfg.nx, cfg.ny, rect)?, &tags)?;
    let disc = Arc::new(Discretization::new(Arc::new(mesh), cfg.execution)?);
    let nu = cfg.viscosity()?;
    let walls = |w: (f64, f64)| ScalarFieldData {
        source: None,
        wall: Some(wall_profile(rect.x0, rect.width(), w)),
    };
    let model = match cfg.problem {
        ProblemKind::Nse => {
            let forcing = cfg.forcing.then(|| VectorSource {
                f: Arc::new(|x, y, _| truesol_forcing(x, y)),
                steady: true,
            });
            FlowModel::nse(nu, forcing)
        }
        ProblemKind::Natconv => {
            let kappa = cfg.kappa.unwrap_or(nu);
            FlowModel::boussinesq(nu, kappa, cfg.ri.unwrap_or(1.0), None, walls(cfg.t_walls))
        }
        ProblemKind::Doublediff => {
            let c = cfg.groups()?.coefficients();
            FlowModel::doublediff(
                nu,
                cfg.kappa.unwrap_or(c.kappa),
                cfg.dc.unwrap_or(c.dc),
                c.da_inv,
                c.beta_t_g,
                c.beta_c_g,
                1.0,
                None,
                walls(cfg.t_walls),
                walls(cfg.c_walls),
            )
        }
    };
    let solver = FlowSolver::new(Arc::clone(&disc), model, cfg.scheme, cfg.dt, cfg.execution)?;
    let u0 = if cfg.zero_initial || cfg.problem != ProblemKind::Nse {
        vec![0.0; disc.velocity.n_dofs()]
    } else {
        disc.velocity.interpolate_vector(truesol_velocity)?
    };
    let zeros = || vec![0.0; disc.scalar.n_dofs()];
    let (t0, c0) = match cfg.problem {
        ProblemKind::Nse => (None, None),
        ProblemKind::Natconv => (Some(zeros()), None),
        ProblemKind::Doublediff => (Some(zeros()), Some(zeros())),
    };
    let state = solver.initial_state(u0, t0, c0)?;
    Ok(Problem {
        config: cfg.clone(),
        solver,
        state,
    })
}

/// Outcome of one experiment.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: ProblemConfig,
    pub records: Vec<TimeSeriesRecord>,
    pub elapsed_s: f64,
    pub max_solver_residual: f64,
    pub max_divergence_ratio: f64,
    pub max_abs_pressure_mean: f64,
    /// Largest relative residual of the discrete energy identities.
    pub max_identity_residual: f64,
    /// Failed ledger checks (energy identity, one-step inequality, bounds).
    pub violations: Vec<String>,
    /// Whether the ledger was tracked.
    pub bounds_checked: bool,
    /// Steps at which the estimate in its stated form does not hold.
    pub printed_failures: usize,
    /// `sup ‖u^n‖` over the last quarter of the run.
    pub final_quarter_max_u: f64,
    /// `max ‖u^n‖² / (C_u B_n)` over the last quarter, `B_n` the velocity bound.
    pub final_quarter_bound_ratio: f64,
    /// Same ratio over the whole run.
    pub max_bound_ratio: f64,
}

impl RunReport {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    /// Fails on any ledger violation or solver invariant breach.
    pub fn check(&self) -> Result<()> {
        let mut problems = self.violations.clone();
        if !(self.max_solver_residual <= SOLVER_RESIDUAL_TOL) {
            problems.push(format!("solver residual {:e}", self.max_solver_residual));
        }
        if !(self.max_divergence_ratio <= DIVERGENCE_TOL) {
            problems.push(format!("divergence ratio {:e}", self.max_divergence_ratio));
        }
        if !(self.max_abs_pressure_mean <= PRESSURE_MEAN_TOL) {
            problems.push(format!("pressure mean {:e}", self.max_abs_pressure_mean));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            let n = problems.len();
            let mut msg = problems.into_iter().take(5).collect::<Vec<_>>().join("; ");
            if n > 5 {
                msg.push_str(&format!("; and {} more", n - 5));
            }
            Err(Error::BoundViolation(msg))
        }
    }
}

/// Runs `cfg` to completion, writing the CSV if `cfg.out` is set. Returns
/// an error on blow-up; bound violations are reported in the result.
pub fn run_experiment(cfg: &ProblemConfig) -> Result<RunReport> {
    let Problem {
        config,
        solver,
        mut state,
    } = build_problem(cfg)?;
    let n_steps = step_count(cfg.t_end, cfg.dt)?;
    let track = cfg.check_bounds && cfg.scheme == Scheme::Blebdf;
    let mut ledger = if track { Some(EnergyLedger::new(&solver, &state)?) } else { None };
    let d = Arc::clone(solver.discretization());
    let quarter_start = n_steps - n_steps / 4;

    let mut report = RunReport {
        config,
        records: Vec::with_capacity(n_steps),
        elapsed_s: 0.0,
        max_solver_residual: 0.0,
        max_divergence_ratio: 0.0,
        max_abs_pressure_mean: 0.0,
        max_identity_residual: 0.0,
        violations: Vec::new(),
        bounds_checked: track,
        printed_failures: 0,
        final_quarter_max_u: 0.0,
        final_quarter_bound_ratio: 0.0,
        max_bound_ratio: 0.0,
    };
    let start = Instant::now();
    solver.run(&mut state, n_steps, |prev, cur, rep| {
        let norm = |w: &[f64], mass: &crate::sparse::SparseMatrix, field: &'static str| -> Result<f64> {
            let v = mass.bilinear(w, w)?.max(0.0).sqrt();
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::BlowUp {
                    step: rep.step,
                    time: rep.t,
                    field,
                })
            }
        };
        let l2_u = norm(cur.velocity.current(), &d.mass_velocity, "velocity")?;
        let l2_t = cur.temperature.as_ref().map(|h| norm(h.current(), &d.mass_scalar, "temperature")).transpose()?;
        let l2_c = cur.concentration.as_ref().map(|h| norm(h.current(), &d.mass_scalar, "concentration")).transpose()?;
        let lv = cur.velocity.levels();
        let gn = gnorm_sq(&GTriple::new([&lv[0], &lv[1], &lv[2]], &d.mass_velocity)?)?;

        report.max_solver_residual = report.max_solver_residual.max(rep.max_residual());
        report.max_divergence_ratio = report.max_divergence_ratio.max(rep.divergence_ratio);
        report.max_abs_pressure_mean = report.max_abs_pressure_mean.max(rep.pressure_mean.abs());
        if rep.step > quarter_start {
            report.final_quarter_max_u = report.final_quarter_max_u.max(l2_u);
        }

        let mut bound = None;
        if let Some(ledger) = ledger.as_mut() {
            let e = ledger.record(prev, cur, rep)?;
            report.max_identity_residual = std::iter::once(&e.velocity)
                .chain(&e.scalars)
                .map(|f| f.identity_residual)
                .fold(report.max_identity_residual, f64::max);
            report.violations.extend(e.violations());
            if !e.printed_holds() {
                report.printed_failures += 1;
            }
            let ratio = l2_u * l2_u / e.velocity_l2_sq_bound(C_U);
            report.max_bound_ratio = report.max_bound_ratio.max(ratio);
            if rep.step > quarter_start {
                report.final_quarter_bound_ratio = report.final_quarter_bound_ratio.max(ratio);
            }
            bound = Some(e.bound.velocity);
        }
        report.records.push(TimeSeriesRecord {
            step: rep.step,
            t: rep.t,
            l2_u,
            l2_t,
            l2_c,
            gnorm_u: Some(gn),
            bound,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        Ok(())
    })?;
    report.elapsed_s = start.elapsed().as_secs_f64();
    if let Some(path) = &cfg.out {
        write_csv(&report.records, path)?;
    }
    Ok(report)
}

fn expect_kind(cfg: &ProblemConfig, kind: ProblemKind) -> Result<()> {
    if cfg.problem == kind {
        Ok(())
    } else {
        Err(Error::Config(format!("expected a {kind} configuration, got {}", cfg.problem)))
    }
}

/// Lid-free cavity with the smooth forcing and initial velocity.
pub fn run_nse_cavity(cfg: &ProblemConfig) -> Result<RunReport> {
    expect_kind(cfg, ProblemKind::Nse)?;
    run_experiment(cfg)
}

/// Differentially heated cavity with adiabatic top and bottom.
pub fn run_buoyant_cavity(cfg: &ProblemConfig) -> Result<RunReport> {
    expect_kind(cfg, ProblemKind::Natconv)?;
    run_experiment(cfg)
}

/// Thermosolutal cavity on `(0,1) x (0,2)`.
pub fn run_doublediff_cavity(cfg: &ProblemConfig) -> Result<RunReport> {
    expect_kind(cfg, ProblemKind::Doublediff)?;
    run_experiment(cfg)
}

/// Independent experiments, run concurrently under `exec`. Results are in
/// input order.
pub fn run_sweep(cfgs: &[ProblemConfig], exec: Execution) -> Vec<Result<RunReport>> {
    exec.map(cfgs, run_experiment)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingRow {
    pub dt: f64,
    pub scheme: Scheme,
    pub steps: usize,
    pub seconds: f64,
}

impl TimingRow {
    pub fn per_step(&self) -> f64 {
        self.seconds / self.steps.max(1) as f64
    }
}

/// Wall-clock time of full runs of `cfg` for every step size and scheme,
/// without ledger tracking or output.
pub fn cpu_timing_comparison(cfg: &ProblemConfig, dts: &[f64], schemes: &[Scheme]) -> Result<Vec<TimingRow>> {
    let mut rows = Vec::new();
    for &dt in dts {
        for &scheme in schemes {
            let mut c = cfg.clone();
            c.dt = dt;
            c.scheme = scheme;
            c.check_bounds = false;
            c.out = None;
            let start = Instant::now();
            let report = run_experiment(&c)?;
            rows.push(TimingRow {
                dt,
                scheme,
                steps: report.steps(),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    Ok(rows)
}

/// Ratio of the larger to the smaller per-step cost among the rows sharing
/// each step size, in order of first appearance.
pub fn per_step_cost_ratios(rows: &[TimingRow]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64, f64)> = Vec::new();
    for r in rows {
        let c = r.per_step();
        match out.iter_mut().find(|(dt, _, _)| *dt == r.dt) {
            Some((_, lo, hi)) => {
                *lo = lo.min(c);
                *hi = hi.max(c);
            }
            None => out.push((r.dt, c, c)),
        }
    }
    out.into_iter()
        .map(|(dt, lo, hi)| (dt, if lo > 0.0 { hi / lo } else { f64::INFINITY }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(kind: ProblemKind) -> ProblemConfig {
        let mut c = ProblemConfig::new(kind);
        c.nx = 4;
        c.ny = if kind == ProblemKind::Doublediff { 8 } else { 4 };
        c.t_end = 2.0;
        c
    }

    #[test]
    fn step_count_and_records() {
        let mut c = small(ProblemKind::Nse);
        c.t_end = 1.0;
        let r = run_nse_cavity(&c).unwrap();
        assert_eq!(r.steps(), 2);
        assert_eq!(r.records[1].step, 2);
        assert!(r.records[0].t < r.records[1].t);
        r.check().unwrap();
        assert!(r.records.iter().all(|x| x.l2_t.is_none() && x.bound.is_some()));
    }

    #[test]
    fn zero_problem_stays_zero() {
        let mut c = small(ProblemKind::Nse);
        c.forcing = false;
        c.zero_initial = true;
        let r = run_experiment(&c).unwrap();
        assert!(r.records.iter().all(|x| x.l2_u == 0.0));
        let mut c = small(ProblemKind::Natconv);
        c.ri = Some(0.0);
        c.t_walls = (0.0, 0.0);
        let r = run_buoyant_cavity(&c).unwrap();
        assert!(r.records.iter().all(|x| x.l2_u == 0.0 && x.l2_t == Some(0.0)));
    }

    #[test]
    fn runs_are_deterministic_and_checked() {
        for kind in [ProblemKind::Nse, ProblemKind::Natconv, ProblemKind::Doublediff] {
            let mut c = small(kind);
            c.execution = Execution::Parallel;
            let a = run_experiment(&c).unwrap();
            c.execution = Execution::Sequential;
            let b = run_experiment(&c).unwrap();
            a.check().unwrap();
            let strip = |r: &RunReport| r.records.iter().map(|x| (x.l2_u, x.l2_t, x.l2_c, x.bound)).collect::<Vec<_>>();
            assert_eq!(strip(&a), strip(&b));
            assert!(a.max_bound_ratio <= 1.0);
        }
    }

    #[test]
    fn zero_buoyancy_ratio_keeps_concentration_zero() {
        let mut c = small(ProblemKind::Doublediff);
        c.n_ratio = 0.0;
        c.c_walls = (0.0, 0.0);
        let r = run_doublediff_cavity(&c).unwrap();
        assert!(r.records.iter().all(|x| x.l2_c == Some(0.0)));
        assert!(r.records.last().unwrap().l2_u > 0.0);
    }

    #[test]
    fn kind_mismatch_and_bdf2() {
        let c = small(ProblemKind::Nse);
        assert!(run_buoyant_cavity(&c).is_err());
        let mut c = small(ProblemKind::Natconv);
        c.scheme = Scheme::Bdf2;
        let r = run_experiment(&c).unwrap();
        assert!(!r.bounds_checked);
        assert!(r.records.iter().all(|x| x.bound.is_none() && x.gnorm_u.is_some()));
    }

    #[test]
    fn csv_written_when_requested() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small(ProblemKind::Natconv);
        c.out = Some(dir.path().join("n.csv"));
        let r = run_experiment(&c).unwrap();
        let text = std::fs::read_to_string(dir.path().join("n.csv")).unwrap();
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, r.records);
    }

    #[test]
    fn sweep_and_timing() {
        let cfgs = vec![small(ProblemKind::Nse), small(ProblemKind::Natconv)];
        let out = run_sweep(&cfgs, Execution::Parallel);
        assert!(out.iter().all(|r| r.is_ok()));
        let rows = cpu_timing_comparison(&small(ProblemKind::Nse), &[1.0, 0.5], &[Scheme::Blebdf, Scheme::Bdf2]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2].steps, 4);
        assert!(rows.iter().all(|r| r.seconds >= 0.0 && r.per_step() >= 0.0));
        let ratios = per_step_cost_ratios(&rows);
        assert_eq!(ratios.len(), 2);
        assert_eq!(ratios[1].0, 0.5);
        assert!(ratios.iter().all(|(_, r)| *r >= 1.0));
    }
}
