//! Three-level time stepping: scheme coefficients, field histories and the
//! coupled flow solver.

mod solver;

pub use solver::{
    Discretization, FlowModel, FlowSolver, ScalarField, ScalarFieldData, ScalarFn, ScalarSource, ScalarStepData,
    StepReport, VectorFn, VectorSource, WallFn,
};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fespace::Coefficients;
use crate::sparse::combine;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Blended extrapolated BDF.
    #[default]
    Blebdf,
    /// Linearly extrapolated BDF2.
    Bdf2,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Blebdf => "blebdf",
            Scheme::Bdf2 => "bdf2",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "blebdf" => Ok(Scheme::Blebdf),
            "bdf2" => Ok(Scheme::Bdf2),
            other => Err(Error::Config(format!("unknown scheme '{other}' (expected blebdf or bdf2)"))),
        }
    }
}

/// Derivative weights `(a0, a1, a2, a3)` applied to `(w^{n+1}, w^n, w^{n-1},
/// w^{n-2})` and extrapolation weights `(e1, e2, e3)` applied to
/// `(w^n, w^{n-1}, w^{n-2})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeCoeffs {
    pub scheme: Scheme,
    pub derivative: [f64; 4],
    pub extrapolation: [f64; 3],
}

impl SchemeCoeffs {
    pub const BLEBDF: SchemeCoeffs = SchemeCoeffs {
        scheme: Scheme::Blebdf,
        derivative: [5.0 / 3.0, -5.0 / 2.0, 1.0, -1.0 / 6.0],
        extrapolation: [3.0, -3.0, 1.0],
    };

    pub const BDF2: SchemeCoeffs = SchemeCoeffs {
        scheme: Scheme::Bdf2,
        derivative: [1.5, -2.0, 0.5, 0.0],
        extrapolation: [2.0, -1.0, 0.0],
    };

    pub fn of(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Blebdf => SchemeCoeffs::BLEBDF,
            Scheme::Bdf2 => SchemeCoeffs::BDF2,
        }
    }
}

/// The three most recent levels `(w^n, w^{n-1}, w^{n-2})` of one field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldHistory {
    levels: [Coefficients; 3],
}

impl FieldHistory {
    /// All three levels equal to `w0`.
    pub fn constant(w0: Coefficients) -> Self {
        FieldHistory {
            levels: [w0.clone(), w0.clone(), w0],
        }
    }

    /// Levels given newest first.
    pub fn from_levels(levels: [Coefficients; 3]) -> Result<Self> {
        let n = levels[0].len();
        if let Some(bad) = levels.iter().find(|l| l.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        Ok(FieldHistory { levels })
    }

    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels[0].is_empty()
    }

    pub fn current(&self) -> &[f64] {
        &self.levels[0]
    }

    /// Level `n - k` for `k` in `0..3`.
    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    pub fn levels(&self) -> &[Coefficients; 3] {
        &self.levels
    }

    /// Shifts in a new level and returns the dropped oldest one.
    pub fn push(&mut self, newest: Coefficients) -> Result<Coefficients> {
        if newest.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: newest.len(),
            });
        }
        self.levels.rotate_right(1);
        Ok(std::mem::replace(&mut self.levels[0], newest))
    }

    pub fn extrapolate(&self, coeffs: &SchemeCoeffs) -> Coefficients {
        let e = coeffs.extrapolation;
        combine(&[(e[0], &self.levels[0]), (e[1], &self.levels[1]), (e[2], &self.levels[2])])
    }

    /// `a1 w^n + a2 w^{n-1} + a3 w^{n-2}`, the known part of the discrete
    /// time derivative (before division by the step).
    pub fn derivative_history(&self, coeffs: &SchemeCoeffs) -> Coefficients {
        let a = coeffs.derivative;
        combine(&[(a[1], &self.levels[0]), (a[2], &self.levels[1]), (a[3], &self.levels[2])])
    }
}

/// `e1 w^n + e2 w^{n-1} + e3 w^{n-2}`.
pub fn extrapolate3(h: &FieldHistory, coeffs: &SchemeCoeffs) -> Coefficients {
    h.extrapolate(coeffs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub velocity: FieldHistory,
    pub pressure: Coefficients,
    pub temperature: Option<FieldHistory>,
    pub concentration: Option<FieldHistory>,
    pub t0: f64,
    pub step: usize,
}

impl FlowState {
    /// Constant-history start: every level of each field equals its initial datum.
    pub fn startup(u0: Coefficients, n_pressure: usize, temp0: Option<Coefficients>, conc0: Option<Coefficients>) -> Self {
        FlowState {
            velocity: FieldHistory::constant(u0),
            pressure: vec![0.0; n_pressure],
            temperature: temp0.map(FieldHistory::constant),
            concentration: conc0.map(FieldHistory::constant),
            t0: 0.0,
            step: 0,
        }
    }

    pub fn time(&self, dt: f64) -> f64 {
        self.t0 + self.step as f64 * dt
    }

    /// Histories of the scalar fields, temperature first.
    pub fn scalars(&self) -> Vec<&FieldHistory> {
        self.temperature.iter().chain(self.concentration.iter()).collect()
    }
}

/// Number of steps of size `dt` needed to reach `t_end`, treating ratios
/// within rounding of an integer as exact.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "time step must be positive",
        });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            value: t_end,
            reason: "final time must be positive",
        });
    }
    let r = t_end / dt;
    let k = r.round();
    let n = if (r - k).abs() <= 1e-9 * r.max(1.0) { k } else { r.ceil() };
    Ok(n as usize)
}

/// One step of the scalar test equation `y' = λ y` with history
/// `(y^n, y^{n-1}, y^{n-2})`.
pub fn scalar_ode_step(coeffs: &SchemeCoeffs, history: [f64; 3], lambda: f64, dt: f64) -> f64 {
    let a = coeffs.derivative;
    -(a[1] * history[0] + a[2] * history[1] + a[3] * history[2]) / (a[0] - lambda * dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_consistency() {
        for c in [SchemeCoeffs::BLEBDF, SchemeCoeffs::BDF2] {
            assert!(c.derivative.iter().sum::<f64>().abs() < 1e-15);
            assert!((c.extrapolation.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            // First moment: the derivative formula is exact on linears.
            let m1: f64 = c.derivative.iter().enumerate().map(|(k, a)| a * (1.0 - k as f64)).sum();
            assert!((m1 - 1.0).abs() < 1e-15);
        }
        assert_eq!(SchemeCoeffs::of(Scheme::Bdf2), SchemeCoeffs::BDF2);
        assert_eq!("BLEBDF".parse::<Scheme>().unwrap(), Scheme::Blebdf);
        assert!("bdf3".parse::<Scheme>().is_err());
        assert_eq!(Scheme::Bdf2.to_string(), "bdf2");
    }

    #[test]
    fn extrapolation_exactness() {
        let c = SchemeCoeffs::BLEBDF;
        let h = FieldHistory::constant(vec![2.5, -1.0]);
        assert_eq!(extrapolate3(&h, &c), vec![2.5, -1.0]);
        let n = 7.0f64;
        let lin = FieldHistory::from_levels([vec![n], vec![n - 1.0], vec![n - 2.0]]).unwrap();
        assert_eq!(extrapolate3(&lin, &c), vec![n + 1.0]);
        let quad = FieldHistory::from_levels([vec![n * n], vec![(n - 1.0).powi(2)], vec![(n - 2.0).powi(2)]]).unwrap();
        assert_eq!(extrapolate3(&quad, &c), vec![(n + 1.0).powi(2)]);
        assert_eq!(extrapolate3(&lin, &SchemeCoeffs::BDF2), vec![n + 1.0]);
    }

    #[test]
    fn history_shift() {
        let mut h = FieldHistory::from_levels([vec![3.0], vec![2.0], vec![1.0]]).unwrap();
        let dropped = h.push(vec![4.0]).unwrap();
        assert_eq!(dropped, vec![1.0]);
        assert_eq!(h.levels(), &[vec![4.0], vec![3.0], vec![2.0]]);
        assert!(h.push(vec![1.0, 2.0]).is_err());
        assert!(FieldHistory::from_levels([vec![1.0], vec![], vec![1.0]]).is_err());
    }

    #[test]
    fn startup_state() {
        let s = FlowState::startup(vec![0.0; 4], 2, None, None);
        assert!(s.velocity.levels().iter().all(|l| l.iter().all(|v| *v == 0.0)));
        assert!(s.temperature.is_none() && s.concentration.is_none());
        let s = FlowState::startup(vec![1.0; 2], 1, Some(vec![0.5; 3]), None);
        assert_eq!(s.velocity.level(2), &[1.0, 1.0]);
        assert_eq!(s.temperature.as_ref().unwrap().level(1), &[0.5; 3]);
        assert!(s.concentration.is_none());
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(1.0, 0.5).unwrap(), 2);
        assert_eq!(step_count(400.0, 0.5).unwrap(), 800);
        assert_eq!(step_count(10.0, 0.1).unwrap(), 100);
        assert_eq!(step_count(1.0, 0.3).unwrap(), 4);
        assert!(step_count(1.0, 0.0).is_err());
        assert!(step_count(-1.0, 0.1).is_err());
    }

    #[test]
    fn scalar_reduction_of_one_step() {
        let y1 = scalar_ode_step(&SchemeCoeffs::BLEBDF, [1.0; 3], -1.0, 0.1);
        assert!((y1 - 50.0 / 53.0).abs() < 1e-15);
        // BDF2 closed form: (4 y^n - y^{n-1}) / (3 - 2 λ Δt).
        let (yn, ym, l, dt) = (1.3, 0.9, -2.0, 0.05);
        let y = scalar_ode_step(&SchemeCoeffs::BDF2, [yn, ym, 123.0], l, dt);
        assert!((y - (4.0 * yn - ym) / (3.0 - 2.0 * l * dt)).abs() < 1e-14);
    }
}
