use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mesh::Rect;
use crate::timestepping::Scheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Nse,
    Natconv,
    Doublediff,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Nse => "nse",
            ProblemKind::Natconv => "natconv",
            ProblemKind::Doublediff => "doublediff",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nse" => Ok(ProblemKind::Nse),
            "natconv" => Ok(ProblemKind::Natconv),
            "doublediff" => Ok(ProblemKind::Doublediff),
            other => Err(Error::Config(format!(
                "unknown problem '{other}' (expected nse, natconv or doublediff)"
            ))),
        }
    }
}

/// Dimensionless groups of the double-diffusive cavity. `le` is stored as
/// `sc / pr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionlessGroups {
    /// Buoyancy ratio `β_C ΔC / (β_T ΔT)`.
    pub n: f64,
    pub sc: f64,
    pub pr: f64,
    pub le: f64,
    pub ra: f64,
    /// Darcy number; infinite disables the drag term.
    pub da: f64,
}

/// Coefficients of the nondimensional double-diffusive system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityCoefficients {
    pub nu: f64,
    pub kappa: f64,
    pub dc: f64,
    pub beta_t_g: f64,
    pub beta_c_g: f64,
    pub da_inv: f64,
}

impl DimensionlessGroups {
    pub fn new(ra: f64, le: f64, pr: f64, n: f64, da: f64) -> Result<Self> {
        for (name, v) in [("ra", ra), ("le", le), ("pr", pr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive",
                });
            }
        }
        if !n.is_finite() {
            return Err(Error::InvalidParameter {
                name: "n_ratio",
                value: n,
                reason: "must be finite",
            });
        }
        if !(da > 0.0) {
            return Err(Error::InvalidParameter {
                name: "da",
                value: da,
                reason: "Darcy number must be positive (infinity allowed)",
            });
        }
        let sc = le * pr;
        Ok(DimensionlessGroups {
            n,
            sc,
            pr,
            le: sc / pr,
            ra,
            da,
        })
    }

    /// `ν = Pr`, `κ = 1`, `D_c = 1/Le`, `β_T g = Ra Pr`, `β_C g = Ra Pr N`,
    /// `Da⁻¹ = 1/Da`.
    pub fn coefficients(&self) -> CavityCoefficients {
        CavityCoefficients {
            nu: self.pr,
            kappa: 1.0,
            dc: 1.0 / self.le,
            beta_t_g: self.ra * self.pr,
            beta_c_g: self.ra * self.pr * self.n,
            da_inv: 1.0 / self.da,
        }
    }
}

/// One experiment. Optional physical coefficients fall back to the defaults
/// of the problem kind.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemConfig {
    pub problem: ProblemKind,
    pub scheme: Scheme,
    pub dt: f64,
    pub t_end: f64,
    pub nx: usize,
    pub ny: usize,
    pub nu: Option<f64>,
    pub kappa: Option<f64>,
    pub dc: Option<f64>,
    pub ri: Option<f64>,
    pub ra: f64,
    pub le: f64,
    pub pr: f64,
    pub n_ratio: f64,
    pub da_inv: f64,
    /// Apply the body force of the problem (the NSE cavity only has one).
    pub forcing: bool,
    /// Start from rest and, for scalars, from zero interior values.
    pub zero_initial: bool,
    /// Wall values (left, right) of temperature and concentration.
    pub t_walls: (f64, f64),
    pub c_walls: (f64, f64),
    /// Track the energy ledger and stability bounds (BLEBDF only).
    pub check_bounds: bool,
    pub out: Option<PathBuf>,
    pub execution: Execution,
}

impl ProblemConfig {
    pub fn new(problem: ProblemKind) -> Self {
        let (nx, ny, dt, t_end) = match problem {
            ProblemKind::Nse => (16, 16, 0.5, 400.0),
            ProblemKind::Natconv => (16, 16, 0.5, 150.0),
            ProblemKind::Doublediff => (10, 20, 0.1, 10.0),
        };
        ProblemConfig {
            problem,
            scheme: Scheme::Blebdf,
            dt,
            t_end,
            nx,
            ny,
            nu: None,
            kappa: None,
            dc: None,
            ri: None,
            ra: 1.0e3,
            le: 2.0,
            pr: 1.0,
            n_ratio: 0.8,
            da_inv: 0.0,
            forcing: problem == ProblemKind::Nse,
            zero_initial: false,
            t_walls: (1.0, 0.0),
            c_walls: (1.0, 0.0),
            check_bounds: true,
            out: None,
            execution: Execution::default(),
        }
    }

    pub fn rect(&self) -> Rect {
        match self.problem {
            ProblemKind::Doublediff => Rect {
                x0: 0.0,
                x1: 1.0,
                y0: 0.0,
                y1: 2.0,
            },
            _ => Rect::unit_square(),
        }
    }

    pub fn groups(&self) -> Result<DimensionlessGroups> {
        let da = if self.da_inv == 0.0 { f64::INFINITY } else { 1.0 / self.da_inv };
        DimensionlessGroups::new(self.ra, self.le, self.pr, self.n_ratio, da)
    }

    /// Resolved viscosity.
    pub fn viscosity(&self) -> Result<f64> {
        match (self.nu, self.problem) {
            (Some(nu), _) => Ok(nu),
            (None, ProblemKind::Doublediff) => Ok(self.groups()?.coefficients().nu),
            (None, ProblemKind::Nse) => Ok(1.0),
            (None, ProblemKind::Natconv) => Ok(0.01),
        }
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_into(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    /// Reads a config file. The `problem` key selects the defaults and may
    /// be overridden by `fallback` when absent.
    pub fn from_file(path: &Path, fallback: Option<ProblemKind>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let problem = text
            .lines()
            .filter_map(|l| l.split('#').next())
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == "problem")
            .map(|(_, v)| v.parse::<ProblemKind>())
            .transpose()?
            .or(fallback)
            .ok_or_else(|| Error::Config(format!("{}: no problem given", path.display())))?;
        let mut cfg = ProblemConfig::new(problem);
        cfg.parse_into(&text)?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        match key.as_str() {
            "problem" => {
                let p: ProblemKind = value.parse()?;
                if p != self.problem {
                    return Err(Error::Config(format!(
                        "problem '{p}' conflicts with '{}'",
                        self.problem
                    )));
                }
            }
            "scheme" => self.scheme = value.parse()?,
            "dt" => self.dt = real(&key, value)?,
            "t_end" => self.t_end = real(&key, value)?,
            "nx" => self.nx = count(&key, value)?,
            "ny" => self.ny = count(&key, value)?,
            "nu" => self.nu = Some(real(&key, value)?),
            "kappa" => self.kappa = Some(real(&key, value)?),
            "dc" => self.dc = Some(real(&key, value)?),
            "ri" => self.ri = Some(real(&key, value)?),
            "ra" => self.ra = real(&key, value)?,
            "le" => self.le = real(&key, value)?,
            "pr" => self.pr = real(&key, value)?,
            "n_ratio" => self.n_ratio = real(&key, value)?,
            "da_inv" => self.da_inv = real(&key, value)?,
            "forcing" => self.forcing = boolean(&key, value)?,
            "zero_initial" => self.zero_initial = boolean(&key, value)?,
            "t_left" => self.t_walls.0 = real(&key, value)?,
            "t_right" => self.t_walls.1 = real(&key, value)?,
            "c_left" => self.c_walls.0 = real(&key, value)?,
            "c_right" => self.c_walls.1 = real(&key, value)?,
            "check_bounds" => self.check_bounds = boolean(&key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "parallel" => {
                self.execution = if boolean(&key, value)? {
                    Execution::Parallel
                } else {
                    Execution::Sequential
                }
            }
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidResolution { nx: self.nx, ny: self.ny });
        }
        for (name, v) in [("dt", self.dt), ("t_end", self.t_end)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive",
                });
            }
        }
        Ok(())
    }
}

fn real(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: '{value}' is not a number")))
}

fn count(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: '{value}' is not a nonnegative integer")))
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: '{value}' is not a boolean"))),
    }
}
