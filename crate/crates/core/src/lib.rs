//! Mixed finite element solver for incompressible flow, natural convection and
//! double-diffusive convection with blended extrapolated BDF time stepping,
//! plus a toolkit that checks its long-time stability estimates numerically.
//!
//! Velocity and pressure use the Taylor-Hood pair P2/P1; temperature and
//! concentration use P2. Each time step solves one linear system per field.

#![allow(clippy::needless_range_loop, clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fespace;
pub mod mesh;
pub mod solvers;
pub mod sparse;
pub mod stability;
pub mod timestepping;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
