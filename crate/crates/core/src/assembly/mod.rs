//! Sparse operators and load vectors of the weak forms.
//!
//! Vector-valued operators act componentwise and are block-diagonal copies of
//! the scalar ones. Per-cell local matrices may be computed in parallel; they
//! are always scattered into the global matrix in triangle order, so results
//! are bit-identical across execution policies.

pub mod element;
pub mod quadrature;

use std::sync::Arc;

pub use element::{shape, Geometry, ShapeValues};
pub use quadrature::QuadratureRule;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fespace::FunctionSpace;
use crate::mesh::Mesh;
use crate::sparse::SparseMatrix;

type Local = [f64; 36];

struct CellData {
    geo: Geometry,
    /// Shape values of the space at each quadrature point.
    shapes: Vec<ShapeValues>,
    /// Physical quadrature weights.
    weights: Vec<f64>,
}

fn cell_data(space: &FunctionSpace, rule: &QuadratureRule, t: usize) -> CellData {
    let geo = Geometry::new(space.mesh().triangle_points(t));
    let shapes = rule.points.iter().map(|l| shape(space.degree(), &geo, l)).collect();
    let weights = rule.weights.iter().map(|w| 2.0 * geo.area * w).collect();
    CellData { geo, shapes, weights }
}

/// Assembles a scalar operator on `space` from per-cell local matrices
/// (row-major `n_local x n_local`), then repeats it for each component.
fn assemble_cells<F>(space: &FunctionSpace, exec: Execution, local: F) -> SparseMatrix
where
    F: Fn(usize) -> Local + Send + Sync,
{
    let cp = space.cell_pattern();
    let n = space.n_local();
    let locals = exec.map_range(space.mesh().n_triangles(), local);
    let mut m = SparseMatrix::zeros(Arc::clone(&cp.pattern));
    let values = m.values_mut();
    for (t, loc) in locals.iter().enumerate() {
        let pos = &cp.positions[t * n * n..(t + 1) * n * n];
        for (k, &p) in pos.iter().enumerate() {
            values[p] += loc[k];
        }
    }
    if space.components() == 1 {
        m
    } else {
        m.block_diagonal(space.components())
    }
}

pub fn assemble_mass(space: &FunctionSpace) -> SparseMatrix {
    assemble_mass_with(space, Execution::default())
}

pub fn assemble_mass_with(space: &FunctionSpace, exec: Execution) -> SparseMatrix {
    let rule = QuadratureRule::degree5();
    let n = space.n_local();
    assemble_cells(space, exec, |t| {
        let cd = cell_data(space, &rule, t);
        let mut loc = [0.0; 36];
        for (s, w) in cd.shapes.iter().zip(&cd.weights) {
            for i in 0..n {
                for j in 0..n {
                    loc[i * n + j] += w * (s.values[i] * s.values[j]);
                }
            }
        }
        loc
    })
}

/// `coefficient * (∇u, ∇v)`.
pub fn assemble_stiffness(space: &FunctionSpace, coefficient: f64) -> Result<SparseMatrix> {
    assemble_stiffness_with(space, coefficient, Execution::default())
}

pub fn assemble_stiffness_with(space: &FunctionSpace, coefficient: f64, exec: Execution) -> Result<SparseMatrix> {
    if !(coefficient > 0.0 && coefficient.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "coefficient",
            value: coefficient,
            reason: "diffusion coefficient must be positive",
        });
    }
    let rule = QuadratureRule::degree5();
    let n = space.n_local();
    Ok(assemble_cells(space, exec, |t| {
        let cd = cell_data(space, &rule, t);
        let mut loc = [0.0; 36];
        for (s, w) in cd.shapes.iter().zip(&cd.weights) {
            for i in 0..n {
                for j in 0..n {
                    let g = s.grads[i][0] * s.grads[j][0] + s.grads[i][1] * s.grads[j][1];
                    loc[i * n + j] += coefficient * (w * g);
                }
            }
        }
        loc
    }))
}

/// `B[q, v] = (q, ∇·v)`: rows are pressure DOFs, columns velocity DOFs.
pub fn assemble_divergence(vel: &FunctionSpace, pres: &FunctionSpace) -> Result<SparseMatrix> {
    if !vel.same_mesh(pres) {
        return Err(Error::MeshMismatch);
    }
    if vel.components() != 2 {
        return Err(Error::UnsupportedComponents(vel.components()));
    }
    if pres.components() != 1 {
        return Err(Error::UnsupportedComponents(pres.components()));
    }
    let rule = QuadratureRule::degree5();
    let ns = vel.n_scalar_dofs();
    let mut triplets = Vec::new();
    for t in 0..vel.mesh().n_triangles() {
        let cv = cell_data(vel, &rule, t);
        let cp = cell_data(pres, &rule, t);
        let (dv, dp) = (vel.cell_dofs(t), pres.cell_dofs(t));
        for a in 0..pres.n_local() {
            for c in 0..2 {
                for j in 0..vel.n_local() {
                    let v: f64 = (0..rule.len())
                        .map(|q| cv.weights[q] * cp.shapes[q].values[a] * cv.shapes[q].grads[j][c])
                        .sum();
                    triplets.push((dp[a], c * ns + dv[j], v));
                }
            }
        }
    }
    SparseMatrix::from_triplets(pres.n_dofs(), vel.n_dofs(), &triplets)
}

/// Skew-symmetric convection matrix
/// `N(w)[i, j] = ½((w·∇)φ_j, φ_i) − ½((w·∇)φ_i, φ_j)` on `space`, with the
/// advecting field `w` given by coefficients in the vector space `vel`.
pub fn assemble_convection_skew(space: &FunctionSpace, vel: &FunctionSpace, w: &[f64]) -> Result<SparseMatrix> {
    assemble_convection_skew_with(space, vel, w, Execution::default())
}

pub fn assemble_convection_skew_with(
    space: &FunctionSpace,
    vel: &FunctionSpace,
    w: &[f64],
    exec: Execution,
) -> Result<SparseMatrix> {
    if !space.same_mesh(vel) {
        return Err(Error::MeshMismatch);
    }
    if vel.components() != 2 {
        return Err(Error::UnsupportedComponents(vel.components()));
    }
    if w.len() != vel.n_dofs() {
        return Err(Error::DimensionMismatch {
            expected: vel.n_dofs(),
            got: w.len(),
        });
    }
    let rule = QuadratureRule::degree5();
    let n = space.n_local();
    let nsw = vel.n_scalar_dofs();
    Ok(assemble_cells(space, exec, |t| {
        let cd = cell_data(space, &rule, t);
        let wshapes: Vec<ShapeValues> = rule.points.iter().map(|l| shape(vel.degree(), &cd.geo, l)).collect();
        let dw = vel.cell_dofs(t);
        let mut a = [0.0; 36];
        for q in 0..rule.len() {
            let ws = &wshapes[q];
            let mut wq = [0.0; 2];
            for k in 0..ws.n {
                wq[0] += w[dw[k]] * ws.values[k];
                wq[1] += w[nsw + dw[k]] * ws.values[k];
            }
            let s = &cd.shapes[q];
            let mut adv = [0.0; 6];
            for j in 0..n {
                adv[j] = wq[0] * s.grads[j][0] + wq[1] * s.grads[j][1];
            }
            for i in 0..n {
                for j in 0..n {
                    a[i * n + j] += cd.weights[q] * adv[j] * s.values[i];
                }
            }
        }
        let mut loc = [0.0; 36];
        for i in 0..n {
            for j in 0..n {
                loc[i * n + j] = 0.5 * (a[i * n + j] - a[j * n + i]);
            }
        }
        loc
    }))
}

/// Coupling `scale * (s · direction, v)` from scalar coefficients to a
/// velocity-test load. `direction` must be a unit vector.
pub fn assemble_buoyancy(
    vel: &FunctionSpace,
    scalar: &FunctionSpace,
    direction: [f64; 2],
    scale: f64,
) -> Result<SparseMatrix> {
    if !vel.same_mesh(scalar) {
        return Err(Error::MeshMismatch);
    }
    if vel.components() != 2 {
        return Err(Error::UnsupportedComponents(vel.components()));
    }
    if scalar.components() != 1 {
        return Err(Error::UnsupportedComponents(scalar.components()));
    }
    let len = direction[0].hypot(direction[1]);
    if (len - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter {
            name: "direction",
            value: len,
            reason: "buoyancy direction must be a unit vector",
        });
    }
    let rule = QuadratureRule::degree5();
    let ns = vel.n_scalar_dofs();
    let mut triplets = Vec::new();
    for t in 0..vel.mesh().n_triangles() {
        let cv = cell_data(vel, &rule, t);
        let cs = cell_data(scalar, &rule, t);
        let (dv, ds) = (vel.cell_dofs(t), scalar.cell_dofs(t));
        for i in 0..vel.n_local() {
            for j in 0..scalar.n_local() {
                let m: f64 = (0..rule.len())
                    .map(|q| cv.weights[q] * cv.shapes[q].values[i] * cs.shapes[q].values[j])
                    .sum();
                for c in 0..2 {
                    if direction[c] != 0.0 {
                        triplets.push((c * ns + dv[i], ds[j], scale * direction[c] * m));
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(vel.n_dofs(), scalar.n_dofs(), &triplets)
}

/// `(f(·, t), φ_i)` for every basis function; `N` must equal the component
/// count of `space`.
pub fn assemble_load<const N: usize, F>(space: &FunctionSpace, f: F, t: f64) -> Result<Vec<f64>>
where
    F: Fn(f64, f64, f64) -> [f64; N],
{
    if N != space.components() {
        return Err(Error::UnsupportedComponents(N));
    }
    let rule = QuadratureRule::degree5();
    let ns = space.n_scalar_dofs();
    let mut out = vec![0.0; space.n_dofs()];
    for tri in 0..space.mesh().n_triangles() {
        let cd = cell_data(space, &rule, tri);
        let dofs = space.cell_dofs(tri);
        for (q, l) in rule.points.iter().enumerate() {
            let [x, y] = cd.geo.point(l);
            let fv = f(x, y, t);
            for (c, &v) in fv.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { x, y, value: v });
                }
                for i in 0..space.n_local() {
                    out[c * ns + dofs[i]] += cd.weights[q] * v * cd.shapes[q].values[i];
                }
            }
        }
    }
    Ok(out)
}

/// L² norm of an analytic function over the mesh, by the same quadrature
/// used for loads.
pub fn function_l2_norm<const N: usize, F>(mesh: &Mesh, f: F, t: f64) -> f64
where
    F: Fn(f64, f64, f64) -> [f64; N],
{
    let rule = QuadratureRule::degree5();
    let mut sum = 0.0;
    for tri in 0..mesh.n_triangles() {
        let geo = Geometry::new(mesh.triangle_points(tri));
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let [x, y] = geo.point(l);
            let v = f(x, y, t);
            sum += 2.0 * geo.area * w * v.iter().map(|c| c * c).sum::<f64>();
        }
    }
    sum.sqrt()
}
