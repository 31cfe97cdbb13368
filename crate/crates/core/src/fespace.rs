//! Lagrange finite element spaces (P1/P2, scalar or 2-vector) and essential
//! boundary condition handling.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::solvers::LinearSystem;
use crate::sparse::{Pattern, SparseMatrix};

/// Dense DOF values of one field at one time level.
pub type Coefficients = Vec<f64>;

/// Sparsity pattern of the scalar operator on a space together with, for
/// each cell, the value-array position of every local `(i, j)` pair.
#[derive(Debug)]
pub(crate) struct CellPattern {
    pub pattern: Arc<Pattern>,
    pub positions: Vec<usize>,
}

#[derive(Debug)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    components: usize,
    dof_coords: Vec<Point>,
    /// Flattened scalar cell-to-DOF map, `n_local` entries per triangle.
    cell_dofs: Vec<usize>,
    cell_pattern: OnceLock<CellPattern>,
}

impl Clone for FunctionSpace {
    fn clone(&self) -> Self {
        FunctionSpace {
            mesh: Arc::clone(&self.mesh),
            degree: self.degree,
            components: self.components,
            dof_coords: self.dof_coords.clone(),
            cell_dofs: self.cell_dofs.clone(),
            cell_pattern: OnceLock::new(),
        }
    }
}

/// Scalar DOFs: vertices first, then one per edge (P2 only, numbered
/// `n_vertices + edge`). Vector DOFs are blocked: component `c` of scalar DOF
/// `i` is `c * n_scalar + i`.
pub fn build_space(mesh: Arc<Mesh>, degree: usize, components: usize) -> Result<FunctionSpace> {
    if !(1..=2).contains(&degree) {
        return Err(Error::UnsupportedDegree(degree));
    }
    if !(1..=2).contains(&components) {
        return Err(Error::UnsupportedComponents(components));
    }
    let nv = mesh.n_vertices();
    let mut dof_coords = mesh.vertices.clone();
    let n_local = if degree == 1 { 3 } else { 6 };
    let mut cell_dofs = Vec::with_capacity(n_local * mesh.n_triangles());
    if degree == 2 {
        dof_coords.extend(mesh.edges.iter().map(|&[a, b]| {
            let (p, q) = (mesh.vertices[a], mesh.vertices[b]);
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
        }));
    }
    for (t, tri) in mesh.triangles.iter().enumerate() {
        cell_dofs.extend_from_slice(tri);
        if degree == 2 {
            cell_dofs.extend(mesh.triangle_edges[t].iter().map(|e| nv + e));
        }
    }
    Ok(FunctionSpace {
        mesh,
        degree,
        components,
        dof_coords,
        cell_dofs,
        cell_pattern: OnceLock::new(),
    })
}

impl FunctionSpace {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_local(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn n_scalar_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.components * self.n_scalar_dofs()
    }

    /// Node coordinates of the scalar DOFs.
    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    /// Scalar DOFs of triangle `t` in local order (vertices, then edges).
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let n = self.n_local();
        &self.cell_dofs[t * n..(t + 1) * n]
    }

    pub fn same_mesh(&self, other: &FunctionSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh) || *self.mesh == *other.mesh
    }

    /// Same mesh and element, any component count.
    pub fn same_scalar_layout(&self, other: &FunctionSpace) -> bool {
        self.degree == other.degree && self.same_mesh(other)
    }

    pub(crate) fn cell_pattern(&self) -> &CellPattern {
        self.cell_pattern.get_or_init(|| {
            let n = self.n_local();
            let mut rows: Vec<Vec<usize>> = vec![Vec::new(); self.n_scalar_dofs()];
            for t in 0..self.mesh.n_triangles() {
                let dofs = self.cell_dofs(t);
                for &i in dofs {
                    rows[i].extend_from_slice(dofs);
                }
            }
            let pattern = Arc::new(Pattern::from_rows(self.n_scalar_dofs(), rows));
            let mut positions = Vec::with_capacity(n * n * self.mesh.n_triangles());
            for t in 0..self.mesh.n_triangles() {
                let dofs = self.cell_dofs(t);
                for &i in dofs {
                    for &j in dofs {
                        positions.push(pattern.position(i, j).expect("cell pair in pattern"));
                    }
                }
            }
            CellPattern { pattern, positions }
        })
    }

    /// Scalar DOFs located on boundary edges carrying one of `tags`, sorted.
    pub fn boundary_scalar_dofs(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let nv = self.mesh.n_vertices();
        let mut dofs: Vec<usize> = Vec::new();
        for be in self.mesh.boundary_edges.iter().filter(|be| tags.contains(&be.tag)) {
            dofs.extend_from_slice(&be.vertices);
            if self.degree == 2 {
                dofs.push(nv + be.edge);
            }
        }
        dofs.sort_unstable();
        dofs.dedup();
        dofs
    }

    /// All DOFs (every component) on boundary edges carrying one of `tags`.
    pub fn boundary_dofs(&self, tags: &[BoundaryTag]) -> Vec<usize> {
        let scalar = self.boundary_scalar_dofs(tags);
        let ns = self.n_scalar_dofs();
        (0..self.components)
            .flat_map(|c| scalar.iter().map(move |i| c * ns + i))
            .collect()
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate<F>(&self, f: F) -> Result<Coefficients>
    where
        F: Fn(f64, f64) -> f64,
    {
        if self.components != 1 {
            return Err(Error::UnsupportedComponents(self.components));
        }
        self.dof_coords
            .iter()
            .map(|&[x, y]| finite(x, y, f(x, y)))
            .collect()
    }

    /// Nodal interpolant of a 2-vector function.
    pub fn interpolate_vector<F>(&self, f: F) -> Result<Coefficients>
    where
        F: Fn(f64, f64) -> [f64; 2],
    {
        if self.components != 2 {
            return Err(Error::UnsupportedComponents(self.components));
        }
        let ns = self.n_scalar_dofs();
        let mut out = vec![0.0; 2 * ns];
        for (i, &[x, y]) in self.dof_coords.iter().enumerate() {
            let v = f(x, y);
            out[i] = finite(x, y, v[0])?;
            out[ns + i] = finite(x, y, v[1])?;
        }
        Ok(out)
    }

    fn check_len(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(),
                got: c.len(),
            });
        }
        Ok(())
    }
}

fn finite(x: f64, y: f64, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { x, y, value })
    }
}

/// `√(cᵀ M c)`.
pub fn l2_norm(space: &FunctionSpace, c: &[f64], mass: &SparseMatrix) -> Result<f64> {
    space.check_len(c)?;
    if mass.nrows() != c.len() || mass.ncols() != c.len() {
        return Err(Error::DimensionMismatch {
            expected: c.len(),
            got: mass.nrows(),
        });
    }
    Ok(mass.bilinear(c, c)?.max(0.0).sqrt())
}

/// Scales every prescribed value at time `t`.
pub type TimeProfile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Prescribed values on a set of DOFs: `value(t) = values[k] * profile(t)`.
#[derive(Clone, Default)]
pub struct DirichletSet {
    entries: BTreeMap<usize, f64>,
    profile: Option<TimeProfile>,
}

impl std::fmt::Debug for DirichletSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletSet")
            .field("entries", &self.entries)
            .field("time_dependent", &self.profile.is_some())
            .finish()
    }
}

impl DirichletSet {
    pub fn new() -> Self {
        DirichletSet::default()
    }

    pub fn homogeneous(dofs: &[usize]) -> Self {
        DirichletSet {
            entries: dofs.iter().map(|&d| (d, 0.0)).collect(),
            profile: None,
        }
    }

    /// Rejects repeated DOF indices.
    pub fn from_values(dofs: &[usize], values: &[f64]) -> Result<Self> {
        if dofs.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: dofs.len(),
                got: values.len(),
            });
        }
        let mut entries = BTreeMap::new();
        for (&d, &v) in dofs.iter().zip(values) {
            if entries.insert(d, v).is_some() {
                return Err(Error::Config(format!("DOF {d} constrained twice")));
            }
        }
        Ok(DirichletSet {
            entries,
            profile: None,
        })
    }

    /// Values of `g` at the nodes of the given scalar DOFs.
    pub fn from_function<F>(space: &FunctionSpace, dofs: &[usize], g: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> f64,
    {
        let coords = space.dof_coords();
        let ns = space.n_scalar_dofs();
        let values = dofs
            .iter()
            .map(|&d| {
                let [x, y] = *coords.get(d % ns).ok_or(Error::IndexOutOfRange {
                    index: d,
                    len: space.n_dofs(),
                })?;
                finite(x, y, g(x, y))
            })
            .collect::<Result<Vec<_>>>()?;
        DirichletSet::from_values(dofs, &values)
    }

    pub fn with_profile(mut self, profile: TimeProfile) -> Self {
        self.profile = Some(profile);
        self
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dofs(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.keys().copied()
    }

    pub fn contains(&self, dof: usize) -> bool {
        self.entries.contains_key(&dof)
    }

    /// `(dof, value)` pairs at time `t`, sorted by DOF.
    pub fn values_at(&self, t: f64) -> Vec<(usize, f64)> {
        let s = self.profile.as_ref().map_or(1.0, |p| p(t));
        self.entries.iter().map(|(&d, &v)| (d, v * s)).collect()
    }

    /// Overwrites the constrained entries of `x` with their values at `t`.
    pub fn impose(&self, x: &mut [f64], t: f64) -> Result<()> {
        for (d, v) in self.values_at(t) {
            let len = x.len();
            *x.get_mut(d).ok_or(Error::IndexOutOfRange { index: d, len })? = v;
        }
        Ok(())
    }
}

/// Replaces constrained rows by identity rows with the prescribed value on
/// the right-hand side and eliminates the constrained columns into the
/// right-hand side of the remaining rows.
pub fn apply_dirichlet(system: LinearSystem, dset: &DirichletSet, t: f64) -> Result<LinearSystem> {
    if dset.is_empty() {
        return Ok(system);
    }
    let LinearSystem {
        matrix,
        mut rhs,
        multiplier,
    } = system;
    let n = matrix.nrows();
    let mut value = vec![None; n];
    for (d, v) in dset.values_at(t) {
        if d >= n {
            return Err(Error::IndexOutOfRange { index: d, len: n });
        }
        value[d] = Some(v);
    }
    let mut indptr = Vec::with_capacity(n + 1);
    indptr.push(0);
    let mut indices = Vec::with_capacity(matrix.nnz());
    let mut data = Vec::with_capacity(matrix.nnz());
    for i in 0..n {
        if let Some(g) = value[i] {
            indices.push(i);
            data.push(1.0);
            rhs[i] = g;
        } else {
            for (j, a) in matrix.row(i) {
                match value[j] {
                    Some(g) => rhs[i] -= a * g,
                    None => {
                        indices.push(j);
                        data.push(a);
                    }
                }
            }
        }
        indptr.push(indices.len());
    }
    let pattern = Pattern {
        nrows: n,
        ncols: matrix.ncols(),
        indptr,
        indices,
    };
    Ok(LinearSystem {
        matrix: SparseMatrix::from_parts(Arc::new(pattern), data)?,
        rhs,
        multiplier,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{structured_triangulation, Rect};

    fn space(n: usize, degree: usize, components: usize) -> FunctionSpace {
        let mesh = Arc::new(structured_triangulation(n, n, Rect::unit_square()).unwrap());
        build_space(mesh, degree, components).unwrap()
    }

    #[test]
    fn dof_counts() {
        assert_eq!(space(16, 2, 2).n_dofs(), 2178);
        assert_eq!(space(1, 1, 1).n_dofs(), 4);
        assert_eq!(space(16, 1, 1).n_dofs(), 289);
        let mesh = Arc::new(structured_triangulation(2, 2, Rect::unit_square()).unwrap());
        assert!(matches!(build_space(Arc::clone(&mesh), 3, 1), Err(Error::UnsupportedDegree(3))));
        assert!(matches!(build_space(mesh, 1, 3), Err(Error::UnsupportedComponents(3))));
    }

    #[test]
    fn shared_edges_share_dofs() {
        let s = space(3, 2, 1);
        let mesh = s.mesh();
        let mut owner: BTreeMap<usize, Point> = BTreeMap::new();
        for t in 0..mesh.n_triangles() {
            let pts = mesh.triangle_points(t);
            let dofs = s.cell_dofs(t);
            for k in 0..3 {
                let (a, b) = (pts[k], pts[(k + 1) % 3]);
                let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let prev = owner.insert(dofs[3 + k], mid);
                if let Some(p) = prev {
                    assert_eq!(p, mid);
                }
                assert_eq!(s.dof_coords()[dofs[3 + k]], mid);
            }
        }
    }

    #[test]
    fn interpolation() {
        let s = space(2, 1, 1);
        let c = s.interpolate(|x, _| x).unwrap();
        for (v, p) in c.iter().zip(s.dof_coords()) {
            assert_eq!(*v, p[0]);
        }
        let s2 = space(2, 2, 1);
        let c = s2
            .interpolate(|x, y| (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin())
            .unwrap();
        let centre = s2.dof_coords().iter().position(|p| *p == [0.5, 0.5]).unwrap();
        assert!((c[centre] - 1.0).abs() < 1e-15);
        assert!(s2.interpolate(|_, _| 0.0).unwrap().iter().all(|v| *v == 0.0));
        assert!(matches!(s2.interpolate(|x, _| 1.0 / x), Err(Error::NonFinite { .. })));
        assert!(s2.interpolate_vector(|_, _| [0.0, 0.0]).is_err());
    }

    #[test]
    fn boundary_dof_sets() {
        let s = space(4, 2, 2);
        // P2 nodes on the boundary of a 4x4 grid: 2 * 4 * 4.
        assert_eq!(s.boundary_scalar_dofs(&[BoundaryTag::DirichletWall]).len(), 32);
        assert_eq!(s.boundary_dofs(&[BoundaryTag::DirichletWall]).len(), 64);
        assert!(s.boundary_dofs(&[BoundaryTag::GammaT]).is_empty());
    }

    #[test]
    fn dirichlet_rows_and_idempotence() {
        let a = SparseMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0],
            vec![-1.0, 4.0, -1.0],
            vec![0.0, -1.0, 4.0],
        ]);
        let sys = LinearSystem::new(a, vec![1.0, 2.0, 3.0]).unwrap();
        let d = DirichletSet::from_values(&[0], &[2.0]).unwrap();
        let once = apply_dirichlet(sys.clone(), &d, 0.0).unwrap();
        assert_eq!(once.matrix.to_dense()[0], vec![1.0, 0.0, 0.0]);
        assert_eq!(once.matrix.get(1, 0), 0.0);
        assert_eq!(once.rhs, vec![2.0, 4.0, 3.0]);
        let twice = apply_dirichlet(once.clone(), &d, 0.0).unwrap();
        assert_eq!(twice.matrix.to_dense(), once.matrix.to_dense());
        assert_eq!(twice.rhs, once.rhs);
        let same = apply_dirichlet(sys.clone(), &DirichletSet::new(), 0.0).unwrap();
        assert_eq!(same.matrix.to_dense(), sys.matrix.to_dense());
        assert!(DirichletSet::from_values(&[1, 1], &[0.0, 0.0]).is_err());
        let bad = DirichletSet::homogeneous(&[7]);
        assert!(matches!(
            apply_dirichlet(sys, &bad, 0.0),
            Err(Error::IndexOutOfRange { index: 7, .. })
        ));
    }

    #[test]
    fn time_profile_scales_values() {
        let d = DirichletSet::from_values(&[3], &[2.0])
            .unwrap()
            .with_profile(Arc::new(|t| t * t));
        assert_eq!(d.values_at(3.0), vec![(3, 18.0)]);
    }
}
