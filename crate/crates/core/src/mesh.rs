//! Structured conforming triangulations of axis-aligned rectangles.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let ok = [x0, x1, y0, y1].iter().all(|v| v.is_finite()) && x0 < x1 && y0 < y1;
        if !ok {
            return Err(Error::InvalidRect { x0, x1, y0, y1 });
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn unit_square() -> Self {
        Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];
}

/// Boundary segment classification. `GammaT` carries essential conditions for
/// scalar fields, `GammaB` natural (zero-flux) ones. Velocity is no-slip on
/// every tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    DirichletWall,
    GammaT,
    GammaB,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub edge: usize,
    pub tag: BoundaryTag,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub rect: Rect,
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    /// Unique edges as sorted vertex pairs, numbered by first appearance.
    pub edges: Vec<[usize; 2]>,
    /// Local edge `k` of a triangle joins its vertices `k` and `(k + 1) % 3`.
    pub triangle_edges: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshStats {
    pub n_vertices: usize,
    pub n_triangles: usize,
    pub h_max: f64,
    /// Smallest interior angle over all triangles, in radians.
    pub min_angle: f64,
}

/// Maps each rectangle side to the tag its boundary edges receive.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SideTags(HashMap<Side, BoundaryTag>);

impl SideTags {
    pub fn new() -> Self {
        SideTags::default()
    }

    pub fn uniform(tag: BoundaryTag) -> Self {
        let mut tags = SideTags::new();
        for side in Side::ALL {
            tags.set(side, tag);
        }
        tags
    }

    /// Vertical walls essential, horizontal walls natural.
    pub fn differentially_heated() -> Self {
        SideTags::new()
            .with(Side::Left, BoundaryTag::GammaT)
            .with(Side::Right, BoundaryTag::GammaT)
            .with(Side::Bottom, BoundaryTag::GammaB)
            .with(Side::Top, BoundaryTag::GammaB)
    }

    pub fn with(mut self, side: Side, tag: BoundaryTag) -> Self {
        self.set(side, tag);
        self
    }

    pub fn set(&mut self, side: Side, tag: BoundaryTag) {
        self.0.insert(side, tag);
    }

    pub fn get(&self, side: Side) -> Option<BoundaryTag> {
        self.0.get(&side).copied()
    }
}

/// Splits each of the `nx * ny` cells of `rect` along its bottom-left to
/// top-right diagonal. All boundary edges start out tagged `DirichletWall`.
pub fn structured_triangulation(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidResolution { nx, ny });
    }
    let dx = rect.width() / nx as f64;
    let dy = rect.height() / ny as f64;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // Snap the last row/column onto the rectangle exactly.
        let y = if j == ny { rect.y1 } else { rect.y0 + j as f64 * dy };
        for i in 0..=nx {
            let x = if i == nx { rect.x1 } else { rect.x0 + i as f64 * dx };
            vertices.push([x, y]);
        }
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let mut mesh = Mesh {
        rect,
        vertices,
        triangles,
        edges: Vec::new(),
        triangle_edges: Vec::new(),
        boundary_edges: Vec::new(),
    };
    mesh.build_edges();
    Ok(mesh)
}

/// Retags every boundary edge by the side of `rect` it lies on.
pub fn tag_boundaries(mut mesh: Mesh, tags: &SideTags) -> Result<Mesh> {
    for be in mesh.boundary_edges.iter_mut() {
        let [a, b] = be.vertices;
        let side = side_of(&mesh.rect, mesh.vertices[a], mesh.vertices[b]).ok_or_else(|| {
            Error::Geometry(format!(
                "boundary edge ({a}, {b}) does not lie on a side of the rectangle"
            ))
        })?;
        be.tag = tags
            .get(side)
            .ok_or_else(|| Error::Geometry(format!("no tag given for side {side:?}")))?;
    }
    Ok(mesh)
}

pub fn mesh_stats(mesh: &Mesh) -> MeshStats {
    let mut h_max: f64 = 0.0;
    for &[a, b] in &mesh.edges {
        h_max = h_max.max(dist(mesh.vertices[a], mesh.vertices[b]));
    }
    let mut min_angle = f64::INFINITY;
    for tri in &mesh.triangles {
        for k in 0..3 {
            let p = mesh.vertices[tri[k]];
            let q = mesh.vertices[tri[(k + 1) % 3]];
            let r = mesh.vertices[tri[(k + 2) % 3]];
            let u = [q[0] - p[0], q[1] - p[1]];
            let v = [r[0] - p[0], r[1] - p[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / (dist(p, q) * dist(p, r));
            min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos());
        }
    }
    MeshStats {
        n_vertices: mesh.vertices.len(),
        n_triangles: mesh.triangles.len(),
        h_max,
        min_angle,
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn side_of(rect: &Rect, a: Point, b: Point) -> Option<Side> {
    let tol = 1e-12 * rect.width().max(rect.height());
    let on = |v: f64, w: f64| (v - w).abs() <= tol;
    if on(a[0], rect.x0) && on(b[0], rect.x0) {
        Some(Side::Left)
    } else if on(a[0], rect.x1) && on(b[0], rect.x1) {
        Some(Side::Right)
    } else if on(a[1], rect.y0) && on(b[1], rect.y0) {
        Some(Side::Bottom)
    } else if on(a[1], rect.y1) && on(b[1], rect.y1) {
        Some(Side::Top)
    } else {
        None
    }
}

impl Mesh {
    fn build_edges(&mut self) {
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut incidence = Vec::new();
        let mut triangle_edges = Vec::with_capacity(self.triangles.len());
        for tri in &self.triangles {
            let mut local = [0; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let e = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    incidence.push(0usize);
                    edges.len() - 1
                });
                incidence[e] += 1;
                local[k] = e;
            }
            triangle_edges.push(local);
        }
        self.boundary_edges = edges
            .iter()
            .zip(&incidence)
            .enumerate()
            .filter(|(_, (_, &count))| count == 1)
            .map(|(e, (&vertices, _))| BoundaryEdge {
                vertices,
                edge: e,
                tag: BoundaryTag::DirichletWall,
            })
            .collect();
        self.edges = edges;
        self.triangle_edges = triangle_edges;
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area (positive for counterclockwise orientation).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [p0, p1, p2] = self.triangle_points(t);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    /// Sides of the rectangle whose boundary edges carry `tag`.
    pub fn sides_with_tag(&self, tag: BoundaryTag) -> Vec<Side> {
        let mut sides: Vec<Side> = self
            .boundary_edges
            .iter()
            .filter(|be| be.tag == tag)
            .filter_map(|be| {
                side_of(
                    &self.rect,
                    self.vertices[be.vertices[0]],
                    self.vertices[be.vertices[1]],
                )
            })
            .collect();
        sides.sort();
        sides.dedup();
        sides
    }

    /// Plain-text export: `nv nt`, then `x y` per vertex, then `i j k` per
    /// triangle (0-based).
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{} {}", self.n_vertices(), self.n_triangles())?;
        for [x, y] in &self.vertices {
            writeln!(w, "{x} {y}")?;
        }
        for [i, j, k] in &self.triangles {
            writeln!(w, "{i} {j} {k}")?;
        }
        Ok(())
    }
}
