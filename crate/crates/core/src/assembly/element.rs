//! Lagrange P1/P2 shape functions on a physical triangle.

use crate::mesh::Point;

/// Affine map data of one triangle: area and the constant gradients of the
/// barycentric coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub area: f64,
    pub grad_lambda: [[f64; 2]; 3],
    pub vertices: [Point; 3],
}

impl Geometry {
    pub fn new(vertices: [Point; 3]) -> Self {
        let [p0, p1, p2] = vertices;
        let (x10, y10) = (p1[0] - p0[0], p1[1] - p0[1]);
        let (x20, y20) = (p2[0] - p0[0], p2[1] - p0[1]);
        let det = x10 * y20 - x20 * y10;
        let g1 = [y20 / det, -x20 / det];
        let g2 = [-y10 / det, x10 / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        Geometry {
            area: 0.5 * det.abs(),
            grad_lambda: [g0, g1, g2],
            vertices,
        }
    }

    pub fn point(&self, lambda: &[f64; 3]) -> Point {
        let [p0, p1, p2] = self.vertices;
        [
            lambda[0] * p0[0] + lambda[1] * p1[0] + lambda[2] * p2[0],
            lambda[0] * p0[1] + lambda[1] * p1[1] + lambda[2] * p2[1],
        ]
    }
}

/// Values and physical gradients of the local basis at one point. Only the
/// first `n` entries are meaningful (3 for P1, 6 for P2).
#[derive(Clone, Copy, Debug)]
pub struct ShapeValues {
    pub n: usize,
    pub values: [f64; 6],
    pub grads: [[f64; 2]; 6],
}

/// Local order: vertex functions, then edge functions for the edges
/// `(v0, v1)`, `(v1, v2)`, `(v2, v0)`.
pub fn shape(degree: usize, geo: &Geometry, l: &[f64; 3]) -> ShapeValues {
    let g = &geo.grad_lambda;
    let mut values = [0.0; 6];
    let mut grads = [[0.0; 2]; 6];
    if degree == 1 {
        values[..3].copy_from_slice(l);
        grads[..3].copy_from_slice(g);
        return ShapeValues { n: 3, values, grads };
    }
    for i in 0..3 {
        values[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        grads[i] = [s * g[i][0], s * g[i][1]];
    }
    for k in 0..3 {
        let (a, b) = (k, (k + 1) % 3);
        values[3 + k] = 4.0 * l[a] * l[b];
        grads[3 + k] = [
            4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
            4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
        ];
    }
    ShapeValues { n: 6, values, grads }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NODES: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ];

    #[test]
    fn p2_is_nodal() {
        let geo = Geometry::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        for (j, node) in NODES.iter().enumerate() {
            let s = shape(2, &geo, node);
            for i in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.values[i] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn gradients_reproduce_linears() {
        let geo = Geometry::new([[0.1, 0.2], [1.3, 0.4], [0.5, 1.1]]);
        let l = [0.2, 0.3, 0.5];
        for degree in [1, 2] {
            let s = shape(degree, &geo, &l);
            let nodes: Vec<Point> = NODES[..s.n].iter().map(|n| geo.point(n)).collect();
            // Interpolate f = 2x - 3y and differentiate.
            let mut grad = [0.0; 2];
            let mut sum = 0.0;
            for i in 0..s.n {
                let fi = 2.0 * nodes[i][0] - 3.0 * nodes[i][1];
                grad[0] += fi * s.grads[i][0];
                grad[1] += fi * s.grads[i][1];
                sum += s.values[i];
            }
            assert!((grad[0] - 2.0).abs() < 1e-13 && (grad[1] + 3.0).abs() < 1e-13);
            assert!((sum - 1.0).abs() < 1e-15);
        }
        assert!((geo.area - 0.5 * (1.2 * 0.9 - 0.4 * 0.2)).abs() < 1e-15);
    }
}
