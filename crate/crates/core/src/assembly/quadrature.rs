//! Triangle quadrature in barycentric coordinates.

/// Points are barycentric triples; weights are scaled to the reference
/// triangle `{(0,0), (1,0), (0,1)}` and sum to its area, 1/2.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    /// Seven-point symmetric rule exact for polynomials of degree 5.
    pub fn degree5() -> Self {
        let s15 = 15f64.sqrt();
        let a1 = (6.0 - s15) / 21.0;
        let a2 = (6.0 + s15) / 21.0;
        let w1 = (155.0 - s15) / 1200.0;
        let w2 = (155.0 + s15) / 1200.0;
        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![0.225];
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            points.extend([[b, a, a], [a, b, a], [a, a, b]]);
            weights.extend([w; 3]);
        }
        let weights = weights.into_iter().map(|w| 0.5 * w).collect();
        QuadratureRule {
            points,
            weights,
            degree: 5,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    #[test]
    fn weights_sum_to_reference_area() {
        let q = QuadratureRule::degree5();
        assert_eq!(q.len(), 7);
        assert!((q.weights.iter().sum::<f64>() - 0.5).abs() < 1e-15);
        for p in &q.points {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_through_degree_five() {
        let q = QuadratureRule::degree5();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let approx: f64 = q
                    .points
                    .iter()
                    .zip(&q.weights)
                    .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                    .sum();
                let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                assert!((approx - exact).abs() < 1e-15, "x^{a} y^{b}");
            }
        }
    }
}
