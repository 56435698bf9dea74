//! Chebyshev–Gauss nodes on `(0, γ)` with barycentric interpolation and
//! differentiation, and the five-point Gauss–Legendre rule.

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Interior Chebyshev nodes mapped to `(0, γ)`, in increasing order.
#[derive(Clone, Debug)]
pub struct ChebGrid {
    pub gamma: f64,
    pub nodes: Vec<f64>,
    weights: Vec<f64>,
    x: Vec<f64>,
    /// Differentiation matrix in `r`.
    pub diff: DMatrix<f64>,
}

impl ChebGrid {
    pub fn new(m: usize, gamma: f64) -> Self {
        // x_i = −cos((2i+1)π/2m) increases with i.
        let x: Vec<f64> = (0..m).map(|i| -((2 * i + 1) as f64 * PI / (2 * m) as f64).cos()).collect();
        let weights: Vec<f64> = (0..m)
            .map(|i| {
                let s = ((2 * i + 1) as f64 * PI / (2 * m) as f64).sin();
                if i % 2 == 0 { s } else { -s }
            })
            .collect();
        let nodes = x.iter().map(|x| 0.5 * gamma * (1.0 + x)).collect();
        let mut diff = DMatrix::zeros(m, m);
        for i in 0..m {
            let mut diag = 0.0;
            for j in 0..m {
                if i != j {
                    let d = (weights[j] / weights[i]) / (x[i] - x[j]);
                    diff[(i, j)] = d * 2.0 / gamma;
                    diag -= d;
                }
            }
            diff[(i, i)] = diag * 2.0 / gamma;
        }
        Self { gamma, nodes, weights, x, diff }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Barycentric weights `ℓ_i(r)` of the interpolant through the nodes.
    pub fn interp_weights(&self, r: f64) -> Vec<f64> {
        let x = 2.0 * r / self.gamma - 1.0;
        let m = self.len();
        if let Some(i) = self.x.iter().position(|xi| *xi == x) {
            let mut out = vec![0.0; m];
            out[i] = 1.0;
            return out;
        }
        let terms: Vec<f64> = (0..m).map(|i| self.weights[i] / (x - self.x[i])).collect();
        let total: f64 = terms.iter().sum();
        terms.into_iter().map(|t| t / total).collect()
    }
}

/// Nodes and weights of the five-point Gauss–Legendre rule on `[0, 1]`.
pub fn gauss_legendre5() -> ([f64; 5], [f64; 5]) {
    let a = (245.0f64 - 14.0 * 70.0f64.sqrt()).sqrt() / 21.0;
    let b = (245.0f64 + 14.0 * 70.0f64.sqrt()).sqrt() / 21.0;
    let wa = (322.0 + 13.0 * 70.0f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0f64.sqrt()) / 900.0;
    let x = [-b, -a, 0.0, a, b];
    let w = [wb, wa, 128.0 / 225.0, wa, wb];
    (x.map(|x| 0.5 * (x + 1.0)), w.map(|w| 0.5 * w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn differentiates_polynomials_exactly() {
        let g = ChebGrid::new(12, 0.2);
        let f: Vec<f64> = g.nodes.iter().map(|r| r.powi(5) - 3.0 * r * r).collect();
        let df = &g.diff * nalgebra::DVector::from_vec(f);
        for (i, r) in g.nodes.iter().enumerate() {
            let exact = 5.0 * r.powi(4) - 6.0 * r;
            assert!((df[i] - exact).abs() < 1e-11, "{} vs {}", df[i], exact);
        }
    }

    #[test]
    fn interpolates_off_grid() {
        let g = ChebGrid::new(10, 0.1);
        let f: Vec<f64> = g.nodes.iter().map(|r| (3.0 * r).exp()).collect();
        for r in [0.0, 1e-5, 0.037, 0.1] {
            let w = g.interp_weights(r);
            let v: f64 = w.iter().zip(&f).map(|(a, b)| a * b).sum();
            assert!((v - (3.0 * r).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn gauss_rule_degree_nine() {
        let (x, w) = gauss_legendre5();
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(9)).sum();
        assert!((s - 0.1).abs() < 1e-15);
    }
}
