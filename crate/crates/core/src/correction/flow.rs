//! The reduced flow `ṙ = R(r)`, `θ̇ = T(r)` sampled along one master
//! trajectory from `r = γ`, parametrized by `u = ln(γ/ρ)`.
//!
//! Every node lies on the master trajectory, so one panel decomposition in
//! `u` serves all of them. Along it `dt/du = ρ/(−R(ρ))` and `dφ/du = T dt/du`.

use std::f64::consts::PI;

use super::chebyshev::gauss_legendre5;
use super::CorrectionProblem;
use crate::error::{Result, SsmError};

/// Panel budget before the quadrature is declared unaffordable.
const MAX_PANELS: usize = 400_000;

#[derive(Clone, Copy, Debug)]
pub struct Panel {
    pub u0: f64,
    pub u1: f64,
    /// `t(u1) − t(u0)`.
    pub dt: f64,
    /// `φ(u1) − φ(u0)`.
    pub dphi: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub rho: f64,
    /// Quadrature weight including `dt/du`.
    pub weight: f64,
    /// `t(u_q) − t(u0)` within the panel.
    pub dt: f64,
    pub dphi: f64,
}

#[derive(Clone, Debug)]
pub struct FlowCache {
    pub panels: Vec<Panel>,
    /// Five points per panel.
    pub points: Vec<QuadPoint>,
    /// Panel starting at node `i`.
    pub node_panel: Vec<usize>,
    /// Interpolation weights, one row of `M_r` per point.
    pub weights: Vec<Vec<f64>>,
    pub substep: f64,
    pub u_end: f64,
    /// Measured `c_ρ` with `c_ρ⁻¹e^{−τ} ≤ ρ/γ ≤ c_ρ e^{−τ}`, `τ = εt`.
    pub c_rho: f64,
}

impl FlowCache {
    pub fn build(problem: &CorrectionProblem) -> Result<Self> {
        let eps = problem.eps;
        if eps < problem.opts.eps_min {
            return Err(SsmError::Regime(format!(
                "ε = {eps} is below the quadrature threshold {}",
                problem.opts.eps_min
            )));
        }
        let gamma = problem.gamma;
        let samples = 2048;
        let mut t_max = 0.0f64;
        for s in 1..=samples {
            let r = gamma * s as f64 / samples as f64;
            if !(problem.r_of(r) < 0.0) {
                return Err(SsmError::Regime(format!("R({r:.4e}) ≥ 0: the origin does not attract on (0, γ]")));
            }
            t_max = t_max.max(problem.t_of(r).abs());
        }
        let w_max = problem.spec.omega.iter().fold(0.0f64, |a, w| a.max(w.abs()));
        let substep = eps * PI / (4.0 * (problem.k_theta() as f64 * t_max + w_max));

        let m = problem.grid.len();
        let mut bounds: Vec<f64> = (0..m).rev().map(|i| (gamma / problem.grid.nodes[i]).ln()).collect();
        let u_end = bounds[m - 1] + problem.tau_max;
        bounds.push(u_end);

        let (gx, gw) = gauss_legendre5();
        let f = |u: f64| {
            let rho = gamma * (-u).exp();
            rho / -problem.r_of(rho)
        };
        let g = |u: f64| {
            let rho = gamma * (-u).exp();
            problem.t_of(rho) * rho / -problem.r_of(rho)
        };
        let integrate = |h: &dyn Fn(f64) -> f64, a: f64, b: f64| -> f64 {
            gx.iter().zip(&gw).map(|(x, w)| w * h(a + x * (b - a))).sum::<f64>() * (b - a)
        };

        let mut panels = Vec::new();
        let mut node_panel = vec![0; m];
        for (s, pair) in bounds.windows(2).enumerate() {
            node_panel[m - 1 - s] = panels.len();
            let (a, b) = (pair[0], pair[1]);
            let n = ((b - a) / substep).ceil().max(1.0) as usize;
            if panels.len() + n > MAX_PANELS {
                return Err(SsmError::Quadrature(format!(
                    "more than {MAX_PANELS} panels needed at substep {substep:.3e}"
                )));
            }
            for p in 0..n {
                let u0 = a + (b - a) * p as f64 / n as f64;
                let u1 = if p + 1 == n { b } else { a + (b - a) * (p + 1) as f64 / n as f64 };
                panels.push(Panel { u0, u1, dt: integrate(&f, u0, u1), dphi: integrate(&g, u0, u1) });
            }
        }

        let mut points = Vec::with_capacity(5 * panels.len());
        let mut t_global = integrate(&f, 0.0, bounds[0]);
        let mut c_rho = 1.0f64;
        for p in &panels {
            let len = p.u1 - p.u0;
            for (x, w) in gx.iter().zip(&gw) {
                let u = p.u0 + x * len;
                let rho = gamma * (-u).exp();
                let dt = integrate(&f, p.u0, u);
                points.push(QuadPoint { rho, weight: w * len * f(u), dt, dphi: integrate(&g, p.u0, u) });
                let ratio = (rho / gamma) * (eps * (t_global + dt)).exp();
                c_rho = c_rho.max(ratio).max(1.0 / ratio);
            }
            t_global += p.dt;
        }
        let weights = points.iter().map(|q| problem.grid.interp_weights(q.rho)).collect();
        Ok(Self { panels, points, node_panel, weights, substep, u_end, c_rho })
    }
}
