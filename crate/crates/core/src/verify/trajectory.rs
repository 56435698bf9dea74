//! Trajectories started on a manifold and their distance from it.

use std::f64::consts::TAU;

use serde::Serialize;

use super::ode::Dopri5;
use super::Manifold;
use crate::error::{Result, SsmError};
use crate::model::PolyVectorField;

const MAX_NEWTON: usize = 20;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Projection {
    pub r: f64,
    pub theta: f64,
    pub distance: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gauss–Newton minimization of `|x − W(r, θ)|²` from `seed`.
pub fn project(m: &dyn Manifold, x: &[f64], seed: (f64, f64)) -> Result<Projection> {
    let (mut r, mut theta) = seed;
    for it in 1..=MAX_NEWTON {
        let w = m.point(r, theta);
        let e: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a - b).collect();
        let (j1, j2) = (m.d_r(r, theta), m.d_theta(r, theta));
        let (a, b, c) = (dot(&j1, &j1), dot(&j1, &j2), dot(&j2, &j2));
        let (g1, g2) = (dot(&j1, &e), dot(&j2, &e));
        let det = a * c - b * b;
        if !(det > 0.0) {
            return Err(SsmError::Projection(format!("degenerate tangent plane at r = {r:.3e}")));
        }
        let dr = (c * g1 - b * g2) / det;
        let dth = (a * g2 - b * g1) / det;
        r += dr;
        theta += dth;
        if dr.abs() <= 1e-14 * r.abs().max(1e-300) + 1e-300 && dth.abs() <= 1e-14 || dr.abs() + dth.abs() * r.abs() < 1e-17 {
            let w = m.point(r, theta);
            let distance = x.iter().zip(&w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            return Ok(Projection { r, theta, distance, iterations: it });
        }
    }
    Err(SsmError::Projection(format!("no convergence in {MAX_NEWTON} steps near r = {r:.3e}")))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryResult {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub max_distance: f64,
    /// Reduced-flow radius at each sample time.
    pub radii: Vec<f64>,
}

/// Integrates the full field from `W(r0, θ0)` alongside the reduced flow and
/// measures the distance to the manifold at `n_samples` equispaced times.
pub fn trajectory_test(
    model: &PolyVectorField,
    m: &dyn Manifold,
    r0: f64,
    theta0: f64,
    horizon: f64,
    n_samples: usize,
) -> Result<TrajectoryResult> {
    let dim = model.dim();
    let eps = m.eps();
    let mut y0 = m.point(r0, theta0);
    y0.extend([r0, theta0]);
    let f = |_t: f64, y: &[f64], d: &mut [f64]| {
        let fx = model.eval_field(&y[..dim], eps);
        d[..dim].copy_from_slice(&fx);
        let (rr, tt) = m.reduced(y[dim]);
        d[dim] = rr;
        d[dim + 1] = tt;
    };
    let times: Vec<f64> = (1..=n_samples).map(|i| horizon * i as f64 / n_samples as f64).collect();
    let states = Dopri5::default().integrate(f, 0.0, &y0, &times)?;
    let mut distances = Vec::with_capacity(n_samples);
    let mut radii = Vec::with_capacity(n_samples);
    for s in &states {
        let p = project(m, &s[..dim], (s[dim], s[dim + 1]))?;
        distances.push(p.distance);
        radii.push(s[dim]);
    }
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    Ok(TrajectoryResult { times, distances, max_distance, radii })
}

/// `|x(2π/T(r0)) − x(0)|` for the orbit started at `W(r0, θ0)`.
pub fn orbit_closure(model: &PolyVectorField, m: &dyn Manifold, r0: f64, theta0: f64) -> Result<f64> {
    let eps = m.eps();
    let x0 = m.point(r0, theta0);
    let period = TAU / m.reduced(r0).1;
    let f = |_t: f64, y: &[f64], d: &mut [f64]| d.copy_from_slice(&model.eval_field(y, eps));
    let x = Dopri5::default().integrate(f, 0.0, &x0, &[period])?;
    Ok(x[0].iter().zip(&x0).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// Time for the reduced flow to carry `r0` down to `r0·factor`.
pub fn decay_horizon(m: &dyn Manifold, r0: f64, factor: f64) -> Result<f64> {
    let (gx, gw) = crate::correction::gauss_legendre5();
    let (a, b) = (0.0, -factor.ln());
    let panels = 200;
    let h = (b - a) / panels as f64;
    let mut t = 0.0;
    for p in 0..panels {
        for (x, w) in gx.iter().zip(&gw) {
            let u = a + (p as f64 + x) * h;
            let r = r0 * (-u).exp();
            let rr = m.reduced(r).0;
            if !(rr < 0.0) {
                return Err(SsmError::InvalidArgument(format!("R({r:.3e}) = {rr:.3e} does not decay")));
            }
            t += w * h * r / -rr;
        }
    }
    Ok(t)
}
