//! Fixed-point iteration of the integral operator along characteristics.
//!
//! For mode `k` and eigen-component `j`, `R Y' + (ikT − λ_j) Y = h` has the
//! solution regular at the origin
//! `Y(r) = −∫₀^∞ exp(∫₀^s (ikT − λ_j)) h(ρ(s)) ds`, with `ρ` the reduced flow
//! started at `r`. The integral is accumulated backward panel by panel from
//! the end of the master trajectory.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{CorrectionField, CorrectionProblem, Modes, Solved, ZERO};
use crate::error::{Result, SsmError};

/// `𝒯(U)`: one application of the integral operator.
pub fn picard_step(problem: &CorrectionProblem, field: &CorrectionField) -> Result<CorrectionField> {
    let flow = problem.flow()?;
    let dim = problem.dim();
    let kk = problem.k_theta() + 1;
    let du = field.derivative();
    // Projected right-hand side at every quadrature point: [q][k][j].
    let h: Vec<Modes> = flow
        .points
        .par_iter()
        .zip(flow.weights.par_iter())
        .map(|(q, w)| {
            let mut u = vec![vec![ZERO; dim]; kk];
            let mut d = vec![vec![ZERO; dim]; kk];
            for (i, wi) in w.iter().enumerate() {
                for k in 0..kk {
                    for c in 0..dim {
                        u[k][c] += field.u[i][k][c] * *wi;
                        d[k][c] += du[i][k][c] * *wi;
                    }
                }
            }
            let rhs = problem.rhs(q.rho, &problem.app_modes(q.rho), &u, &d);
            rhs.g.iter().map(|g| (0..dim).map(|j| problem.spec.project(j, g) * q.weight).collect()).collect()
        })
        .collect();

    let m = problem.grid.len();
    let pairs: Vec<(usize, usize)> =
        (0..kk).flat_map(|k| (0..dim).map(move |j| (k, j))).filter(|&(k, j)| !problem.is_closed(k, j)).collect();
    // Y at the nodes per (k, j).
    let ys: Vec<Vec<Complex64>> = pairs
        .par_iter()
        .map(|&(k, j)| {
            let lam = problem.spec.lambda(j, problem.eps);
            let ik = Complex64::new(0.0, k as f64);
            let mut y = vec![ZERO; m];
            let mut node = 0;
            let mut acc = ZERO;
            for (p, panel) in flow.panels.iter().enumerate().rev() {
                let mut sum = ZERO;
                for (q, pt) in flow.points[5 * p..5 * p + 5].iter().enumerate() {
                    sum += (ik * pt.dphi - lam * pt.dt).exp() * h[5 * p + q][k][j];
                }
                acc = sum + (ik * panel.dphi - lam * panel.dt).exp() * acc;
                if node < m && flow.node_panel[node] == p {
                    y[node] = -acc;
                    node += 1;
                }
            }
            y
        })
        .collect();

    let s = problem.sigma as i32;
    let mut u = vec![vec![vec![ZERO; dim]; kk]; m];
    for (&(k, j), y) in pairs.iter().zip(&ys) {
        let v = &problem.spec.right[j];
        for i in 0..m {
            let yi = y[i] * problem.grid.nodes[i].powi(-s);
            for c in 0..dim {
                u[i][k][c] += yi * v[c];
            }
        }
    }
    for node in &mut u {
        for z in &mut node[0] {
            z.im = 0.0;
        }
    }
    Ok(CorrectionField { grid: problem.grid.clone(), sigma: problem.sigma, u })
}

/// Iterates [`picard_step`] until the update is below the tolerance.
pub fn solve_picard(problem: &CorrectionProblem, guess: &CorrectionField) -> Result<Solved> {
    let mut cur = guess.clone();
    let mut updates = Vec::new();
    for _ in 0..problem.opts.max_iter {
        let next = picard_step(problem, &cur)?;
        let update = next.sub(&cur).sup_norm();
        updates.push(update);
        cur = next;
        if update < problem.opts.tol {
            return Ok(Solved { field: cur, updates });
        }
    }
    Err(SsmError::NoConvergence(format!(
        "Picard update {:.3e} after {} iterations",
        updates.last().copied().unwrap_or(f64::NAN),
        problem.opts.max_iter
    )))
}
