//! Chebyshev–Fourier collocation of the correction equation.
//!
//! Per mode `k` and eigen-component `j` the factored unknown satisfies
//! `R U' + (σR/r + ikT − λ_j) U = v_j*·G_k / r^σ` at the nodes. The linear
//! part is factored once; the nonlinearity is iterated to a fixed point.

use nalgebra::{DMatrix, DVector, LU, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{CorrectionField, CorrectionProblem, Modes, Solved, ZERO};
use crate::error::{Result, SsmError};

enum Block {
    Closed,
    Diagonal(Vec<Complex64>),
    Full(LU<Complex64, Dyn, Dyn>),
}

/// Factored linear operators, one per `(k, j)`.
pub struct CollocationOperator {
    blocks: Vec<Vec<Block>>,
}

impl CollocationOperator {
    pub fn new(problem: &CorrectionProblem) -> Result<Self> {
        let grid = &problem.grid;
        let m = grid.len();
        let sigma = problem.sigma as f64;
        let dim = problem.dim();
        let radial = problem.eps != 0.0 && grid.nodes.iter().any(|&r| problem.r_of(r) != 0.0);
        let margin = 0.5 * problem.opts.res_margin;
        let mut blocks = Vec::with_capacity(problem.k_theta() + 1);
        for k in 0..=problem.k_theta() {
            let mut row = Vec::with_capacity(dim);
            for j in 0..dim {
                if problem.is_closed(k, j) {
                    row.push(Block::Closed);
                    continue;
                }
                let lam = problem.spec.lambda(j, problem.eps);
                let diag: Vec<Complex64> = grid
                    .nodes
                    .iter()
                    .map(|&r| {
                        Complex64::new(sigma * problem.r_over_r(r), k as f64 * problem.t_of(r)) - lam
                    })
                    .collect();
                if !radial {
                    if let Some((i, d)) = diag.iter().enumerate().find(|(_, d)| d.norm() < margin) {
                        return Err(SsmError::SingularCollocation(format!(
                            "divisor |ikT(r) − λ_j| = {:.3e} below {margin} at k = {k}, j = {j}, r = {:.6e}",
                            d.norm(),
                            grid.nodes[i]
                        )));
                    }
                    row.push(Block::Diagonal(diag));
                    continue;
                }
                let mat = DMatrix::from_fn(m, m, |i, l| {
                    let d = Complex64::new(problem.r_of(grid.nodes[i]) * grid.diff[(i, l)], 0.0);
                    if i == l { d + diag[i] } else { d }
                });
                let lu = mat.lu();
                if !lu.is_invertible() {
                    return Err(SsmError::SingularCollocation(format!("collocation block k = {k}, j = {j} is singular")));
                }
                row.push(Block::Full(lu));
            }
            blocks.push(row);
        }
        Ok(Self { blocks })
    }
}

/// One application of the collocated inverse to the right-hand side at `field`.
pub fn collocation_step(problem: &CorrectionProblem, op: &CollocationOperator, field: &CorrectionField) -> CorrectionField {
    let grid = &problem.grid;
    let m = grid.len();
    let dim = problem.dim();
    let s = problem.sigma as i32;
    let du = field.derivative();
    // Right-hand side projected on the eigenbasis and divided by r^σ: [i][k][j].
    let b: Vec<Modes> = (0..m)
        .into_par_iter()
        .map(|i| {
            let r = grid.nodes[i];
            let rhs = problem.rhs(r, &problem.app_modes(r), &field.u[i], &du[i]);
            let scale = r.powi(-s);
            rhs.g.iter().map(|g| (0..dim).map(|j| problem.spec.project(j, g) * scale).collect()).collect()
        })
        .collect();
    let mut u = vec![vec![vec![ZERO; dim]; problem.k_theta() + 1]; m];
    for (k, row) in op.blocks.iter().enumerate() {
        for (j, block) in row.iter().enumerate() {
            let y: Vec<Complex64> = match block {
                Block::Closed => continue,
                Block::Diagonal(d) => (0..m).map(|i| b[i][k][j] / d[i]).collect(),
                Block::Full(lu) => {
                    let rhs = DVector::from_fn(m, |i, _| b[i][k][j]);
                    lu.solve(&rhs).expect("factor checked invertible").iter().copied().collect()
                }
            };
            let v = &problem.spec.right[j];
            for i in 0..m {
                for c in 0..dim {
                    u[i][k][c] += y[i] * v[c];
                }
            }
        }
    }
    for node in &mut u {
        for z in &mut node[0] {
            z.im = 0.0;
        }
    }
    CorrectionField { grid: grid.clone(), sigma: problem.sigma, u }
}

/// Fixed-point iteration of [`collocation_step`] until the update is below
/// the tolerance.
pub fn solve_collocation(problem: &CorrectionProblem, guess: &CorrectionField) -> Result<Solved> {
    let op = CollocationOperator::new(problem)?;
    let mut cur = guess.clone();
    let mut updates = Vec::new();
    for _ in 0..problem.opts.max_iter {
        let next = collocation_step(problem, &op, &cur);
        let update = next.sub(&cur).sup_norm();
        updates.push(update);
        cur = next;
        if update < problem.opts.tol {
            return Ok(Solved { field: cur, updates });
        }
    }
    Err(SsmError::NoConvergence(format!(
        "collocation update {:.3e} after {} iterations",
        updates.last().copied().unwrap_or(f64::NAN),
        problem.opts.max_iter
    )))
}
