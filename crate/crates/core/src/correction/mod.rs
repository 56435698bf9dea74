//! Tail correction beyond the truncated expansion.
//!
//! With `W_app` the truncated expansion and `R`, `T` its reduced dynamics, the
//! correction `V = W − W_app` solves
//!
//! `R D₁V + T D₂V − A_εV = N_ε(W_app + V) − N_ε(W_app) − Res_app − δR D₁W − δT D₂W`
//!
//! where `Res_app` is the invariance residual of `W_app` and `δR`, `δT` close
//! the system (see [`Closure`]). The unknown is stored factored, `V = r^σ U`,
//! with `U` on Chebyshev nodes in `r` and Fourier modes `0..=K` in `θ`.

pub mod chebyshev;
mod collocation;
mod flow;
mod picard;

use std::f64::consts::TAU;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use chebyshev::{gauss_legendre5, ChebGrid};
pub use collocation::{collocation_step, solve_collocation, CollocationOperator};
pub use flow::FlowCache;
pub use picard::{picard_step, solve_picard};

use crate::error::{Result, SsmError};
use crate::expansion::ManifoldExpansion;
use crate::model::{EpsMode, PolyVectorField};
use crate::spectral::{SpectralData, DEFAULT_RES_MARGIN};

pub const DEFAULT_MR: usize = 24;
pub const DEFAULT_K_THETA: usize = 12;
pub const DEFAULT_EPS_MIN: f64 = 0.05;
pub const DEFAULT_DELTA: f64 = 0.5;
pub const UPDATE_TOL: f64 = 1e-11;
pub const MAX_ITERATIONS: usize = 50;
pub const DIVERGENCE_RATIO: f64 = 1.5;
/// Residual bound that triggers grid refinement.
pub const FIXED_POINT_TOL: f64 = 1e-9;
/// Bound on the expansion's own residual through its order.
const LEADING_ORDER_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Mode coefficients indexed `[k][component]`, `k = 0..=K`.
pub type Modes = Vec<Vec<Complex64>>;

/// How the distinguished first-harmonic direction is closed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// The `v_ℓ`-part of the first harmonic of `V` stays zero and the
    /// corrections `δR`, `δT` to the reduced dynamics absorb its projection.
    GrowthPhase,
    /// `δR = δT = 0` with every component solved; singular at ε = 0.
    FixedConjugate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrectionOptions {
    pub m_r: usize,
    pub k_theta: usize,
    pub closure: Closure,
    pub eps_min: f64,
    pub res_margin: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            m_r: DEFAULT_MR,
            k_theta: DEFAULT_K_THETA,
            closure: Closure::GrowthPhase,
            eps_min: DEFAULT_EPS_MIN,
            res_margin: DEFAULT_RES_MARGIN,
            max_iter: MAX_ITERATIONS,
            tol: UPDATE_TOL,
        }
    }
}

/// Samples of the scaled residual `F̂` (`Res/ε`, or its ε-slope at ε = 0).
#[derive(Clone, Debug, Serialize)]
pub struct FhatReport {
    pub radii: Vec<f64>,
    /// `sup_θ |F̂(r, θ)|` per radius.
    pub sup: Vec<f64>,
    /// `sup |F̂| r^{−σ}` over the radii.
    pub scaled_sup: f64,
    /// Log-log slope of `sup` against `r`; `None` when `F̂ ≡ 0`.
    pub slope: Option<f64>,
}

/// Approximate-manifold data at one radius.
#[derive(Clone, Debug)]
pub struct AppModes {
    pub w: Modes,
    pub dw: Modes,
    pub res: Modes,
}

/// Right-hand side at one radius together with the closure values.
#[derive(Clone, Debug)]
pub struct Rhs {
    pub g: Modes,
    pub delta_r: f64,
    pub delta_t: f64,
}

pub struct CorrectionProblem {
    pub model: PolyVectorField,
    pub spec: SpectralData,
    pub exp: ManifoldExpansion,
    pub gamma: f64,
    pub eps: f64,
    pub sigma: u32,
    pub opts: CorrectionOptions,
    pub grid: ChebGrid,
    pub n_theta: usize,
    /// Truncation of the characteristic integral, `12 ln 10 / (σ − ℵ)`.
    pub tau_max: f64,
    pub fhat: FhatReport,
    r_coef: Vec<f64>,
    t_coef: Vec<f64>,
    /// `w[n][k]` for `k ≤ min(n, K)`.
    w_coef: Vec<Modes>,
    /// Residual coefficients above the expansion order.
    res_coef: Vec<(usize, Modes)>,
    /// `e^{ikθ_l}`.
    twiddle: Vec<Vec<Complex64>>,
    flow: OnceLock<FlowCache>,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Sets up the correction problem for a numeric-mode expansion.
pub fn make_problem(
    model: &PolyVectorField,
    spec: &SpectralData,
    exp: &ManifoldExpansion,
    gamma: f64,
    eps: f64,
    opts: CorrectionOptions,
) -> Result<CorrectionProblem> {
    if !matches!(exp.mode, EpsMode::Numeric(e) if e == eps) {
        return Err(SsmError::InvalidArgument(format!("expansion must be numeric at ε = {eps}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(SsmError::InvalidArgument(format!("γ must lie in (0, 1], got {gamma}")));
    }
    let sigma = spec.sigma;
    if exp.order + 1 < sigma as usize {
        return Err(SsmError::Order(format!("expansion order {} is below σ − 1 = {}", exp.order, sigma - 1)));
    }
    if opts.k_theta < exp.order || opts.m_r < 4 {
        return Err(SsmError::InvalidArgument(format!(
            "grid needs K_θ ≥ {} and M_r ≥ 4, got K_θ = {}, M_r = {}",
            exp.order, opts.k_theta, opts.m_r
        )));
    }
    let kmax = opts.k_theta;
    let dim = model.dim();
    let res = exp.residual_series(model);
    let wscale = exp.w.max_modulus().max(1.0);
    for n in 0..=exp.order {
        for k in 0..=n as i64 {
            for c in res.get(n, k) {
                if c.max_modulus() > LEADING_ORDER_TOL * wscale {
                    return Err(SsmError::LeadingOrder(format!(
                        "residual coefficient at order {n}, mode {k} is {:.3e}; the expansion is not solved through order {}",
                        c.max_modulus(),
                        exp.order
                    )));
                }
            }
        }
    }
    let w_coef = (0..=exp.order)
        .map(|n| (0..=n.min(kmax) as i64).map(|k| exp.w.get(n, k).iter().map(|c| c.eval(eps)).collect()).collect())
        .collect();
    let res_coef: Vec<(usize, Modes)> = (exp.order + 1..=res.order())
        .map(|n| (n, (0..=n.min(kmax) as i64).map(|k| res.get(n, k).iter().map(|c| c.eval(eps)).collect()).collect()))
        .collect();
    let fhat = fhat_report(&res, exp.order, gamma, eps, sigma, dim);

    let pmax = model.terms.iter().map(|t| t.total_degree() as usize).max().unwrap_or(1);
    let n_theta = (pmax + 1) * kmax + 1;
    let twiddle = (0..=kmax)
        .map(|k| (0..n_theta).map(|l| Complex64::from_polar(1.0, (k * l) as f64 * TAU / n_theta as f64)).collect())
        .collect();
    let tau_max = 12.0 * 10f64.ln() / (sigma as f64 - spec.aleph);
    Ok(CorrectionProblem {
        model: model.clone(),
        spec: spec.clone(),
        exp: exp.clone(),
        gamma,
        eps,
        sigma,
        grid: ChebGrid::new(opts.m_r, gamma),
        n_theta,
        tau_max,
        fhat,
        r_coef: exp.r.iter().map(|c| c.eval(eps)).collect(),
        t_coef: exp.t.iter().map(|c| c.eval(eps)).collect(),
        w_coef,
        res_coef,
        twiddle,
        opts,
        flow: OnceLock::new(),
    })
}

fn fhat_report(res: &crate::model::FourierTaylor, from: usize, gamma: f64, eps: f64, sigma: u32, dim: usize) -> FhatReport {
    // F̂ = Res/ε for ε > 0; at ε = 0 the ε-slope of Res.
    let read = |c: &crate::model::CJet| if eps > 0.0 { c.value() / eps } else { c.coeff(1) };
    let radii: Vec<f64> = (0..=6).map(|j| gamma * 0.5f64.powi(j)).collect();
    let n_theta = 64;
    let sup: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let mut best = 0.0f64;
            for l in 0..n_theta {
                let theta = l as f64 * TAU / n_theta as f64;
                for i in 0..dim {
                    let s = res.component(i);
                    let mut acc = 0.0;
                    for n in from + 1..=res.order() {
                        let rn = r.powi(n as i32);
                        acc += rn * read(&s.get(n, 0)).re;
                        for k in 1..=n as i64 {
                            acc += 2.0 * rn * (read(&s.get(n, k)) * Complex64::from_polar(1.0, k as f64 * theta)).re;
                        }
                    }
                    best = best.max(acc.abs());
                }
            }
            best
        })
        .collect();
    let scaled_sup = radii.iter().zip(&sup).map(|(r, s)| s / r.powi(sigma as i32)).fold(0.0, f64::max);
    let slope = fit_slope(&radii, &sup);
    FhatReport { radii, sup, scaled_sup, slope }
}

/// Least-squares slope of `ln y` against `ln x` over the positive samples.
pub fn fit_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(_, y)| **y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

impl CorrectionProblem {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn k_theta(&self) -> usize {
        self.opts.k_theta
    }

    /// `R(r)` of the expansion.
    pub fn r_of(&self, r: f64) -> f64 {
        poly(&self.r_coef, r)
    }

    /// `R(r)/r`, finite at `r = 0`.
    pub fn r_over_r(&self, r: f64) -> f64 {
        poly(&self.r_coef[1..], r)
    }

    /// `T(r)` of the expansion.
    pub fn t_of(&self, r: f64) -> f64 {
        poly(&self.t_coef, r)
    }

    /// Whether `(k, j)` is held at zero by the closure.
    pub fn is_closed(&self, k: usize, j: usize) -> bool {
        self.opts.closure == Closure::GrowthPhase && k == 1 && j == self.spec.ell
    }

    /// The flow along characteristics, built on first use.
    pub fn flow(&self) -> Result<&FlowCache> {
        if let Some(f) = self.flow.get() {
            return Ok(f);
        }
        let built = FlowCache::build(self)?;
        Ok(self.flow.get_or_init(|| built))
    }

    pub fn app_modes(&self, rho: f64) -> AppModes {
        let dim = self.dim();
        let kmax = self.k_theta();
        let mut w = vec![vec![ZERO; dim]; kmax + 1];
        let mut dw = vec![vec![ZERO; dim]; kmax + 1];
        let mut res = vec![vec![ZERO; dim]; kmax + 1];
        for (n, modes) in self.w_coef.iter().enumerate() {
            let rn = rho.powi(n as i32);
            let drn = if n == 0 { 0.0 } else { n as f64 * rho.powi(n as i32 - 1) };
            for (k, c) in modes.iter().enumerate() {
                for i in 0..dim {
                    w[k][i] += c[i] * rn;
                    dw[k][i] += c[i] * drn;
                }
            }
        }
        for (n, modes) in &self.res_coef {
            let rn = rho.powi(*n as i32);
            for (k, c) in modes.iter().enumerate() {
                for i in 0..dim {
                    res[k][i] += c[i] * rn;
                }
            }
        }
        AppModes { w, dw, res }
    }

    /// Real samples `[l][component]` of a real signal given by its modes.
    pub fn synthesize(&self, modes: &Modes) -> Vec<Vec<f64>> {
        let dim = self.dim();
        (0..self.n_theta)
            .map(|l| {
                (0..dim)
                    .map(|i| {
                        let mut acc = modes[0][i].re;
                        for k in 1..modes.len() {
                            acc += 2.0 * (modes[k][i] * self.twiddle[k][l]).re;
                        }
                        acc
                    })
                    .collect()
            })
            .collect()
    }

    /// Modes `0..=K` of real samples.
    pub fn analyze(&self, samples: &[Vec<f64>]) -> Modes {
        let dim = self.dim();
        let scale = 1.0 / self.n_theta as f64;
        (0..=self.k_theta())
            .map(|k| {
                (0..dim)
                    .map(|i| {
                        let mut acc = ZERO;
                        for (l, s) in samples.iter().enumerate() {
                            acc += self.twiddle[k][l].conj() * s[i];
                        }
                        acc * scale
                    })
                    .collect()
            })
            .collect()
    }

    /// Right-hand side of the correction equation at radius `rho`, given `U`
    /// and `U'` there.
    pub fn rhs(&self, rho: f64, app: &AppModes, u: &Modes, du: &Modes) -> Rhs {
        let dim = self.dim();
        let s = self.sigma as i32;
        let rs = rho.powi(s);
        let rs1 = s as f64 * rho.powi(s - 1);
        let v: Modes = u.iter().map(|m| m.iter().map(|x| x * rs).collect()).collect();
        let dv: Modes = u.iter().zip(du).map(|(m, d)| m.iter().zip(d).map(|(x, y)| x * rs1 + y * rs).collect()).collect();
        let wapp_grid = self.synthesize(&app.w);
        let v_grid = self.synthesize(&v);
        let h_grid: Vec<Vec<f64>> =
            wapp_grid.iter().zip(&v_grid).map(|(a, b)| self.model.nonlinear_increment(a, b, self.eps)).collect();
        let mut h = self.analyze(&h_grid);
        for (hk, rk) in h.iter_mut().zip(&app.res) {
            for (x, r) in hk.iter_mut().zip(rk) {
                *x -= r;
            }
        }
        let w: Modes = app.w.iter().zip(&v).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        let dw: Modes = app.dw.iter().zip(&dv).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        let (delta_r, delta_t) = match self.opts.closure {
            Closure::FixedConjugate => (0.0, 0.0),
            Closure::GrowthPhase => {
                let ell = self.spec.ell;
                let a = self.spec.project(ell, &dw[1]);
                let b = self.spec.project(ell, &w[1]) * Complex64::i();
                let z = self.spec.project(ell, &h[1]);
                let det = a.re * b.im - b.re * a.im;
                if det == 0.0 {
                    (0.0, 0.0)
                } else {
                    ((z.re * b.im - b.re * z.im) / det, (a.re * z.im - z.re * a.im) / det)
                }
            }
        };
        if delta_r != 0.0 || delta_t != 0.0 {
            for (k, hk) in h.iter_mut().enumerate() {
                let ik = Complex64::new(0.0, k as f64);
                for i in 0..dim {
                    hk[i] -= dw[k][i] * delta_r + ik * w[k][i] * delta_t;
                }
            }
        }
        Rhs { g: h, delta_r, delta_t }
    }

    /// Reduced dynamics `(R + δR, T + δT)` of the corrected manifold at `r`.
    pub fn reduced_dynamics(&self, field: &CorrectionField, r: f64) -> (f64, f64) {
        let (u, du) = field.modes_at(r);
        let rhs = self.rhs(r, &self.app_modes(r), &u, &du);
        (self.r_of(r) + rhs.delta_r, self.t_of(r) + rhs.delta_t)
    }

    /// Sup over the nodes and `θ`-grid of the pointwise invariance residual of
    /// `W_app + V`, evaluated directly from the vector field.
    pub fn invariance_residual(&self, field: &CorrectionField) -> f64 {
        let du = field.derivative();
        let dim = self.dim();
        let s = self.sigma as i32;
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let r = self.grid.nodes[i];
                let app = self.app_modes(r);
                let rhs = self.rhs(r, &app, &field.u[i], &du[i]);
                let rr = self.r_of(r) + rhs.delta_r;
                let tt = self.t_of(r) + rhs.delta_t;
                let (rs, rs1) = (r.powi(s), s as f64 * r.powi(s - 1));
                let v: Modes = field.u[i].iter().map(|m| m.iter().map(|x| x * rs).collect()).collect();
                let dv: Modes =
                    field.u[i].iter().zip(&du[i]).map(|(m, d)| m.iter().zip(d).map(|(x, y)| x * rs1 + y * rs).collect()).collect();
                let dth: Modes = v
                    .iter()
                    .enumerate()
                    .map(|(k, m)| m.iter().map(|x| x * Complex64::new(0.0, k as f64)).collect())
                    .collect();
                let (vg, dvg, dthg) = (self.synthesize(&v), self.synthesize(&dv), self.synthesize(&dth));
                let mut worst = 0.0f64;
                for l in 0..self.n_theta {
                    let theta = l as f64 * TAU / self.n_theta as f64;
                    let w0 = self.exp.eval(r, theta, self.eps);
                    let d10 = self.exp.eval_dr(r, theta, self.eps);
                    let d20 = self.exp.eval_dtheta(r, theta, self.eps);
                    let x: Vec<f64> = (0..dim).map(|c| w0[c] + vg[l][c]).collect();
                    let f = self.model.eval_field(&x, self.eps);
                    for c in 0..dim {
                        let lhs = rr * (d10[c] + dvg[l][c]) + tt * (d20[c] + dthg[l][c]);
                        worst = worst.max((lhs - f[c]).abs());
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max)
    }
}

/// `U` on the nodes: `u[i][k][component]`, with `V = r^σ U`.
#[derive(Clone, Debug)]
pub struct CorrectionField {
    pub grid: ChebGrid,
    pub sigma: u32,
    pub u: Vec<Modes>,
}

impl CorrectionField {
    pub fn zeros(problem: &CorrectionProblem) -> Self {
        let modes = vec![vec![ZERO; problem.dim()]; problem.k_theta() + 1];
        Self { grid: problem.grid.clone(), sigma: problem.sigma, u: vec![modes; problem.grid.len()] }
    }

    pub fn k_theta(&self) -> usize {
        self.u[0].len() - 1
    }

    pub fn dim(&self) -> usize {
        self.u[0][0].len()
    }

    /// Coefficient `U_k(r_i)` for any integer `k`.
    pub fn coeff(&self, i: usize, k: i64) -> Vec<Complex64> {
        let m = &self.u[i][k.unsigned_abs() as usize];
        if k < 0 { m.iter().map(|z| z.conj()).collect() } else { m.clone() }
    }

    /// `∂_r U` on the nodes.
    pub fn derivative(&self) -> Vec<Modes> {
        let m = self.grid.len();
        let (kk, dim) = (self.k_theta() + 1, self.dim());
        let mut out = vec![vec![vec![ZERO; dim]; kk]; m];
        for i in 0..m {
            for j in 0..m {
                let d = self.grid.diff[(i, j)];
                for k in 0..kk {
                    for c in 0..dim {
                        out[i][k][c] += self.u[j][k][c] * d;
                    }
                }
            }
        }
        out
    }

    fn interpolate(&self, data: &[Modes], weights: &[f64]) -> Modes {
        let (kk, dim) = (self.k_theta() + 1, self.dim());
        let mut out = vec![vec![ZERO; dim]; kk];
        for (w, m) in weights.iter().zip(data) {
            for k in 0..kk {
                for c in 0..dim {
                    out[k][c] += m[k][c] * *w;
                }
            }
        }
        out
    }

    /// `U` and `∂_r U` at any `r ∈ [0, γ]`.
    pub fn modes_at(&self, r: f64) -> (Modes, Modes) {
        let w = self.grid.interp_weights(r);
        (self.interpolate(&self.u, &w), self.interpolate(&self.derivative(), &w))
    }

    fn synth(modes: &Modes, theta: f64) -> Vec<f64> {
        (0..modes[0].len())
            .map(|c| {
                let mut acc = modes[0][c].re;
                for (k, m) in modes.iter().enumerate().skip(1) {
                    acc += 2.0 * (m[c] * Complex64::from_polar(1.0, k as f64 * theta)).re;
                }
                acc
            })
            .collect()
    }

    /// `V(r, θ)`.
    pub fn eval(&self, r: f64, theta: f64) -> Vec<f64> {
        let (u, _) = self.modes_at(r);
        let rs = r.powi(self.sigma as i32);
        Self::synth(&u, theta).into_iter().map(|x| x * rs).collect()
    }

    /// `∂_r V(r, θ)`.
    pub fn eval_dr(&self, r: f64, theta: f64) -> Vec<f64> {
        let (u, du) = self.modes_at(r);
        let s = self.sigma as i32;
        let (a, b) = (Self::synth(&u, theta), Self::synth(&du, theta));
        a.iter().zip(&b).map(|(x, y)| s as f64 * r.powi(s - 1) * x + r.powi(s) * y).collect()
    }

    /// `∂_θ V(r, θ)`.
    pub fn eval_dtheta(&self, r: f64, theta: f64) -> Vec<f64> {
        let (u, _) = self.modes_at(r);
        let rs = r.powi(self.sigma as i32);
        let du: Modes =
            u.iter().enumerate().map(|(k, m)| m.iter().map(|x| x * Complex64::new(0.0, k as f64)).collect()).collect();
        Self::synth(&du, theta).into_iter().map(|x| x * rs).collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let u = self
            .u
            .iter()
            .zip(&other.u)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect())
            .collect();
        Self { grid: self.grid.clone(), sigma: self.sigma, u }
    }

    /// `max |U_k(r_i)|` over nodes, modes and components.
    pub fn sup_norm(&self) -> f64 {
        self.u.iter().flatten().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Discrete weighted norm `sup_k sup_i e^{δ|k|} γ^{σ−1} |U_k(r_i)|`.
    pub fn weighted_norm(&self, delta: f64) -> f64 {
        let scale = self.grid.gamma.powi(self.sigma as i32 - 1);
        let mut best = 0.0f64;
        for node in &self.u {
            for (k, m) in node.iter().enumerate() {
                let w = (delta * k as f64).exp() * scale;
                for z in m {
                    best = best.max(w * z.norm());
                }
            }
        }
        best
    }

    pub fn to_json(&self) -> Value {
        let coeffs: Vec<Value> = self
            .u
            .iter()
            .map(|node| Value::from(node.iter().map(|m| Value::from(m.iter().map(|z| json!([z.re, z.im])).collect::<Vec<_>>())).collect::<Vec<_>>()))
            .collect();
        json!({
            "gamma": self.grid.gamma,
            "sigma": self.sigma,
            "k_theta": self.k_theta(),
            "nodes": self.grid.nodes,
            "factored": true,
            "coefficients": coeffs,
        })
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct Solved {
    pub field: CorrectionField,
    /// `max |U_{m+1} − U_m|` per iteration.
    pub updates: Vec<f64>,
}

/// Measured contraction of the fixed-point map from `U = 0`.
#[derive(Clone, Debug, Serialize)]
pub struct Contraction {
    pub method: &'static str,
    pub delta: f64,
    /// `‖U_{m+1} − U_m‖` in the weighted norm.
    pub norms: Vec<f64>,
    /// Ratios of successive norms above the rounding floor.
    pub ratios: Vec<f64>,
    pub q_observed: f64,
}

/// Runs `n_iters` fixed-point steps from zero and records difference ratios.
pub fn contraction_estimate(problem: &CorrectionProblem, n_iters: usize, delta: f64) -> Result<Contraction> {
    let picard = problem.eps >= problem.opts.eps_min;
    let op = if picard { None } else { Some(CollocationOperator::new(problem)?) };
    let step = |f: &CorrectionField| -> Result<CorrectionField> {
        match &op {
            None => picard_step(problem, f),
            Some(op) => Ok(collocation_step(problem, op, f)),
        }
    };
    let mut cur = CorrectionField::zeros(problem);
    let mut norms = Vec::with_capacity(n_iters);
    for _ in 0..n_iters {
        let next = step(&cur)?;
        norms.push(next.sub(&cur).weighted_norm(delta));
        cur = next;
    }
    let floor = 1e-12 * norms.first().copied().unwrap_or(0.0);
    let ratios: Vec<f64> = norms.windows(2).take_while(|w| w[1] > floor).map(|w| w[1] / w[0]).collect();
    if let Some(q) = ratios.iter().find(|q| **q > DIVERGENCE_RATIO) {
        return Err(SsmError::Divergence(format!(
            "iterate ratio {q:.3} exceeds {DIVERGENCE_RATIO}; reduce γ (currently {})",
            problem.gamma
        )));
    }
    let q_observed = ratios.iter().copied().fold(0.0, f64::max);
    Ok(Contraction { method: if picard { "picard" } else { "collocation" }, delta, norms, ratios, q_observed })
}

/// Collocation solve with the grid doubled (at most twice) until the
/// invariance residual drops below [`FIXED_POINT_TOL`].
pub fn solve_with_refinement(
    model: &PolyVectorField,
    spec: &SpectralData,
    exp: &ManifoldExpansion,
    gamma: f64,
    eps: f64,
    opts: CorrectionOptions,
) -> Result<(CorrectionProblem, Solved, f64)> {
    let mut opts = opts;
    let mut attempt = 0;
    loop {
        let problem = make_problem(model, spec, exp, gamma, eps, opts.clone())?;
        let solved = solve_collocation(&problem, &CorrectionField::zeros(&problem))?;
        let residual = problem.invariance_residual(&solved.field);
        if residual < FIXED_POINT_TOL || attempt == 2 {
            return Ok((problem, solved, residual));
        }
        attempt += 1;
        opts.m_r *= 2;
        opts.k_theta *= 2;
    }
}
