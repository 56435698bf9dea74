//! Order-by-order solution of the polar invariance equation
//! `D₁W·R + D₂W·T = A_ε W + N_ε(W)` at `r = 0`.
//!
//! Coefficients are stored as plain power-series coefficients (the n-th
//! derivative divided by n!). `R` is kept in full, `R = εR^≤`, so the
//! recursion never divides by ε; `R^≤` is recovered on demand.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde_json::{json, Map, Value};

use crate::error::{Result, SsmError};
use crate::model::{series_compose, CJet, EpsMode, FourierTaylor, JetCtx, PolyVectorField, RJet, ScalarSeries, TOL_EPS0};
use crate::spectral::{SpectralData, WStarProjector, DEFAULT_RES_MARGIN};

/// Fourier–Taylor expansion of the manifold and of its reduced dynamics.
#[derive(Clone, Debug)]
pub struct ManifoldExpansion {
    pub w: FourierTaylor,
    /// Coefficients of `rⁿ` in `R(r)`, including the factor ε.
    pub r: Vec<RJet>,
    /// Coefficients of `rⁿ` in `T(r)`.
    pub t: Vec<RJet>,
    pub order: usize,
    /// `σ − 1`, the last order of the approximate part.
    pub split_order: usize,
    pub mode: EpsMode,
    /// First-order scale of the parametrization.
    pub d: f64,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn is_zero_vec(v: &[CJet]) -> bool {
    v.iter().all(CJet::is_zero)
}

impl ManifoldExpansion {
    pub fn ctx(&self) -> JetCtx {
        self.mode.ctx()
    }

    /// The ε at which numeric values are read.
    pub fn eps(&self) -> f64 {
        self.mode.eps()
    }

    /// Coefficient of `rⁿ` in `R^≤ = R/ε`.
    pub fn r_le(&self, n: usize) -> Result<RJet> {
        self.r[n].divide_by_eps()
    }

    /// `ρ_n = DⁿR^≤(0)`.
    pub fn rho(&self, n: usize) -> Result<RJet> {
        Ok(self.r_le(n)?.scale(factorial(n)))
    }

    /// `τ_n = DⁿT(0)`.
    pub fn tau(&self, n: usize) -> RJet {
        self.t[n].scale(factorial(n))
    }

    /// The same expansion with everything above `order` dropped.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order);
        let ctx = self.ctx();
        let zero = RJet::zero(ctx.degree, ctx.origin);
        let cut = |v: &[RJet]| (0..=self.order).map(|n| if n <= order { v[n] } else { zero }).collect();
        Self {
            w: self.w.truncate(order),
            r: cut(&self.r),
            t: cut(&self.t),
            order,
            split_order: self.split_order,
            mode: self.mode,
            d: self.d,
        }
    }

    pub fn eval_complex(&self, r: f64, theta: f64, eps: f64) -> Vec<Complex64> {
        self.w.eval(r, theta, eps)
    }

    /// `W(r, θ)` at parameter `eps`.
    pub fn eval(&self, r: f64, theta: f64, eps: f64) -> Vec<f64> {
        real_part(self.eval_complex(r, theta, eps))
    }

    pub fn eval_dr(&self, r: f64, theta: f64, eps: f64) -> Vec<f64> {
        real_part(self.w.eval_dr(r, theta, eps))
    }

    pub fn eval_dtheta(&self, r: f64, theta: f64, eps: f64) -> Vec<f64> {
        real_part(self.w.eval_dtheta(r, theta, eps))
    }

    /// `R(r)` at parameter `eps`.
    pub fn eval_r(&self, r: f64, eps: f64) -> f64 {
        poly_eval(&self.r, r, eps)
    }

    /// `R'(r)`.
    pub fn eval_r_prime(&self, r: f64, eps: f64) -> f64 {
        let mut acc = 0.0;
        for n in (1..self.r.len()).rev() {
            acc = acc * r + n as f64 * self.r[n].eval(eps);
        }
        acc
    }

    /// `T(r)` at parameter `eps`.
    pub fn eval_t(&self, r: f64, eps: f64) -> f64 {
        poly_eval(&self.t, r, eps)
    }

    /// `T'(r)`.
    pub fn eval_t_prime(&self, r: f64, eps: f64) -> f64 {
        let mut acc = 0.0;
        for n in (1..self.t.len()).rev() {
            acc = acc * r + n as f64 * self.t[n].eval(eps);
        }
        acc
    }

    /// Fourier–Taylor series of `Res = D₁W·R + D₂W·T − A_εW − N_ε(W)`,
    /// carried to the full polynomial degree so no term is truncated.
    pub fn residual_series(&self, model: &PolyVectorField) -> FourierTaylor {
        let n = self.order;
        let pmax = model.terms.iter().map(|t| t.total_degree() as usize).max().unwrap_or(1);
        let m = (2 * n).max(pmax * n);
        let ctx = self.ctx();
        let w = self.w.truncate(m);
        let dim = model.dim();

        // D₁W·R is assembled as (r D₁W)·(R/r) to stay inside the support |k| ≤ n.
        let mut rs = ScalarSeries::zero(m, ctx);
        let mut ts = ScalarSeries::zero(m, ctx);
        for j in 0..=n {
            if j >= 1 {
                rs.set(j - 1, 0, self.r[j].to_complex());
            }
            ts.set(j, 0, self.t[j].to_complex());
        }
        let nonlinear = series_compose(model, &w, m);
        let eps = ctx.eps();
        let mut comps = Vec::with_capacity(dim);
        for i in 0..dim {
            let wi = w.component(i);
            let mut d1 = ScalarSeries::zero(m, ctx);
            let mut d2 = ScalarSeries::zero(m, ctx);
            for p in 0..=n {
                for k in 0..=p as i64 {
                    let c = wi.get(p, k);
                    if c.is_zero() {
                        continue;
                    }
                    d1.set(p, k, c.scale(p as f64));
                    d2.set(p, k, c.times_i().scale(k as f64));
                }
            }
            let mut res = d1.mul(&rs).add(&d2.mul(&ts));
            for j in 0..dim {
                let a = eps.scale(model.delta[(i, j)]) + ctx.real(model.omega[(i, j)]);
                if a.is_zero() {
                    continue;
                }
                res = res.sub(&w.component(j).scale_jet(a));
            }
            comps.push(res.sub(nonlinear.component(i)));
        }
        FourierTaylor::from_components(comps)
    }

    /// JSON form: Taylor-normalized coefficients as `[re, im]` pairs (numeric
    /// mode) or lists of pairs per ε-power (jet mode).
    pub fn to_json(&self) -> Result<Value> {
        let jet = matches!(self.mode, EpsMode::Jet(_));
        let cval = |c: &CJet| -> Value {
            if jet {
                Value::Array(c.coeffs().iter().map(|z| json!([z.re, z.im])).collect())
            } else {
                json!([c.value().re, c.value().im])
            }
        };
        let rval = |c: &RJet| -> Value {
            if jet {
                Value::Array(c.coeffs().iter().map(|x| json!([x, 0.0])).collect())
            } else {
                json!([c.value(), 0.0])
            }
        };
        let mut map = Map::new();
        for n in 0..=self.order {
            for k in -(n as i64)..=n as i64 {
                let v = self.w.get(n, k);
                map.insert(format!("W[{n}][{k}]"), Value::Array(v.iter().map(cval).collect()));
            }
        }
        for n in 0..=self.order {
            let rle = if n == 0 { RJet::zero(self.ctx().degree, self.ctx().origin) } else { self.r_le(n)? };
            map.insert(format!("R[{n}]"), rval(&rle));
            map.insert(format!("T[{n}]"), rval(&self.t[n]));
        }
        Ok(Value::Object(map))
    }
}

fn real_part(v: Vec<Complex64>) -> Vec<f64> {
    let scale = v.iter().map(|z| z.norm()).fold(1.0, f64::max);
    debug_assert!(v.iter().all(|z| z.im.abs() <= 1e-12 * scale), "complex residue in a real evaluation");
    v.into_iter().map(|z| z.re).collect()
}

fn poly_eval(c: &[RJet], r: f64, eps: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, x| acc * r + x.eval(eps))
}

/// Solves the expansion through `order` with the default resonance margin.
pub fn expand(model: &PolyVectorField, spec: &SpectralData, order: usize, mode: EpsMode) -> Result<ManifoldExpansion> {
    expand_with(model, spec, order, mode, DEFAULT_RES_MARGIN)
}

pub fn expand_with(
    model: &PolyVectorField,
    spec: &SpectralData,
    order: usize,
    mode: EpsMode,
    res_margin: f64,
) -> Result<ManifoldExpansion> {
    let sigma = spec.sigma as usize;
    if order + 1 < sigma {
        return Err(SsmError::Order(format!("order {order} is below σ − 1 = {}", sigma - 1)));
    }
    if let EpsMode::Numeric(eps) = mode {
        if !(0.0..=model.eps_max).contains(&eps) {
            return Err(SsmError::InvalidArgument(format!("ε = {eps} outside [0, {}]", model.eps_max)));
        }
    }
    let ell = spec.ell;
    if spec.alpha[ell] == 0.0 {
        return Err(SsmError::DegenerateMode("the distinguished pair has no linear damping".into()));
    }
    let ctx = mode.ctx();
    let dim = model.dim();
    let zero = RJet::zero(ctx.degree, ctx.origin);
    let mut exp = ManifoldExpansion {
        w: FourierTaylor::zero(dim, order, ctx),
        r: vec![zero; order + 1],
        t: vec![zero; order + 1],
        order,
        split_order: sigma - 1,
        mode,
        d: 1.0,
    };
    exp.r[1] = ctx.eps().re().scale(spec.alpha[ell]);
    exp.t[0] = RJet::constant(spec.omega[ell], ctx.degree, ctx.origin);
    let v: Vec<CJet> = spec.right[ell].iter().map(|z| ctx.complex(*z)).collect();
    exp.w.set(1, 1, &v);

    let lambda: Vec<CJet> = (0..dim).map(|j| spec.lambda_jet(j, ctx)).collect();
    for n in 2..=order {
        let eta = eta_term(model, &exp, n);
        let r1 = exp.r[1].to_complex().scale(n as f64);
        let t0 = exp.t[0].to_complex();
        for k in (0..=n as i64).filter(|k| (n as i64 - k) % 2 == 0) {
            let mut rhs = eta[&k].clone();
            if is_zero_vec(&rhs) {
                continue;
            }
            if k == 1 {
                let z = spec.project_jet(ell, &rhs);
                let mut rn = z.re();
                if ctx.origin == 0.0 {
                    let tol = TOL_EPS0 * rhs.iter().map(CJet::max_modulus).fold(1.0, f64::max);
                    if rn.value().abs() > tol {
                        return Err(SsmError::Solvability(format!(
                            "order {n}: growth projection has constant term {:.3e} at ε = 0",
                            rn.value()
                        )));
                    }
                    rn.set_coeff(0, 0.0);
                }
                exp.r[n] = rn;
                exp.t[n - 1] = z.im();
                let fixed = rn.to_complex() + z.im().to_complex().times_i();
                for (x, vi) in rhs.iter_mut().zip(&v) {
                    *x -= *vi * fixed;
                }
            }
            let mut sol = vec![ctx.zero(); dim];
            for j in 0..dim {
                if k == 1 && j == ell {
                    continue;
                }
                let p = spec.project_jet(j, &rhs);
                if p.is_zero() {
                    continue;
                }
                let divisor = r1 + t0.times_i().scale(k as f64) - lambda[j];
                let m = divisor.value().norm();
                if m < 0.5 * res_margin {
                    return Err(SsmError::NearResonance(format!(
                        "order {n}, harmonic {k}, mode {j}: divisor {m:.3e} below {:.3e}",
                        0.5 * res_margin
                    )));
                }
                let y = p.checked_div(&divisor).expect("nonzero divisor");
                for (s, vj) in sol.iter_mut().zip(&spec.right[j]) {
                    *s += y.mul_coeff(*vj);
                }
            }
            exp.w.set(n, k, &sol);
        }
    }
    Ok(exp)
}

/// Right-hand side `η^n_k`, `k ≥ 0`, of the order-n equation given all
/// lower orders of `partial`:
/// `Nⁿ_k − Σ_{m=2}^{n−1} (m R_{n+1−m} + ik T_{n−m}) w[m][k]`.
pub fn eta_term(model: &PolyVectorField, partial: &ManifoldExpansion, n: usize) -> BTreeMap<i64, Vec<CJet>> {
    let lower = partial.w.truncate(n - 1);
    let nser = series_compose(model, &lower.truncate(n), n);
    let dim = model.dim();
    let mut out = BTreeMap::new();
    for k in 0..=n as i64 {
        let mut eta: Vec<CJet> = (0..dim).map(|i| nser.component(i).get(n, k)).collect();
        if (n as i64 - k) % 2 == 0 {
            for m in 2..n {
                let wm = partial.w.get(m, k);
                if is_zero_vec(&wm) {
                    continue;
                }
                let f = partial.r[n + 1 - m].to_complex().scale(m as f64)
                    + partial.t[n - m].to_complex().times_i().scale(k as f64);
                for (e, x) in eta.iter_mut().zip(&wm) {
                    *e -= *x * f;
                }
            }
        }
        out.insert(k, eta);
    }
    out
}

/// Cartesian coefficients `b_pq` with `W = Σ b_pq zᵖ z̄^q`, `z = x + iy = re^{iθ}`.
#[derive(Clone, Debug)]
pub struct Cartesian {
    pub coeffs: BTreeMap<(usize, usize), Vec<Complex64>>,
}

impl Cartesian {
    pub fn eval(&self, x: f64, y: f64) -> Vec<Complex64> {
        let z = Complex64::new(x, y);
        let dim = self.coeffs.values().next().map_or(0, Vec::len);
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for ((p, q), b) in &self.coeffs {
            let m = z.powu(*p as u32) * z.conj().powu(*q as u32);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += bi * m;
            }
        }
        out
    }
}

/// Reads `b_pq = w[p+q][p−q]` at the expansion's ε.
pub fn to_cartesian(exp: &ManifoldExpansion) -> Cartesian {
    let eps = exp.eps();
    let mut coeffs = BTreeMap::new();
    for n in 1..=exp.order {
        for p in 0..=n {
            let q = n - p;
            let k = p as i64 - q as i64;
            let b: Vec<Complex64> = exp.w.get(n, k).iter().map(|c| c.eval(eps)).collect();
            coeffs.insert((p, q), b);
        }
    }
    Cartesian { coeffs }
}

/// Growth and phase projections of `D₁ⁿW(0, ·)` at one order.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct GrowthPhase {
    pub order: usize,
    pub growth0: f64,
    pub phase0: f64,
    pub growth1: f64,
    pub phase1: f64,
}

/// Projections of the ε⁰ and ε¹ parts of `D₁ⁿW(0,·) = n!·Σ_k w[n][k]e^{ikθ}`.
pub fn growth_phase_check(exp: &ManifoldExpansion, wstar: &WStarProjector) -> Vec<GrowthPhase> {
    (1..=exp.order)
        .map(|n| {
            let f = factorial(n);
            let a = exp.w.get(n, 1);
            let part = |j: usize| -> Vec<Complex64> { a.iter().map(|c| c.coeff(j) * f).collect() };
            let (p0, p1) = (part(0), part(1));
            GrowthPhase {
                order: n,
                growth0: wstar.growth(&p0),
                phase0: wstar.phase(&p0),
                growth1: wstar.growth(&p1),
                phase1: wstar.phase(&p1),
            }
        })
        .collect()
}
