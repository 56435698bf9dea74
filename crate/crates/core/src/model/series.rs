//! Truncated Fourier–Taylor series `Σ_{n≤N} Σ_{|k|≤n} w[n][k] rⁿ e^{ikθ}`.
//!
//! Coefficients are ε-polynomials. Only `k ≥ 0` is ever computed; the
//! negative half is filled by conjugation so that the reality invariant
//! holds bit-for-bit, and the `k = 0` entries are kept real.

use num_complex::Complex64;

use super::eps_poly::{CJet, JetCtx};

#[inline]
fn slot(n: usize, k: i64) -> usize {
    n * n + (k + n as i64) as usize
}

/// One scalar Fourier–Taylor series.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSeries {
    order: usize,
    ctx: JetCtx,
    data: Vec<CJet>,
}

impl ScalarSeries {
    pub fn zero(order: usize, ctx: JetCtx) -> Self {
        Self { order, ctx, data: vec![ctx.zero(); (order + 1) * (order + 1)] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ctx(&self) -> JetCtx {
        self.ctx
    }

    /// Coefficient of `rⁿ e^{ikθ}`; zero outside the support.
    pub fn get(&self, n: usize, k: i64) -> CJet {
        if n > self.order || k.unsigned_abs() as usize > n {
            self.ctx.zero()
        } else {
            self.data[slot(n, k)]
        }
    }

    /// Sets `w[n][k]` and `w[n][−k] = conj(w[n][k])`. For `k = 0` the
    /// imaginary part is dropped.
    pub fn set(&mut self, n: usize, k: i64, value: CJet) {
        assert!(n <= self.order && k.unsigned_abs() as usize <= n, "({n},{k}) outside support");
        if k == 0 {
            self.data[slot(n, 0)] = value.re().to_complex();
        } else {
            self.data[slot(n, k)] = value;
            self.data[slot(n, -k)] = value.conj();
        }
    }

    /// Sets one entry without touching its conjugate partner. Only for
    /// building deliberately malformed inputs in diagnostics.
    pub fn set_raw(&mut self, n: usize, k: i64, value: CJet) {
        self.data[slot(n, k)] = value;
    }

    pub fn truncate(&self, order: usize) -> Self {
        let mut out = Self::zero(order, self.ctx);
        for n in 0..=order.min(self.order) {
            for k in -(n as i64)..=n as i64 {
                out.data[slot(n, k)] = self.data[slot(n, k)];
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &Self, f: impl Fn(CJet, CJet) -> CJet) -> Self {
        let order = self.order.min(other.order);
        let mut out = Self::zero(order, self.ctx);
        for n in 0..=order {
            for k in -(n as i64)..=n as i64 {
                out.data[slot(n, k)] = f(self.data[slot(n, k)], other.data[slot(n, k)]);
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for n in 0..=self.order.min(other.order) {
            for k in -(n as i64)..=n as i64 {
                let s = slot(n, k);
                self.data[s] = self.data[s] + other.data[s];
            }
        }
    }

    /// Multiplies every coefficient by a real ε-polynomial factor.
    pub fn scale_jet(&self, c: CJet) -> Self {
        let mut out = self.clone();
        for n in 0..=self.order {
            for k in 0..=n as i64 {
                if !self.data[slot(n, k)].is_zero() {
                    out.set(n, k, self.data[slot(n, k)] * c);
                }
            }
        }
        out
    }

    /// Truncated product, convolving in both `n` and `k`.
    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order.min(other.order);
        let mut out = Self::zero(order, self.ctx);
        for n in 0..=order {
            for k in 0..=n as i64 {
                let mut acc = self.ctx.zero();
                for m in 0..=n {
                    let rest = (n - m) as i64;
                    for k1 in -(m as i64)..=m as i64 {
                        let k2 = k - k1;
                        if k2.abs() > rest {
                            continue;
                        }
                        let a = self.data[slot(m, k1)];
                        if a.is_zero() {
                            continue;
                        }
                        let b = other.data[slot(n - m, k2)];
                        if b.is_zero() {
                            continue;
                        }
                        acc += a * b;
                    }
                }
                out.set(n, k, acc);
            }
        }
        out
    }

    pub fn max_modulus(&self) -> f64 {
        self.data.iter().map(|c| c.max_modulus()).fold(0.0, f64::max)
    }

    /// Value at `(r, θ)` with the ε-coefficients evaluated at `eps`.
    pub fn eval(&self, r: f64, theta: f64, eps: f64) -> Complex64 {
        self.eval_with(r, theta, eps, |_, c| c)
    }

    /// `∂/∂r` at `(r, θ)`.
    pub fn eval_dr(&self, r: f64, theta: f64, eps: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut rp = 1.0;
        for n in 1..=self.order {
            acc += self.harmonic_sum(n, theta, eps, |_, c| c) * (n as f64 * rp);
            rp *= r;
        }
        acc
    }

    /// `∂/∂θ` at `(r, θ)`.
    pub fn eval_dtheta(&self, r: f64, theta: f64, eps: f64) -> Complex64 {
        self.eval_with(r, theta, eps, |k, c| c * Complex64::new(0.0, k as f64))
    }

    fn eval_with(
        &self,
        r: f64,
        theta: f64,
        eps: f64,
        f: impl Fn(i64, Complex64) -> Complex64 + Copy,
    ) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut rp = 1.0;
        for n in 0..=self.order {
            acc += self.harmonic_sum(n, theta, eps, f) * rp;
            rp *= r;
        }
        acc
    }

    fn harmonic_sum(
        &self,
        n: usize,
        theta: f64,
        eps: f64,
        f: impl Fn(i64, Complex64) -> Complex64,
    ) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in -(n as i64)..=n as i64 {
            let c = self.data[slot(n, k)];
            if c.is_zero() {
                continue;
            }
            acc += f(k, c.eval(eps)) * Complex64::from_polar(1.0, k as f64 * theta);
        }
        acc
    }

    /// The rⁿ slice as a trigonometric polynomial evaluated at θ.
    pub fn slice_at(&self, n: usize, theta: f64, eps: f64) -> Complex64 {
        self.harmonic_sum(n, theta, eps, |_, c| c)
    }
}

/// Vector-valued Fourier–Taylor series: one [`ScalarSeries`] per state component.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTaylor {
    comps: Vec<ScalarSeries>,
}

impl FourierTaylor {
    pub fn zero(dim: usize, order: usize, ctx: JetCtx) -> Self {
        Self { comps: vec![ScalarSeries::zero(order, ctx); dim] }
    }

    pub fn from_components(comps: Vec<ScalarSeries>) -> Self {
        Self { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn order(&self) -> usize {
        self.comps.first().map_or(0, ScalarSeries::order)
    }

    pub fn ctx(&self) -> JetCtx {
        self.comps[0].ctx()
    }

    pub fn component(&self, i: usize) -> &ScalarSeries {
        &self.comps[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut ScalarSeries {
        &mut self.comps[i]
    }

    pub fn components(&self) -> &[ScalarSeries] {
        &self.comps
    }

    pub fn get(&self, n: usize, k: i64) -> Vec<CJet> {
        self.comps.iter().map(|c| c.get(n, k)).collect()
    }

    pub fn set(&mut self, n: usize, k: i64, value: &[CJet]) {
        for (c, v) in self.comps.iter_mut().zip(value) {
            c.set(n, k, *v);
        }
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self { comps: self.comps.iter().map(|c| c.truncate(order)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.add(b)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.sub(b)).collect() }
    }

    pub fn max_modulus(&self) -> f64 {
        self.comps.iter().map(ScalarSeries::max_modulus).fold(0.0, f64::max)
    }

    pub fn eval(&self, r: f64, theta: f64, eps: f64) -> Vec<Complex64> {
        self.comps.iter().map(|c| c.eval(r, theta, eps)).collect()
    }

    pub fn eval_dr(&self, r: f64, theta: f64, eps: f64) -> Vec<Complex64> {
        self.comps.iter().map(|c| c.eval_dr(r, theta, eps)).collect()
    }

    pub fn eval_dtheta(&self, r: f64, theta: f64, eps: f64) -> Vec<Complex64> {
        self.comps.iter().map(|c| c.eval_dtheta(r, theta, eps)).collect()
    }
}

/// Caches integer powers of the components of a vector series.
pub struct PowerCache<'a> {
    base: &'a FourierTaylor,
    powers: Vec<Vec<ScalarSeries>>,
}

impl<'a> PowerCache<'a> {
    pub fn new(base: &'a FourierTaylor) -> Self {
        let ctx = base.ctx();
        let order = base.order();
        let mut one = ScalarSeries::zero(order, ctx);
        one.set(0, 0, ctx.real(1.0));
        let powers = (0..base.dim()).map(|i| vec![one.clone(), base.component(i).clone()]).collect();
        Self { base, powers }
    }

    pub fn power(&mut self, i: usize, p: u32) -> &ScalarSeries {
        let p = p as usize;
        while self.powers[i].len() <= p {
            let next = self.powers[i].last().unwrap().mul(self.base.component(i));
            self.powers[i].push(next);
        }
        &self.powers[i][p]
    }

    /// `Π_i W_i^{e_i}` as a series.
    pub fn monomial(&mut self, exponents: &[u32]) -> ScalarSeries {
        let mut acc: Option<ScalarSeries> = None;
        for (i, &e) in exponents.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let f = self.power(i, e).clone();
            acc = Some(match acc {
                None => f,
                Some(a) => a.mul(&f),
            });
        }
        acc.unwrap_or_else(|| self.powers[0][0].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ctx() -> JetCtx {
        JetCtx::new(1, 0.0)
    }

    fn cosine(order: usize) -> ScalarSeries {
        let mut s = ScalarSeries::zero(order, ctx());
        s.set(1, 1, ctx().real(0.5));
        s
    }

    #[test]
    fn reality_is_enforced_on_set() {
        let mut s = ScalarSeries::zero(2, ctx());
        s.set(2, 2, ctx().complex(Complex64::new(1.0, 2.0)));
        assert_eq!(s.get(2, -2).value(), Complex64::new(1.0, -2.0));
        s.set(2, 0, ctx().complex(Complex64::new(3.0, 1.0)));
        assert_eq!(s.get(2, 0).value(), Complex64::new(3.0, 0.0));
    }

    #[test]
    fn cube_of_cosine() {
        // (r cos θ)³ = r³ (3 cos θ + cos 3θ)/4
        let c = cosine(3);
        let cube = c.mul(&c).mul(&c);
        assert_eq!(cube.get(3, 3).value().re, 1.0 / 8.0);
        assert_eq!(cube.get(3, 1).value().re, 3.0 / 8.0);
        assert_eq!(cube.get(3, 2).value(), Complex64::new(0.0, 0.0));
        let v = cube.eval(0.5, 0.3, 0.0).re;
        assert!((v - (0.5 * 0.3f64.cos()).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_differences() {
        let mut s = ScalarSeries::zero(3, ctx());
        s.set(1, 1, ctx().complex(Complex64::new(0.3, -0.2)));
        s.set(3, 3, ctx().complex(Complex64::new(0.1, 0.7)));
        s.set(2, 0, ctx().real(0.4));
        let (r, th, h) = (0.4, 1.1, 1e-6);
        let dr = (s.eval(r + h, th, 0.0) - s.eval(r - h, th, 0.0)) / (2.0 * h);
        let dt = (s.eval(r, th + h, 0.0) - s.eval(r, th - h, 0.0)) / (2.0 * h);
        assert!((dr - s.eval_dr(r, th, 0.0)).norm() < 1e-9);
        assert!((dt - s.eval_dtheta(r, th, 0.0)).norm() < 1e-9);
        assert!((s.eval(r, th, 0.0) - s.eval(r, th + 2.0 * PI, 0.0)).norm() < 1e-15);
    }
}
