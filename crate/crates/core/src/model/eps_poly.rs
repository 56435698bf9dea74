//! Truncated polynomials in the damping parameter.
//!
//! An [`EpsPoly`] holds the Taylor coefficients of a quantity in powers of
//! `δ = ε − ε₀` about an expansion point `ε₀` (the `origin`). With `ε₀ = 0`
//! this is an ε-jet and division by ε is a coefficient shift, which is how
//! the conservative limit is taken exactly. With `ε₀ > 0` the same type
//! carries a numeric value plus its local ε-sensitivity, so the numeric and
//! jet code paths share one implementation.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{Result, SsmError};

/// Largest supported truncation degree.
pub const MAX_EPS_DEGREE: usize = 3;
const LEN: usize = MAX_EPS_DEGREE + 1;

/// Constant terms below this magnitude are treated as zero by
/// [`EpsPoly::divide_by_eps`] at `ε₀ = 0`.
pub const TOL_EPS0: f64 = 1e-12;

/// Coefficient ring for [`EpsPoly`]: `f64` or `Complex64`.
pub trait Coeff:
    Copy
    + PartialEq
    + std::fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    fn scale(self, s: f64) -> Self;
    fn modulus(self) -> f64;
    fn conj(self) -> Self;
}

impl Coeff for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn conj(self) -> Self {
        self
    }
}

impl Coeff for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
}

/// Truncated polynomial `Σ_j c_j (ε − ε₀)^j`, `j ≤ degree`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsPoly<T: Coeff = f64> {
    coeffs: [T; LEN],
    degree: usize,
    origin: f64,
}

/// Real ε-polynomial.
pub type RJet = EpsPoly<f64>;
/// Complex ε-polynomial.
pub type CJet = EpsPoly<Complex64>;

impl<T: Coeff> EpsPoly<T> {
    /// Builds a polynomial about `ε₀ = 0`. Coefficients beyond `degree` are ignored.
    pub fn new(coeffs: &[T], degree: usize) -> Self {
        Self::with_origin(coeffs, degree, 0.0)
    }

    pub fn with_origin(coeffs: &[T], degree: usize, origin: f64) -> Self {
        assert!(degree <= MAX_EPS_DEGREE, "ε-degree {degree} exceeds {MAX_EPS_DEGREE}");
        let mut c = [T::zero(); LEN];
        for (dst, src) in c.iter_mut().zip(coeffs.iter()).take(degree + 1) {
            *dst = *src;
        }
        Self { coeffs: c, degree, origin }
    }

    pub fn constant(value: T, degree: usize, origin: f64) -> Self {
        Self::with_origin(&[value], degree, origin)
    }

    pub fn zero(degree: usize, origin: f64) -> Self {
        Self::constant(T::zero(), degree, origin)
    }

    /// The parameter ε itself.
    pub fn eps(degree: usize, origin: f64) -> Self {
        Self::with_origin(&[T::from_real(origin), T::one()], degree, origin)
    }

    /// A zero polynomial with the same degree and origin as `self`.
    pub fn zero_like(&self) -> Self {
        Self::zero(self.degree, self.origin)
    }

    pub fn constant_like(&self, value: T) -> Self {
        Self::constant(value, self.degree, self.origin)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs[..=self.degree]
    }

    pub fn coeff(&self, j: usize) -> T {
        if j <= self.degree {
            self.coeffs[j]
        } else {
            T::zero()
        }
    }

    pub fn set_coeff(&mut self, j: usize, value: T) {
        assert!(j <= self.degree);
        self.coeffs[j] = value;
    }

    /// Value at the expansion point.
    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    /// Evaluates the truncated polynomial at `eps`.
    pub fn eval(&self, eps: f64) -> T {
        let d = eps - self.origin;
        let mut acc = T::zero();
        for j in (0..=self.degree).rev() {
            acc = acc.scale(d) + self.coeffs[j];
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs().iter().all(|c| *c == T::zero())
    }

    /// Largest coefficient modulus.
    pub fn max_modulus(&self) -> f64 {
        self.coeffs().iter().map(|c| c.modulus()).fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|c| c.scale(s))
    }

    pub fn mul_coeff(&self, s: T) -> Self {
        self.map(|c| c * s)
    }

    pub fn map<U: Coeff>(&self, f: impl Fn(T) -> U) -> EpsPoly<U> {
        let mut c = [U::zero(); LEN];
        for j in 0..=self.degree {
            c[j] = f(self.coeffs[j]);
        }
        EpsPoly { coeffs: c, degree: self.degree, origin: self.origin }
    }

    pub fn conj(&self) -> Self {
        self.map(|c| c.conj())
    }

    /// Keeps coefficients up to `degree`.
    pub fn truncate(&self, degree: usize) -> Self {
        let degree = degree.min(self.degree);
        Self::with_origin(&self.coeffs[..=degree], degree, self.origin)
    }

    fn check_compatible(&self, other: &Self) {
        debug_assert!(
            self.origin == other.origin,
            "mixing ε-polynomials about different origins ({} vs {})",
            self.origin,
            other.origin
        );
    }

    /// Multiplies by ε. About `ε₀ = 0` this shifts coefficients up and
    /// drops the one that falls off the truncation.
    pub fn multiply_by_eps(&self) -> Self {
        if self.origin == 0.0 {
            let mut c = [T::zero(); LEN];
            for j in 1..=self.degree {
                c[j] = self.coeffs[j - 1];
            }
            Self { coeffs: c, degree: self.degree, origin: 0.0 }
        } else {
            *self * Self::eps(self.degree, self.origin)
        }
    }

    /// Divides by ε with the default tolerance [`TOL_EPS0`].
    pub fn divide_by_eps(&self) -> Result<Self> {
        self.divide_by_eps_tol(TOL_EPS0)
    }

    /// Divides by ε. About `ε₀ = 0` the constant term must vanish (within
    /// `tol`) and the result loses one degree; otherwise the series of
    /// `1/(ε₀ + δ)` is used and the degree is kept.
    pub fn divide_by_eps_tol(&self, tol: f64) -> Result<Self> {
        if self.origin == 0.0 {
            if self.coeffs[0].modulus() > tol {
                return Err(SsmError::Solvability(format!(
                    "division by ε at ε = 0 with nonzero constant term {:?}",
                    self.coeffs[0]
                )));
            }
            if self.degree == 0 {
                return Err(SsmError::Solvability(
                    "division by ε at ε = 0 needs degree ≥ 1".into(),
                ));
            }
            let mut c = [T::zero(); LEN];
            for j in 0..self.degree {
                c[j] = self.coeffs[j + 1];
            }
            Ok(Self { coeffs: c, degree: self.degree - 1, origin: 0.0 })
        } else {
            let e0 = self.origin;
            let mut inv = [T::zero(); LEN];
            let mut p = 1.0 / e0;
            for (j, slot) in inv.iter_mut().enumerate().take(self.degree + 1) {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                *slot = T::from_real(sign * p);
                p /= e0;
            }
            let inv = Self { coeffs: inv, degree: self.degree, origin: e0 };
            Ok(*self * inv)
        }
    }

    /// Multiplicative inverse; `None` if the constant term is zero.
    pub fn inv(&self) -> Option<Self> {
        let c0 = self.coeffs[0];
        if c0 == T::zero() {
            return None;
        }
        let mut q = [T::zero(); LEN];
        q[0] = T::one() / c0;
        for j in 1..=self.degree {
            let mut s = T::zero();
            for i in 1..=j {
                s = s + self.coeffs[i] * q[j - i];
            }
            q[j] = -(s / c0);
        }
        Some(Self { coeffs: q, degree: self.degree, origin: self.origin })
    }

    pub fn checked_div(&self, other: &Self) -> Option<Self> {
        other.inv().map(|i| *self * i)
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, e: usize) -> Self {
        let mut acc = self.constant_like(T::one());
        for _ in 0..e {
            acc = acc * *self;
        }
        acc
    }
}

/// Degree and origin shared by every ε-polynomial of one computation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetCtx {
    pub degree: usize,
    pub origin: f64,
}

impl JetCtx {
    pub fn new(degree: usize, origin: f64) -> Self {
        assert!(degree <= MAX_EPS_DEGREE);
        Self { degree, origin }
    }

    pub fn zero(&self) -> CJet {
        CJet::zero(self.degree, self.origin)
    }

    pub fn complex(&self, z: Complex64) -> CJet {
        CJet::constant(z, self.degree, self.origin)
    }

    pub fn real(&self, x: f64) -> CJet {
        self.complex(Complex64::new(x, 0.0))
    }

    pub fn eps(&self) -> CJet {
        CJet::eps(self.degree, self.origin)
    }

    /// `c·ε^d`.
    pub fn eps_monomial(&self, c: f64, d: u32) -> CJet {
        self.eps().powi(d as usize).scale(c)
    }

    /// `a·ε + b i` for a complex number affine in ε.
    pub fn affine(&self, slope: Complex64, intercept: Complex64) -> CJet {
        self.eps().mul_coeff(slope) + self.complex(intercept)
    }
}

impl CJet {
    pub fn re(&self) -> RJet {
        self.map(|c| c.re)
    }

    pub fn im(&self) -> RJet {
        self.map(|c| c.im)
    }

    /// Multiplies by the imaginary unit.
    pub fn times_i(&self) -> Self {
        self.map(|c| Complex64::new(-c.im, c.re))
    }
}

impl RJet {
    pub fn to_complex(&self) -> CJet {
        self.map(|c| Complex64::new(c, 0.0))
    }
}

impl<T: Coeff> Add for EpsPoly<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.check_compatible(&rhs);
        let degree = self.degree.min(rhs.degree);
        let mut c = [T::zero(); LEN];
        for j in 0..=degree {
            c[j] = self.coeffs[j] + rhs.coeffs[j];
        }
        Self { coeffs: c, degree, origin: self.origin }
    }
}

impl<T: Coeff> Sub for EpsPoly<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.check_compatible(&rhs);
        let degree = self.degree.min(rhs.degree);
        let mut c = [T::zero(); LEN];
        for j in 0..=degree {
            c[j] = self.coeffs[j] - rhs.coeffs[j];
        }
        Self { coeffs: c, degree, origin: self.origin }
    }
}

impl<T: Coeff> Mul for EpsPoly<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.check_compatible(&rhs);
        let degree = self.degree.min(rhs.degree);
        let mut c = [T::zero(); LEN];
        for i in 0..=degree {
            let a = self.coeffs[i];
            if a == T::zero() {
                continue;
            }
            for j in 0..=(degree - i) {
                c[i + j] = c[i + j] + a * rhs.coeffs[j];
            }
        }
        Self { coeffs: c, degree, origin: self.origin }
    }
}

impl<T: Coeff> Neg for EpsPoly<T> {
    type Output = Self;
    fn neg(self) -> Self {
        self.map(|c| -c)
    }
}

impl<T: Coeff> AddAssign for EpsPoly<T> {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl<T: Coeff> SubAssign for EpsPoly<T> {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(c: &[f64]) -> RJet {
        RJet::new(c, c.len() - 1)
    }

    #[test]
    fn product_truncates() {
        let a = poly(&[1.0, 2.0]);
        let b = poly(&[3.0, 4.0]);
        let p = a * b;
        assert_eq!(p.coeffs(), &[3.0, 10.0]);
    }

    #[test]
    fn divide_by_eps_requires_vanishing_constant() {
        let p = poly(&[1e-3, 2.0, 5.0]);
        assert!(matches!(p.divide_by_eps(), Err(SsmError::Solvability(_))));
        let q = poly(&[0.0, 2.0, 5.0]).divide_by_eps().unwrap();
        assert_eq!(q.degree(), 1);
        assert_eq!(q.coeffs(), &[2.0, 5.0]);
    }

    #[test]
    fn divide_by_eps_away_from_zero_is_numeric_division() {
        let e0 = 0.25;
        let p = RJet::with_origin(&[0.5, 1.0, 0.0], 2, e0);
        let q = p.divide_by_eps().unwrap();
        for eps in [0.249, 0.25, 0.251] {
            let exact = p.eval(eps) / eps;
            assert!((q.eval(eps) - exact).abs() < 1e-6);
        }
        assert!((q.value() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_matches_geometric_series() {
        let p = poly(&[2.0, 1.0, 0.0, 0.0]);
        let q = p.inv().unwrap();
        assert_eq!(q.coeffs(), &[0.5, -0.25, 0.125, -0.0625]);
        assert!(poly(&[0.0, 1.0]).inv().is_none());
    }

    #[test]
    fn eval_uses_offset_from_origin() {
        let p = RJet::with_origin(&[1.0, 2.0], 1, 0.1);
        assert!((p.eval(0.3) - 1.4).abs() < 1e-15);
        let e = RJet::eps(1, 0.1);
        assert!((e.eval(0.7) - 0.7).abs() < 1e-15);
    }

    fn small_int() -> impl Strategy<Value = f64> {
        (-64i32..64).prop_map(|v| v as f64 / 8.0)
    }

    fn jet3() -> impl Strategy<Value = RJet> {
        proptest::collection::vec(small_int(), 4).prop_map(|c| RJet::new(&c, 3))
    }

    proptest! {
        // Dyadic coefficients keep every product exact, so the ring laws
        // hold bit-for-bit.
        #[test]
        fn ring_laws(a in jet3(), b in jet3(), c in jet3()) {
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!(a * (b + c), a * b + a * c);
        }

        #[test]
        fn divide_undoes_multiply(a in jet3()) {
            let back = a.multiply_by_eps().divide_by_eps().unwrap();
            prop_assert_eq!(back.degree(), 2);
            prop_assert_eq!(back.coeffs(), &a.coeffs()[..3]);
        }
    }
}
