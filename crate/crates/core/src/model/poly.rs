//! Sparse real multivariate polynomials.
//!
//! Used for the conserved quantity, where the conservation law has to be
//! checked as a polynomial identity rather than on samples.

use std::collections::BTreeMap;

/// `Σ c_e x^e` with exponent vectors of fixed length.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn from_terms<'a>(nvars: usize, terms: impl IntoIterator<Item = (&'a [u32], f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    /// The coordinate function `x_i`.
    pub fn variable(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Self::from_terms(nvars, [(e.as_slice(), 1.0)])
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, exponents: &[u32], coefficient: f64) {
        assert_eq!(exponents.len(), self.nvars);
        if coefficient == 0.0 {
            return;
        }
        let slot = self.terms.entry(exponents.to_vec()).or_insert(0.0);
        *slot += coefficient;
        if *slot == 0.0 {
            self.terms.remove(exponents);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms.get(exponents).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * monomial(e, x))
            .sum()
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[var] -= 1;
            out.add_term(&d, c * e[var] as f64);
        }
        out
    }

    pub fn gradient(&self) -> Vec<Self> {
        (0..self.nvars).map(|i| self.derivative(i)).collect()
    }

    /// Hessian at the origin, read off the quadratic part.
    pub fn hessian_at_origin(&self) -> Vec<Vec<f64>> {
        let n = self.nvars;
        let mut h = vec![vec![0.0; n]; n];
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() != 2 {
                continue;
            }
            let idx: Vec<usize> = (0..n).filter(|&i| e[i] > 0).collect();
            match idx.as_slice() {
                [i] => h[*i][*i] += 2.0 * c,
                [i, j] => {
                    h[*i][*j] += c;
                    h[*j][*i] += c;
                }
                _ => unreachable!(),
            }
        }
        h
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e, *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e, c * s);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(&e, ca * cb);
            }
        }
        out
    }
}

/// `Π x_i^{e_i}`.
pub fn monomial(exponents: &[u32], x: &[f64]) -> f64 {
    exponents
        .iter()
        .zip(x)
        .filter(|(e, _)| **e > 0)
        .map(|(e, xi)| xi.powi(*e as i32))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_and_eval() {
        // p = 3 x^2 y + y^3
        let p = Polynomial::from_terms(2, [(&[2u32, 1][..], 3.0), (&[0, 3][..], 1.0)]);
        let dx = p.derivative(0);
        assert_eq!(dx.coefficient(&[1, 1]), 6.0);
        let dy = p.derivative(1);
        assert_eq!(dy.eval(&[1.0, 2.0]), 3.0 + 12.0);
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = Polynomial::variable(2, 0);
        let d = x.add(&x.scale(-1.0));
        assert!(d.is_zero());
    }

    #[test]
    fn hessian_reads_quadratic_part() {
        let p = Polynomial::from_terms(2, [(&[2u32, 0][..], 0.5), (&[1, 1][..], 2.0), (&[4, 0][..], 1.0)]);
        assert_eq!(p.hessian_at_origin(), vec![vec![1.0, 2.0], vec![2.0, 0.0]]);
    }
}
