//! Polynomial vector fields `ẋ = (εΔ + Ω)x + N_ε(x)` and the series
//! arithmetic used to expand them.

pub mod eps_poly;
pub mod normalize;
pub mod poly;
pub mod series;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsmError};
pub use eps_poly::{CJet, Coeff, EpsPoly, JetCtx, RJet, MAX_EPS_DEGREE, TOL_EPS0};
pub use normalize::{normalize_model, ScaleReport};
pub use poly::{monomial, Polynomial};
pub use series::{FourierTaylor, PowerCache, ScalarSeries};

/// Default truncation degree of ε-jets in jet mode.
///
/// Degree 2 keeps one ε-derivative of `R^≤ = R/ε` after the division.
pub const DEFAULT_JET_DEGREE: usize = 2;

/// How the ε-dependence of a computation is carried.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsMode {
    /// Values at a fixed ε, with the first ε-derivative carried along.
    Numeric(f64),
    /// Taylor jet about ε = 0 of the given degree.
    Jet(usize),
}

impl EpsMode {
    pub fn jet() -> Self {
        EpsMode::Jet(DEFAULT_JET_DEGREE)
    }

    pub fn ctx(&self) -> JetCtx {
        match *self {
            EpsMode::Numeric(eps) => JetCtx::new(1, eps),
            EpsMode::Jet(d) => JetCtx::new(d, 0.0),
        }
    }

    /// The ε at which jet values are read off.
    pub fn eps(&self) -> f64 {
        match *self {
            EpsMode::Numeric(eps) => eps,
            EpsMode::Jet(_) => 0.0,
        }
    }
}

/// One monomial `coefficient · ε^eps_degree · x^exponents` in component `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialTerm {
    pub target: usize,
    pub exponents: Vec<u32>,
    pub eps_degree: u32,
    pub coefficient: f64,
}

impl MonomialTerm {
    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ConservedTerm {
    exponents: Vec<u32>,
    coefficient: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    nu: usize,
    delta: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
    #[serde(default)]
    terms: Vec<MonomialTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    conserved: Option<Vec<ConservedTerm>>,
    eps_max: f64,
}

/// A validated model.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyVectorField {
    pub nu: usize,
    pub delta: DMatrix<f64>,
    pub omega: DMatrix<f64>,
    pub terms: Vec<MonomialTerm>,
    pub conserved: Option<Polynomial>,
    pub eps_max: f64,
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<PolyVectorField> {
    let text = std::fs::read_to_string(path)?;
    PolyVectorField::from_json(&text)
}

fn matrix(rows: &[Vec<f64>], dim: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(SsmError::Dimension(format!("{name} must be {dim}×{dim}")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(SsmError::Parse(format!("{name} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

impl PolyVectorField {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| SsmError::Parse(e.to_string()))?;
        let dim = 2 * file.nu;
        if file.nu == 0 {
            return Err(SsmError::Dimension("nu must be positive".into()));
        }
        let conserved = match file.conserved {
            None => None,
            Some(terms) => {
                let mut p = Polynomial::zero(dim);
                for t in &terms {
                    if t.exponents.len() != dim {
                        return Err(SsmError::Dimension(format!(
                            "conserved term has {} exponents, expected {dim}",
                            t.exponents.len()
                        )));
                    }
                    p.add_term(&t.exponents, t.coefficient);
                }
                Some(p)
            }
        };
        let model = Self {
            nu: file.nu,
            delta: matrix(&file.delta, dim, "delta")?,
            omega: matrix(&file.omega, dim, "omega")?,
            terms: file.terms,
            conserved,
            eps_max: file.eps_max,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        let rows = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        let file = ModelFile {
            nu: self.nu,
            delta: rows(&self.delta),
            omega: rows(&self.omega),
            terms: self.terms.clone(),
            conserved: self.conserved.as_ref().map(|p| {
                p.terms()
                    .map(|(e, c)| ConservedTerm { exponents: e.to_vec(), coefficient: c })
                    .collect()
            }),
            eps_max: self.eps_max,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    /// Checks every structural invariant of the model.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.delta.shape() != (dim, dim) || self.omega.shape() != (dim, dim) {
            return Err(SsmError::Dimension(format!("matrices must be {dim}×{dim}")));
        }
        if !(self.eps_max > 0.0 && self.eps_max.is_finite()) {
            return Err(SsmError::Parse(format!("eps_max must be positive, got {}", self.eps_max)));
        }
        for (i, t) in self.terms.iter().enumerate() {
            if t.exponents.len() != dim {
                return Err(SsmError::Dimension(format!(
                    "term {i} has {} exponents, expected {dim}",
                    t.exponents.len()
                )));
            }
            if t.target >= dim {
                return Err(SsmError::Dimension(format!("term {i} targets component {}", t.target)));
            }
            if t.total_degree() < 2 {
                return Err(SsmError::Equilibrium(format!(
                    "term {i} has total degree {} < 2",
                    t.total_degree()
                )));
            }
            if !t.coefficient.is_finite() {
                return Err(SsmError::Parse(format!("term {i} has a non-finite coefficient")));
            }
        }
        let comm = &self.delta * &self.omega - &self.omega * &self.delta;
        let bound = 1e-10 * self.delta.amax() * self.omega.amax();
        if comm.amax() > bound {
            return Err(SsmError::Commutator(format!(
                "‖ΔΩ − ΩΔ‖_max = {:.3e} exceeds {:.3e}",
                comm.amax(),
                bound
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.nu
    }

    /// `A_ε = εΔ + Ω`.
    pub fn linear_part(&self, eps: f64) -> DMatrix<f64> {
        &self.delta * eps + &self.omega
    }

    /// `N_ε(x)`.
    pub fn eval_nonlinear(&self, x: &[f64], eps: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for t in &self.terms {
            out[t.target] += t.coefficient * eps.powi(t.eps_degree as i32) * monomial(&t.exponents, x);
        }
        out
    }

    /// `N_ε(a + b) − N_ε(a)`, expanded so every term carries a factor of `b`.
    pub fn nonlinear_increment(&self, a: &[f64], b: &[f64], eps: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for t in &self.terms {
            let mut acc = 0.0;
            for (v, &e) in t.exponents.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                // (a+b)^e − a^e = b Σ_{m<e} (a+b)^m a^{e−1−m}
                let s = a[v] + b[v];
                let diff: f64 = b[v] * (0..e).map(|m| s.powi(m as i32) * a[v].powi((e - 1 - m) as i32)).sum::<f64>();
                let mut rest = diff;
                for (u, &f) in t.exponents.iter().enumerate() {
                    if u < v {
                        rest *= (a[u] + b[u]).powi(f as i32);
                    } else if u > v {
                        rest *= a[u].powi(f as i32);
                    }
                }
                acc += rest;
            }
            out[t.target] += t.coefficient * eps.powi(t.eps_degree as i32) * acc;
        }
        out
    }

    /// `(εΔ + Ω)x + N_ε(x)`.
    pub fn eval_field(&self, x: &[f64], eps: f64) -> Vec<f64> {
        let mut out = self.eval_nonlinear(x, eps);
        let dim = self.dim();
        for i in 0..dim {
            for j in 0..dim {
                out[i] += (eps * self.delta[(i, j)] + self.omega[(i, j)]) * x[j];
            }
        }
        out
    }

    /// Jacobian of the field at `x`.
    pub fn jacobian(&self, x: &[f64], eps: f64) -> DMatrix<f64> {
        let mut jac = self.linear_part(eps);
        for t in &self.terms {
            let c = t.coefficient * eps.powi(t.eps_degree as i32);
            for (v, &e) in t.exponents.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut d = t.exponents.clone();
                d[v] -= 1;
                jac[(t.target, v)] += c * e as f64 * monomial(&d, x);
            }
        }
        jac
    }

    /// Components of the ε = 0 field as polynomials.
    pub fn conservative_field_polynomials(&self) -> Vec<Polynomial> {
        let dim = self.dim();
        let mut f = vec![Polynomial::zero(dim); dim];
        for (i, fi) in f.iter_mut().enumerate() {
            for j in 0..dim {
                if self.omega[(i, j)] != 0.0 {
                    *fi = fi.add(&Polynomial::variable(dim, j).scale(self.omega[(i, j)]));
                }
            }
        }
        for t in self.terms.iter().filter(|t| t.eps_degree == 0) {
            f[t.target].add_term(&t.exponents, t.coefficient);
        }
        f
    }

    /// The same model without its nonlinearity.
    pub fn linearized(&self) -> Self {
        Self { terms: Vec::new(), ..self.clone() }
    }
}

/// Fourier–Taylor expansion of `N_ε(W(r,θ))` through `order`.
pub fn series_compose(model: &PolyVectorField, w: &FourierTaylor, order: usize) -> FourierTaylor {
    let w = w.truncate(order);
    let ctx = w.ctx();
    let mut out = FourierTaylor::zero(model.dim(), order, ctx);
    let mut cache = PowerCache::new(&w);
    for t in &model.terms {
        let m = cache.monomial(&t.exponents);
        let scaled = m.scale_jet(ctx.eps_monomial(t.coefficient, t.eps_degree));
        out.component_mut(t.target).add_assign(&scaled);
    }
    out
}

/// Fourier–Taylor expansion of the conserved quantity `c(W(r,θ))`.
pub fn compose_conserved(model: &PolyVectorField, w: &FourierTaylor, order: usize) -> Result<ScalarSeries> {
    let c = model
        .conserved
        .as_ref()
        .ok_or_else(|| SsmError::MissingConserved("model has no conserved quantity".into()))?;
    let w = w.truncate(order);
    let ctx = w.ctx();
    let mut out = ScalarSeries::zero(order, ctx);
    let mut cache = PowerCache::new(&w);
    for (e, coef) in c.terms() {
        let m = cache.monomial(e);
        out.add_assign(&m.scale_jet(ctx.real(coef)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const REFERENCE: &str = r#"{
        "nu": 2,
        "delta": [[-1,0,0,0],[0,-1,0,0],[0,0,-3,0],[0,0,0,-3]],
        "omega": [[0,1,0,0],[-1,0,0,0],[0,0,0,1],[0,0,-2,0]],
        "terms": [{"target": 1, "exponents": [3,0,0,0], "eps_degree": 0, "coefficient": -1}],
        "conserved": [
            {"exponents": [0,2,0,0], "coefficient": 0.5},
            {"exponents": [2,0,0,0], "coefficient": 0.5},
            {"exponents": [4,0,0,0], "coefficient": 0.25},
            {"exponents": [0,0,0,2], "coefficient": 0.5},
            {"exponents": [0,0,2,0], "coefficient": 1.0}
        ],
        "eps_max": 0.5
    }"#;

    #[test]
    fn loads_reference_model() {
        let m = PolyVectorField::from_json(REFERENCE).unwrap();
        assert_eq!(m.nu, 2);
        assert_eq!(m.terms.len(), 1);
        let back = PolyVectorField::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_linear_term() {
        let text = REFERENCE.replace("[3,0,0,0], \"eps_degree\"", "[1,0,0,0], \"eps_degree\"");
        assert!(matches!(PolyVectorField::from_json(&text), Err(SsmError::Equilibrium(_))));
    }

    #[test]
    fn rejects_non_commuting_pair() {
        let text = r#"{"nu": 1, "delta": [[0,1],[0,0]], "omega": [[0,0],[1,0]], "eps_max": 1}"#;
        assert!(matches!(PolyVectorField::from_json(text), Err(SsmError::Commutator(_))));
    }

    #[test]
    fn rejects_bad_shapes() {
        let text = r#"{"nu": 1, "delta": [[0,1,0],[0,0,0]], "omega": [[0,1],[-1,0]], "eps_max": 1}"#;
        assert!(matches!(PolyVectorField::from_json(text), Err(SsmError::Dimension(_))));
        assert!(matches!(PolyVectorField::from_json("{"), Err(SsmError::Parse(_))));
    }

    #[test]
    fn field_at_origin_and_linear_column() {
        let m = PolyVectorField::from_json(REFERENCE).unwrap();
        assert_eq!(m.eval_field(&[0.0; 4], 0.3), vec![0.0; 4]);
        let lin = m.linearized();
        assert_eq!(lin.eval_field(&[1.0, 0.0, 0.0, 0.0], 0.0), vec![0.0, -1.0, 0.0, 0.0]);
    }

    #[test]
    fn jacobian_matches_differences() {
        let m = PolyVectorField::from_json(REFERENCE).unwrap();
        let x = [0.3, -0.2, 0.1, 0.4];
        let jac = m.jacobian(&x, 0.1);
        let h = 1e-6;
        for j in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let fp = m.eval_field(&xp, 0.1);
            let fm = m.eval_field(&xm, 0.1);
            for i in 0..4 {
                assert!(((fp[i] - fm[i]) / (2.0 * h) - jac[(i, j)]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn increment_matches_difference() {
        let mut m = PolyVectorField::from_json(REFERENCE).unwrap();
        m.terms.push(MonomialTerm { target: 3, exponents: vec![1, 0, 2, 0], eps_degree: 1, coefficient: 0.7 });
        let a = [0.3, -0.2, 0.1, 0.4];
        let b = [1e-3, 2e-3, -1e-3, 5e-4];
        let ab: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + b).collect();
        let direct: Vec<f64> = m.eval_nonlinear(&ab, 0.1).iter().zip(m.eval_nonlinear(&a, 0.1)).map(|(x, y)| x - y).collect();
        let inc = m.nonlinear_increment(&a, &b, 0.1);
        for (x, y) in inc.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-15);
        }
        let tiny = [1e-30; 4];
        let inc = m.nonlinear_increment(&a, &tiny, 0.1);
        assert!((inc[1] + 3.0 * 0.09 * 1e-30).abs() < 1e-45);
    }
}
