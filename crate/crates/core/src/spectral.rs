//! Simultaneous eigen-analysis of `Δ` and `Ω`, the assumption checks and the
//! projector onto the distinguished mode pair.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Result, SsmError};
use crate::model::{CJet, JetCtx, Polynomial, PolyVectorField};

/// Condition number of the eigenvector matrix above which `Ω` counts as defective.
pub const MAX_CONDITION: f64 = 1e8;
/// Frequencies below this are treated as real eigenvalues.
pub const MIN_FREQUENCY: f64 = 1e-10;
/// Default non-resonance margin.
pub const DEFAULT_RES_MARGIN: f64 = 0.05;
/// Default cap on σ.
pub const DEFAULT_SIGMA_CAP: u32 = 12;
/// Number of points of the ε-grid on which ℵ is taken.
pub const ALEPH_GRID_POINTS: usize = 33;

const SNAP_TOL: f64 = 1e-12;

/// Eigen-data of `A_ε = εΔ + Ω`, with `λ_k(ε) = εα_k + iω_k`.
///
/// Eigenvalues are stored in conjugate pairs `(2p, 2p+1)` with `ω_{2p} > 0`,
/// pairs ordered by increasing frequency.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub alpha: Vec<f64>,
    pub omega: Vec<f64>,
    pub right: Vec<Vec<Complex64>>,
    pub left: Vec<Vec<Complex64>>,
    /// Index of the positive-frequency member of the distinguished pair.
    pub ell: usize,
    pub aleph: f64,
    pub sigma: u32,
    pub aleph_grid: Vec<f64>,
    pub condition: f64,
}

impl SpectralData {
    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn pairs(&self) -> usize {
        self.dim() / 2
    }

    pub fn lambda(&self, k: usize, eps: f64) -> Complex64 {
        Complex64::new(eps * self.alpha[k], self.omega[k])
    }

    pub fn lambda_jet(&self, k: usize, ctx: JetCtx) -> CJet {
        ctx.affine(Complex64::new(self.alpha[k], 0.0), Complex64::new(0.0, self.omega[k]))
    }

    /// `v_k*·x`.
    pub fn project(&self, k: usize, x: &[Complex64]) -> Complex64 {
        self.left[k].iter().zip(x).map(|(u, x)| u * x).sum()
    }

    /// `v_k*·x` for ε-polynomial vectors.
    pub fn project_jet(&self, k: usize, x: &[CJet]) -> CJet {
        let mut acc = x[0].zero_like();
        for (u, xi) in self.left[k].iter().zip(x) {
            acc += xi.mul_coeff(*u);
        }
        acc
    }

    /// Eigenvector matrix `T` (columns `v_k`).
    pub fn transform(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, k| self.right[k][i])
    }

    /// `T⁻¹` assembled from the left eigenvectors.
    pub fn inverse_transform(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |k, i| self.left[k][i])
    }

    /// `T Λ(ε) T⁻¹`.
    pub fn reconstruct(&self, eps: f64) -> DMatrix<Complex64> {
        let d = self.dim();
        let lam = DMatrix::from_fn(d, d, |i, j| if i == j { self.lambda(i, eps) } else { Complex64::new(0.0, 0.0) });
        self.transform() * lam * self.inverse_transform()
    }

    /// Indices not in the distinguished pair.
    pub fn others(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter(move |&k| k != self.ell && k != self.ell + 1)
    }
}

/// Null vector of a square matrix of rank `n − 1` by Gaussian elimination
/// with full pivoting.
fn null_vector(mut a: DMatrix<Complex64>) -> Vec<Complex64> {
    let n = a.nrows();
    let mut cols: Vec<usize> = (0..n).collect();
    for s in 0..n.saturating_sub(1) {
        let (mut pi, mut pj, mut best) = (s, s, -1.0);
        for i in s..n {
            for j in s..n {
                let m = a[(i, j)].norm();
                if m > best {
                    best = m;
                    pi = i;
                    pj = j;
                }
            }
        }
        a.swap_rows(s, pi);
        a.swap_columns(s, pj);
        cols.swap(s, pj);
        let piv = a[(s, s)];
        for i in s + 1..n {
            let f = a[(i, s)] / piv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in s..n {
                let v = a[(s, j)];
                a[(i, j)] -= f * v;
            }
        }
    }
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    y[n - 1] = Complex64::new(1.0, 0.0);
    for i in (0..n - 1).rev() {
        let mut s = Complex64::new(0.0, 0.0);
        for j in i + 1..n {
            s += a[(i, j)] * y[j];
        }
        y[i] = -s / a[(i, i)];
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for (p, &c) in cols.iter().enumerate() {
        x[c] = y[p];
    }
    x
}

/// Scales so the first component of (near-)maximal modulus is real positive,
/// then to unit Euclidean norm.
fn fix_scale(v: &mut [Complex64]) {
    let max = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let pivot = *v.iter().find(|c| c.norm() >= (1.0 - 1e-9) * max).unwrap();
    for c in v.iter_mut() {
        *c /= pivot;
    }
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    for c in v.iter_mut() {
        *c /= norm;
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP_TOL * x.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Eigen-analysis with the default choice of the distinguished pair.
pub fn analyze(model: &PolyVectorField, sigma_cap: u32) -> Result<SpectralData> {
    analyze_with(model, sigma_cap, None)
}

/// Eigen-analysis; `ell_hint` selects the distinguished pair by its index in
/// order of increasing frequency.
pub fn analyze_with(model: &PolyVectorField, sigma_cap: u32, ell_hint: Option<usize>) -> Result<SpectralData> {
    let d = model.dim();
    let eig = model.omega.clone().complex_eigenvalues();
    let mut freqs: Vec<f64> = eig.iter().map(|l| l.im).collect();
    if let Some(w) = freqs.iter().find(|w| w.abs() < MIN_FREQUENCY) {
        return Err(SsmError::RealEigenvalue(format!("Ω has an eigenvalue with |Im λ| = {:.3e}", w.abs())));
    }
    let scale = model.omega.amax().max(1.0);
    freqs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut positive: Vec<f64> = freqs.iter().copied().filter(|w| *w > 0.0).collect();
    positive.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if positive.len() * 2 != d {
        return Err(SsmError::NotDiagonalizable("eigenvalues of Ω are not in conjugate pairs".into()));
    }
    for w in positive.windows(2) {
        if (w[1] - w[0]).abs() < 1e-8 * scale {
            return Err(SsmError::NotDiagonalizable(format!("repeated frequency {:.6}", w[0])));
        }
    }

    let omega_c = model.omega.map(|x| Complex64::new(x, 0.0));
    let mut omega = Vec::with_capacity(d);
    let mut right = Vec::with_capacity(d);
    let mut left = Vec::with_capacity(d);
    for &w in &positive {
        let w = snap(w);
        let lam = Complex64::new(0.0, w);
        let shifted = &omega_c - DMatrix::from_diagonal_element(d, d, lam);
        let mut v = null_vector(shifted.clone());
        fix_scale(&mut v);
        let mut u = null_vector(shifted.transpose());
        let dot: Complex64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        for c in u.iter_mut() {
            *c /= dot;
        }
        omega.push(w);
        omega.push(-w);
        right.push(v.clone());
        right.push(v.iter().map(|c| c.conj()).collect());
        left.push(u.clone());
        left.push(u.iter().map(|c| c.conj()).collect());
    }

    let tmat = DMatrix::from_fn(d, d, |i, k| right[k][i]);
    let sv = tmat.singular_values();
    let smin = sv.min();
    let condition = if smin > 0.0 { sv.max() / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(SsmError::NotDiagonalizable(format!("eigenvector condition number {condition:.3e}")));
    }

    let delta_c = model.delta.map(|x| Complex64::new(x, 0.0));
    let mut alpha = Vec::with_capacity(d);
    let dscale = model.delta.amax().max(1e-300);
    for k in 0..d {
        let dv = &delta_c * DMatrix::from_column_slice(d, 1, &right[k]);
        for j in 0..d {
            let c: Complex64 = left[j].iter().zip(dv.iter()).map(|(a, b)| a * b).sum();
            if j == k {
                if c.im.abs() > 1e-8 * dscale {
                    return Err(SsmError::NotDiagonalizable(format!("Δ has complex eigenvalue on mode {k}")));
                }
                alpha.push(snap(c.re));
            } else if c.norm() > 1e-8 * dscale {
                return Err(SsmError::NotDiagonalizable(format!(
                    "Δ is not diagonal in the eigenbasis of Ω (entry ({j},{k}) = {:.3e})",
                    c.norm()
                )));
            }
        }
    }

    let pairs = d / 2;
    let ell = match ell_hint {
        Some(p) if p >= pairs => {
            return Err(SsmError::Selection(format!("pair index {p} out of range (0..{pairs})")));
        }
        Some(p) => 2 * p,
        None => (0..pairs)
            .map(|p| 2 * p)
            .find(|&k| alpha[k] == -1.0 && omega[k] == 1.0)
            .unwrap_or(0),
    };

    let aleph_grid: Vec<f64> =
        (0..ALEPH_GRID_POINTS).map(|i| model.eps_max * i as f64 / (ALEPH_GRID_POINTS - 1) as f64).collect();
    let mut aleph = 0.0f64;
    if alpha[ell] != 0.0 {
        for k in (0..d).filter(|&k| k != ell && k != ell + 1) {
            for &eps in aleph_grid.iter().filter(|e| **e > 0.0) {
                aleph = aleph.max((eps * alpha[k]) / (eps * alpha[ell]));
            }
        }
    }
    let sigma = 2u32.max(aleph.floor() as u32 + 1);
    if sigma > sigma_cap {
        return Err(SsmError::NoSpectralGap(format!("σ = {sigma} exceeds the cap {sigma_cap} (ℵ = {aleph})")));
    }

    Ok(SpectralData { alpha, omega, right, left, ell, aleph, sigma, aleph_grid, condition })
}

/// Outcome of one numbered assumption.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: Option<f64>,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub condition_number: f64,
    pub commutator_norm: f64,
    pub reconstruction_error: f64,
    pub resonance_margin: Option<f64>,
    pub aleph: f64,
    pub sigma: u32,
    pub eps_grid: Vec<f64>,
    pub conservation_residual: Option<f64>,
    pub hessian_min_eigenvalue: Option<f64>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let m = c.measured.map_or("-".to_string(), |v| format!("{v:.6e}"));
            s.push_str(&format!(
                "[{}] {} {:<28} measured {:>14}  {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.id,
                c.name,
                m,
                c.detail
            ));
        }
        s.push_str(&format!("aleph = {}, sigma = {}\n", self.aleph, self.sigma));
        s
    }
}

/// Checks assumptions 1–7 on a model and its eigen-data.
pub fn check_assumptions(
    model: &PolyVectorField,
    spec: &SpectralData,
    eps_grid: &[f64],
    res_margin: f64,
) -> AssumptionReport {
    check_assumptions_seeded(model, spec, eps_grid, res_margin, 0)
}

/// [`check_assumptions`] with an explicit seed for the sampled checks.
pub fn check_assumptions_seeded(
    model: &PolyVectorField,
    spec: &SpectralData,
    eps_grid: &[f64],
    res_margin: f64,
    seed: u64,
) -> AssumptionReport {
    let d = model.dim();
    let mut checks = Vec::new();

    checks.push(AssumptionCheck {
        id: 1,
        name: "diagonalizable",
        passed: spec.condition <= MAX_CONDITION,
        measured: Some(spec.condition),
        detail: format!("eigenvector condition number, limit {MAX_CONDITION:e}"),
    });

    let comm = &model.delta * &model.omega - &model.omega * &model.delta;
    let commutator_norm = comm.amax();
    let mut recon = 0.0f64;
    for &eps in eps_grid {
        let a = model.linear_part(eps).map(|x| Complex64::new(x, 0.0));
        let diff = spec.reconstruct(eps) - a;
        recon = recon.max(diff.iter().map(|c| c.norm()).fold(0.0, f64::max));
    }
    let pairs_ok = (0..spec.pairs()).all(|p| {
        let (a, b) = (2 * p, 2 * p + 1);
        spec.omega[a] > 0.0
            && spec.omega[b] == -spec.omega[a]
            && spec.alpha[a] == spec.alpha[b]
            && spec.right[a].iter().zip(&spec.right[b]).all(|(x, y)| *y == x.conj())
    });
    let scale = model.delta.amax() * model.eps_max + model.omega.amax();
    checks.push(AssumptionCheck {
        id: 2,
        name: "conjugate pairs, Re λ = εα",
        passed: pairs_ok && recon <= 1e-10 * scale.max(1.0),
        measured: Some(recon),
        detail: format!("max |TΛT⁻¹ − A_ε| over the ε-grid, commutator {commutator_norm:.3e}"),
    });

    let (al, wl) = (spec.alpha[spec.ell], spec.omega[spec.ell]);
    let norm_err = (al + 1.0).abs().max((wl - 1.0).abs());
    checks.push(AssumptionCheck {
        id: 3,
        name: "distinguished pair normalized",
        passed: norm_err <= SNAP_TOL,
        measured: Some(norm_err),
        detail: format!("λ_ℓ = {al}ε + {wl}i"),
    });

    checks.push(AssumptionCheck {
        id: 4,
        name: "spectral gap ℵ < σ",
        passed: spec.aleph < spec.sigma as f64,
        measured: Some(spec.aleph),
        detail: format!("σ = {}", spec.sigma),
    });

    let (conservation_residual, hessian_min_eigenvalue) = match &model.conserved {
        None => {
            for (id, name) in [(5, "conserved quantity"), (6, "definite Hessian")] {
                checks.push(AssumptionCheck {
                    id,
                    name,
                    passed: false,
                    measured: None,
                    detail: "model has no conserved quantity".into(),
                });
            }
            (None, None)
        }
        Some(c) => {
            let (res, sampled) = conservation_defect(model, c, seed);
            let cscale = c.max_abs_coefficient().max(1e-300);
            checks.push(AssumptionCheck {
                id: 5,
                name: "conserved quantity",
                passed: res <= 1e-12 * cscale && sampled <= 1e-12,
                measured: Some(res),
                detail: format!("max coefficient of Dc·f₀, sampled relative defect {sampled:.3e}"),
            });
            let h = c.hessian_at_origin();
            let v = &spec.right[spec.ell];
            let cols = [v.iter().map(|z| z.re).collect::<Vec<_>>(), v.iter().map(|z| z.im).collect()];
            let mut m = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    for i in 0..d {
                        for j in 0..d {
                            m[a][b] += cols[a][i] * h[i][j] * cols[b][j];
                        }
                    }
                }
            }
            let tr = 0.5 * (m[0][0] + m[1][1]);
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let min_eig = tr - (tr * tr - det).max(0.0).sqrt();
            checks.push(AssumptionCheck {
                id: 6,
                name: "definite Hessian",
                passed: min_eig > 0.0,
                measured: Some(min_eig),
                detail: "min eigenvalue of the restricted Hessian of c".into(),
            });
            (Some(res), Some(min_eig))
        }
    };

    let wl = spec.omega[spec.ell];
    let margin = spec
        .others()
        .map(|j| {
            let w = spec.omega[j] / wl;
            (w - w.round()).abs()
        })
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
    checks.push(AssumptionCheck {
        id: 7,
        name: "non-resonance",
        passed: margin.map_or(true, |m| m >= res_margin),
        measured: margin,
        detail: format!("min distance of ω_j/ω_ℓ to ℤ, required ≥ {res_margin}"),
    });

    AssumptionReport {
        checks,
        condition_number: spec.condition,
        commutator_norm,
        reconstruction_error: recon,
        resonance_margin: margin,
        aleph: spec.aleph,
        sigma: spec.sigma,
        eps_grid: eps_grid.to_vec(),
        conservation_residual,
        hessian_min_eigenvalue,
    }
}

/// Coefficient-wise defect of `Dc·(Ωx + N₀(x))` and its largest relative
/// sampled value.
fn conservation_defect(model: &PolyVectorField, c: &Polynomial, seed: u64) -> (f64, f64) {
    let f = model.conservative_field_polynomials();
    let grad = c.gradient();
    let mut identity = Polynomial::zero(model.dim());
    for (g, fi) in grad.iter().zip(&f) {
        identity = identity.add(&g.mul(fi));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..16 {
        let x: Vec<f64> = (0..model.dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let fx = model.eval_field(&x, 0.0);
        let gx: Vec<f64> = grad.iter().map(|g| g.eval(&x)).collect();
        let dot: f64 = gx.iter().zip(&fx).map(|(a, b)| a * b).sum();
        let scale: f64 = gx.iter().zip(&fx).map(|(a, b)| (a * b).abs()).sum::<f64>().max(1e-300);
        worst = worst.max(dot.abs() / scale);
    }
    (identity.max_abs_coefficient(), worst)
}

/// The real weight `W*(θ) = (4π)⁻¹(v_ℓ* e^{−iθ} + v_{ℓ+1}* e^{iθ})`.
#[derive(Clone, Debug)]
pub struct WStarProjector {
    pub v_star: Vec<Complex64>,
    pub v_star_conj: Vec<Complex64>,
}

impl WStarProjector {
    pub fn value(&self, theta: f64) -> Vec<Complex64> {
        let e = Complex64::from_polar(1.0, theta);
        let c = 1.0 / (4.0 * std::f64::consts::PI);
        self.v_star
            .iter()
            .zip(&self.v_star_conj)
            .map(|(a, b)| (a * e.conj() + b * e) * c)
            .collect()
    }

    /// `∫ W*·f dθ` for `f` with first Fourier coefficient `f₁`.
    pub fn growth(&self, f1: &[Complex64]) -> f64 {
        self.dot(f1).re
    }

    /// `∫ DW*·f dθ` for `f` with first Fourier coefficient `f₁`.
    pub fn phase(&self, f1: &[Complex64]) -> f64 {
        self.dot(f1).im
    }

    fn dot(&self, f1: &[Complex64]) -> Complex64 {
        self.v_star.iter().zip(f1).map(|(a, b)| a * b).sum()
    }
}

pub fn make_wstar(spec: &SpectralData) -> Result<WStarProjector> {
    let p = WStarProjector { v_star: spec.left[spec.ell].clone(), v_star_conj: spec.left[spec.ell + 1].clone() };
    for i in 0..64 {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / 64.0;
        let worst = p.value(theta).iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if worst >= 1e-12 {
            return Err(SsmError::NotReal(format!("Im W*({theta:.3}) = {worst:.3e}")));
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference() -> PolyVectorField {
        PolyVectorField::from_json(include_str!("../../../models/duffing_pair.json")).unwrap()
    }

    fn with_delta(m: &PolyVectorField, diag: &[f64]) -> PolyVectorField {
        let mut m = m.clone();
        m.delta = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(diag));
        m
    }

    #[test]
    fn reference_spectrum() {
        let m = with_delta(&reference(), &[-0.5, -0.5, -1.5, -1.5]);
        let s = analyze(&m, DEFAULT_SIGMA_CAP).unwrap();
        assert_eq!(s.alpha, vec![-0.5, -0.5, -1.5, -1.5]);
        assert_eq!(s.omega[..2], [1.0, -1.0]);
        assert!((s.omega[2] - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(s.aleph, 3.0);
        assert_eq!(s.sigma, 4);
    }

    #[test]
    fn biorthogonal_and_reconstructs() {
        let m = reference();
        let s = analyze(&m, DEFAULT_SIGMA_CAP).unwrap();
        for j in 0..4 {
            for k in 0..4 {
                let p = s.project(j, &s.right[k]);
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((p - Complex64::new(expect, 0.0)).norm() < 1e-10);
            }
        }
        for eps in [0.0, 0.25, 0.5] {
            let diff = s.reconstruct(eps) - m.linear_part(eps).map(|x| Complex64::new(x, 0.0));
            assert!(diff.iter().all(|c| c.norm() < 1e-10));
        }
    }

    #[test]
    fn uniform_damping_gives_sigma_two() {
        let m = with_delta(&reference(), &[-1.0; 4]);
        let s = analyze(&m, DEFAULT_SIGMA_CAP).unwrap();
        assert_eq!(s.aleph, 1.0);
        assert_eq!(s.sigma, 2);
        assert!(matches!(analyze(&reference(), 3), Err(SsmError::NoSpectralGap(_))));
    }

    #[test]
    fn real_and_defective_spectra_rejected() {
        let mut m = reference();
        m.omega[(3, 2)] = 2.0;
        m.delta = DMatrix::zeros(4, 4);
        assert!(matches!(analyze(&m, 12), Err(SsmError::RealEigenvalue(_))));
        let mut m = reference();
        m.omega[(3, 2)] = -1.0;
        m.delta = DMatrix::zeros(4, 4);
        assert!(matches!(analyze(&m, 12), Err(SsmError::NotDiagonalizable(_))));
    }

    #[test]
    fn reference_assumptions_pass() {
        let m = reference();
        let s = analyze(&m, DEFAULT_SIGMA_CAP).unwrap();
        let grid: Vec<f64> = (0..6).map(|i| 0.1 * i as f64).collect();
        let r = check_assumptions(&m, &s, &grid, 0.1);
        assert!(r.passed(), "{}", r.render());
        assert!((r.resonance_margin.unwrap() - (2f64.sqrt() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn perturbed_conserved_quantity_fails() {
        let mut m = reference();
        let c = m.conserved.as_mut().unwrap();
        c.add_term(&[4, 0, 0, 0], 0.05);
        let s = analyze(&m, DEFAULT_SIGMA_CAP).unwrap();
        let r = check_assumptions(&m, &s, &[0.0], 0.1);
        assert!(!r.checks[4].passed);
        assert!(r.checks[4].measured.unwrap() > 0.0);

        let mut m = reference();
        m.conserved = Some(m.conserved.unwrap().scale(-1.0));
        let r = check_assumptions(&m, &s, &[0.0], 0.1);
        assert!(r.checks[4].passed);
        assert!(!r.checks[5].passed);
    }

    #[test]
    fn integer_frequency_violates_non_resonance() {
        let mut m = reference();
        m.omega[(3, 2)] = -4.0;
        m.conserved = None;
        let s = analyze(&m, DEFAULT_SIGMA_CAP).unwrap();
        assert_eq!(s.omega[2], 2.0);
        let r = check_assumptions(&m, &s, &[0.0], 0.05);
        assert!(!r.checks[6].passed);
    }

    #[test]
    fn projector_functionals() {
        let s = analyze(&reference(), DEFAULT_SIGMA_CAP).unwrap();
        let p = make_wstar(&s).unwrap();
        let v = &s.right[s.ell];
        assert!((p.growth(v) - 1.0).abs() < 1e-15);
        assert!(p.phase(v).abs() < 1e-15);
        let iv: Vec<Complex64> = v.iter().map(|z| z * Complex64::i()).collect();
        assert!(p.growth(&iv).abs() < 1e-15);
        assert!((p.phase(&iv) - 1.0).abs() < 1e-15);
    }
}
