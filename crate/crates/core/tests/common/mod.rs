//! Models and independent oracles shared by the integration tests.

#![allow(dead_code)]

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use ssm_core::model::PolyVectorField;
use ssm_core::spectral::{analyze, SpectralData};
use ssm_core::verify::{shoot_periodic, Dopri5};

pub const REFERENCE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/duffing_pair.json");
pub const LINEAR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/linear_pair.json");

pub fn load(path: &str) -> (PolyVectorField, SpectralData) {
    let m = PolyVectorField::from_json(&std::fs::read_to_string(path).unwrap()).unwrap();
    let s = analyze(&m, 12).unwrap();
    (m, s)
}

/// A conservative periodic orbit measured independently of the expansion.
#[derive(Clone, Copy, Debug)]
pub struct OrbitSample {
    /// `|v_ℓ*·c₁|` with `c₁` the first time-harmonic of the orbit.
    pub r: f64,
    pub frequency: f64,
}

/// Shoots the ε = 0 orbit with first-coordinate amplitude `amplitude` and
/// reads its radius from the first Fourier harmonic in time.
pub fn shoot_orbit(model: &PolyVectorField, spec: &SpectralData, amplitude: f64) -> OrbitSample {
    let mut seed = vec![0.0; model.dim()];
    seed[0] = amplitude;
    let guess = TAU / (1.0 + 0.375 * amplitude * amplitude);
    let orbit = shoot_periodic(model, 0.0, amplitude, &seed, guess).unwrap();
    let samples = 64;
    let times: Vec<f64> = (1..samples).map(|j| orbit.period * j as f64 / samples as f64).collect();
    let f = |_t: f64, y: &[f64], d: &mut [f64]| d.copy_from_slice(&model.eval_field(y, 0.0));
    let mut states = vec![orbit.x0.clone()];
    states.extend(Dopri5::default().integrate(f, 0.0, &orbit.x0, &times).unwrap());
    let mut c1 = vec![Complex64::new(0.0, 0.0); model.dim()];
    for (j, x) in states.iter().enumerate() {
        let w = Complex64::from_polar(1.0 / samples as f64, -TAU * j as f64 / samples as f64);
        for (c, xi) in c1.iter_mut().zip(x) {
            *c += w * xi;
        }
    }
    OrbitSample { r: spec.project(spec.ell, &c1).norm(), frequency: orbit.frequency }
}

/// First-coordinate amplitude of the linear orbit with radius `r`.
pub fn linear_amplitude(spec: &SpectralData, r: f64) -> f64 {
    2.0 * spec.right[spec.ell][0].norm() * r
}

/// `τ₂` from a least-squares fit `ω − 1 = a r² + b r⁴ + c r⁶` over orbits.
pub fn tau2_from_orbits(orbits: &[OrbitSample]) -> f64 {
    let a = DMatrix::from_fn(orbits.len(), 3, |i, j| orbits[i].r.powi(2 * j as i32 + 2));
    let b = DVector::from_iterator(orbits.len(), orbits.iter().map(|o| o.frequency - 1.0));
    let sol = a.svd(true, true).solve(&b, 1e-14).unwrap();
    2.0 * sol[0]
}

/// Pointwise `D₁W·R + D₂W·T − f(W)` of an expansion, sup over `n_theta` angles.
pub fn pointwise_residual(model: &PolyVectorField, exp: &ssm_core::expansion::ManifoldExpansion, r: f64, n_theta: usize) -> f64 {
    let eps = exp.eps();
    let (rr, tt) = (exp.eval_r(r, eps), exp.eval_t(r, eps));
    (0..n_theta)
        .map(|l| {
            let th = TAU * l as f64 / n_theta as f64;
            let (w, dr, dt) = (exp.eval(r, th, eps), exp.eval_dr(r, th, eps), exp.eval_dtheta(r, th, eps));
            let f = model.eval_field(&w, eps);
            (0..w.len()).map(|i| (dr[i] * rr + dt[i] * tt - f[i]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}
