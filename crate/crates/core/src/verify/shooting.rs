//! Periodic orbits of the full field by shooting.
//!
//! The first component of the initial point is fixed (the amplitude) and the
//! second is zero (a turning point of the first coordinate); the remaining
//! components and the period are found by Gauss–Newton on `φ_P(x₀) − x₀ = 0`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::ode::Dopri5;
use crate::error::{Result, SsmError};
use crate::model::PolyVectorField;

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicOrbit {
    pub x0: Vec<f64>,
    pub period: f64,
    pub frequency: f64,
    pub defect: f64,
}

fn defect(model: &PolyVectorField, eps: f64, x0: &[f64], period: f64) -> Result<Vec<f64>> {
    let f = |_t: f64, y: &[f64], d: &mut [f64]| d.copy_from_slice(&model.eval_field(y, eps));
    let x = Dopri5::default().integrate(f, 0.0, x0, &[period])?;
    Ok(x[0].iter().zip(x0).map(|(a, b)| a - b).collect())
}

/// Periodic orbit through `(amplitude, 0, x₂, …)` seeded by `seed` and
/// `period_seed`.
pub fn shoot_periodic(model: &PolyVectorField, eps: f64, amplitude: f64, seed: &[f64], period_seed: f64) -> Result<PeriodicOrbit> {
    let dim = model.dim();
    let free = dim - 2;
    let mut z: Vec<f64> = seed[2..].to_vec();
    z.push(period_seed);
    let point = |z: &[f64]| {
        let mut x = vec![amplitude, 0.0];
        x.extend_from_slice(&z[..free]);
        x
    };
    for _ in 0..30 {
        let f0 = defect(model, eps, &point(&z), z[free])?;
        let norm = f0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut jac = DMatrix::zeros(dim, free + 1);
        for j in 0..=free {
            let h = 1e-7 * z[j].abs().max(amplitude);
            let mut zp = z.clone();
            zp[j] += h;
            let fp = defect(model, eps, &point(&zp), zp[free])?;
            for i in 0..dim {
                jac[(i, j)] = (fp[i] - f0[i]) / h;
            }
        }
        let rhs = -(jac.transpose() * DVector::from_vec(f0));
        let step = (jac.transpose() * &jac)
            .lu()
            .solve(&rhs)
            .ok_or_else(|| SsmError::NoConvergence("singular shooting Jacobian".into()))?;
        for j in 0..=free {
            z[j] += step[j];
        }
        // Converged once the update is at the integrator's accuracy.
        if step[free].abs() < 1e-12 * z[free] && (0..free).all(|j| step[j].abs() < 1e-12 * amplitude) {
            let period = z[free];
            let defect = defect(model, eps, &point(&z), period)?.iter().map(|v| v * v).sum::<f64>().sqrt();
            return Ok(PeriodicOrbit { x0: point(&z), period, frequency: std::f64::consts::TAU / period, defect });
        }
        if norm == 0.0 {
            let period = z[free];
            return Ok(PeriodicOrbit { x0: point(&z), period, frequency: std::f64::consts::TAU / period, defect: 0.0 });
        }
    }
    Err(SsmError::NoConvergence(format!("shooting at amplitude {amplitude} did not converge")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_period_is_two_pi() {
        let m = PolyVectorField::from_json(include_str!("../../../../models/linear_pair.json")).unwrap();
        let o = shoot_periodic(&m, 0.0, 0.1, &[0.1, 0.0, 0.0, 0.0], 6.0).unwrap();
        assert!((o.period - std::f64::consts::TAU).abs() < 1e-9);
    }
}
