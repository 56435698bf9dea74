//! Adaptive Dormand–Prince 5(4) integrator.

use crate::error::{Result, SsmError};

pub const RTOL: f64 = 1e-11;
pub const ATOL: f64 = 1e-13;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B_LOW: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Dopri5 {
    fn default() -> Self {
        Self { rtol: RTOL, atol: ATOL, max_steps: 5_000_000 }
    }
}

impl Dopri5 {
    /// Integrates `ẏ = f(t, y)` from `t0` and returns the state at each of the
    /// increasing `times`, landing on them exactly.
    pub fn integrate<F>(&self, f: F, t0: f64, y0: &[f64], times: &[f64]) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let n = y0.len();
        let mut y = y0.to_vec();
        let mut t = t0;
        let mut k = vec![vec![0.0; n]; 7];
        let mut tmp = vec![0.0; n];
        let mut y_new = vec![0.0; n];
        f(t, &y, &mut k[0]);
        let scale0: f64 = (0..n).map(|i| (k[0][i] / (self.atol + self.rtol * y[i].abs())).powi(2)).sum::<f64>();
        let mut h = if scale0 > 0.0 { 0.01 / (scale0 / n as f64).sqrt() } else { 1e-3 };
        let mut out = Vec::with_capacity(times.len());
        let mut steps = 0;
        for &target in times {
            while t < target {
                steps += 1;
                if steps > self.max_steps {
                    return Err(SsmError::NoConvergence(format!("integrator exceeded {} steps", self.max_steps)));
                }
                let last = h >= target - t;
                let h_try = if last { target - t } else { h };
                for s in 1..7 {
                    for i in 0..n {
                        tmp[i] = y[i] + h_try * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
                    }
                    f(t + C[s] * h_try, &tmp, &mut k[s]);
                }
                let mut err = 0.0;
                let mut finite = true;
                for i in 0..n {
                    y_new[i] = y[i] + h_try * (0..7).map(|j| B[j] * k[j][i]).sum::<f64>();
                    let low = y[i] + h_try * (0..7).map(|j| B_LOW[j] * k[j][i]).sum::<f64>();
                    let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
                    err += ((y_new[i] - low) / sc).powi(2);
                    finite &= y_new[i].is_finite();
                }
                let err = (err / n as f64).sqrt();
                if finite && err <= 1.0 {
                    t = if last { target } else { t + h_try };
                    y.copy_from_slice(&y_new);
                    // First-same-as-last: stage 7 is f at the new point.
                    k.swap(0, 6);
                    let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                    if !last || factor < 1.0 {
                        h = h_try * factor;
                    }
                } else {
                    let factor = if finite { (0.9 * err.powf(-0.2)).clamp(0.2, 1.0) } else { 0.25 };
                    h = h_try * factor;
                    if h < 1e-14 * t.abs().max(1.0) {
                        return Err(SsmError::NoConvergence(format!("integrator step underflow at t = {t}")));
                    }
                }
            }
            out.push(y.clone());
        }
        Ok(out)
    }
}
