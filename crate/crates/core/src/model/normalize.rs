//! Rescaling of time and ε so that the distinguished pair becomes `−ε ± i`.

use serde::Serialize;

use super::PolyVectorField;
use crate::error::{Result, SsmError};
use crate::spectral::analyze_with;

/// Factors applied by [`normalize_model`]: new time `t' = time_factor·t`,
/// new parameter `ε' = eps_factor·ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleReport {
    pub time_factor: f64,
    pub eps_factor: f64,
    /// Pair index of the distinguished mode.
    pub pair: usize,
}

/// Rescales the model so that `λ_ℓ(ε) = −ε + i`.
pub fn normalize_model(model: &PolyVectorField, ell_hint: Option<usize>) -> Result<(PolyVectorField, ScaleReport)> {
    let spec = analyze_with(model, u32::MAX, ell_hint)?;
    let (alpha, omega) = (spec.alpha[spec.ell], spec.omega[spec.ell]);
    if !(alpha < 0.0) {
        return Err(SsmError::DegenerateMode(format!(
            "damping slope of the selected pair is {alpha}, a negative value is required"
        )));
    }
    let kappa = -alpha / omega;
    let report = ScaleReport { time_factor: omega, eps_factor: kappa, pair: spec.ell / 2 };
    if omega == 1.0 && alpha == -1.0 {
        return Ok((model.clone(), report));
    }
    let mut out = model.clone();
    out.delta = &model.delta / -alpha;
    out.omega = &model.omega / omega;
    for t in &mut out.terms {
        t.coefficient /= omega * kappa.powi(t.eps_degree as i32);
    }
    out.eps_max = model.eps_max * kappa;
    out.validate()?;
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::analyze;
    use nalgebra::DMatrix;

    fn reference() -> PolyVectorField {
        PolyVectorField::from_json(include_str!("../../../../models/duffing_pair.json")).unwrap()
    }

    #[test]
    fn normalized_model_is_fixed() {
        let m = reference();
        let (n, r) = normalize_model(&m, None).unwrap();
        assert_eq!(n, m);
        assert_eq!((r.time_factor, r.eps_factor), (1.0, 1.0));
    }

    #[test]
    fn scales_damping_and_frequency() {
        let mut m = PolyVectorField::from_json(
            r#"{"nu": 1, "delta": [[-2,0],[0,-2]], "omega": [[0,3],[-3,0]], "eps_max": 1}"#,
        )
        .unwrap();
        let (n, r) = normalize_model(&m, None).unwrap();
        assert_eq!(r.time_factor, 3.0);
        assert!((r.eps_factor - 2.0 / 3.0).abs() < 1e-15);
        let s = analyze(&n, 12).unwrap();
        assert_eq!((s.alpha[0], s.omega[0]), (-1.0, 1.0));
        m.delta = DMatrix::zeros(2, 2);
        assert!(matches!(normalize_model(&m, None), Err(SsmError::DegenerateMode(_))));
        assert!(matches!(normalize_model(&m, Some(1)), Err(SsmError::Selection(_))));
    }

    #[test]
    fn frequency_ratio_preserved() {
        let mut m = reference();
        m.omega *= 5.0;
        let (n, _) = normalize_model(&m, None).unwrap();
        let s = analyze(&n, 12).unwrap();
        let s0 = analyze(&reference(), 12).unwrap();
        assert!((s.omega[2] / s.omega[0] - 2f64.sqrt()).abs() < 1e-12);
        assert!((s.aleph - s0.aleph).abs() < 1e-12);
    }
}
