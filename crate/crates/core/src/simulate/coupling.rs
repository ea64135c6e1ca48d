//! Parametric coupling of a mode to a low-frequency partner motion through the
//! nonlinearity of the trapping potential.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{check, positive, Error, Result};
use crate::model::ModeLabel;

/// Spring-constant modulation `k → k (1 + c · x_lf(t))` with
/// `x_lf(t) = A sin(2π f_p t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearCoupling {
    #[serde(rename = "partner_f_hz")]
    pub partner_f: f64,
    #[serde(rename = "partner_amplitude_m")]
    pub partner_amplitude: f64,
    /// Fractional spring-constant change per metre of partner displacement, 1/m.
    #[serde(rename = "coupling_coefficient_per_m")]
    pub coupling_coefficient: f64,
    /// Affected mode; all modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeLabel>,
}

impl NonlinearCoupling {
    /// Modulation depth |c · A|.
    pub fn depth(&self) -> f64 {
        (self.coupling_coefficient * self.partner_amplitude).abs()
    }

    pub fn validate(&self) -> Result<()> {
        positive("partner_f", self.partner_f)?;
        check("partner_amplitude", self.partner_amplitude, |_| true, "finite")?;
        check("coupling_coefficient", self.coupling_coefficient, |_| true, "finite")?;
        if self.depth() >= 0.1 {
            return Err(Error::NonPerturbative(self.depth()));
        }
        Ok(())
    }

    pub fn applies_to(&self, label: ModeLabel) -> bool {
        self.mode.is_none_or(|m| m == label)
    }

    /// Partner displacement at time `t`.
    #[inline]
    pub fn partner_displacement(&self, t: f64) -> f64 {
        self.partner_amplitude * (TAU * self.partner_f * t).sin()
    }

    /// Extra restoring force `−k c x_lf(t) x` on a mode with stiffness `k`.
    #[inline]
    pub fn force(&self, k: f64, x: f64, t: f64) -> f64 {
        -k * self.coupling_coefficient * self.partner_displacement(t) * x
    }
}

/// Coupling force samples for a position record `x` sampled at times `t`.
pub fn apply_coupling(x: &[f64], t: &[f64], spring_constant: f64, partner: &NonlinearCoupling) -> Result<Vec<f64>> {
    partner.validate()?;
    if x.len() != t.len() {
        return Err(Error::invalid("t", "time grid and position record differ in length"));
    }
    Ok(x.iter()
        .zip(t)
        .map(|(&xi, &ti)| partner.force(spring_constant, xi, ti))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partner(c: f64) -> NonlinearCoupling {
        NonlinearCoupling {
            partner_f: 0.92,
            partner_amplitude: 1e-6,
            coupling_coefficient: c,
            mode: None,
        }
    }

    #[test]
    fn rejects_non_perturbative() {
        assert!(matches!(partner(2e5).validate(), Err(Error::NonPerturbative(_))));
        assert!(partner(1e4).validate().is_ok());
    }

    #[test]
    fn product_of_tones_has_sum_and_difference() {
        let fs = 1000.0;
        let t: Vec<f64> = (0..4000).map(|i| i as f64 / fs).collect();
        let x: Vec<f64> = t.iter().map(|&ti| (TAU * 50.59 * ti).cos()).collect();
        let f = apply_coupling(&x, &t, 2.0, &partner(1e4)).unwrap();
        // -k c A sin(Ωt) cos(ω t) = -(kcA/2)[sin((ω+Ω)t) - sin((ω-Ω)t)]
        let amp = 2.0 * 1e4 * 1e-6 / 2.0;
        for (i, &ti) in t.iter().enumerate() {
            let expected = -amp * ((TAU * 51.51 * ti).sin() - (TAU * 49.67 * ti).sin());
            assert!((f[i] - expected).abs() < 1e-12);
        }
        assert!(apply_coupling(&x[..10], &t, 2.0, &partner(1e4)).is_err());
    }

    #[test]
    fn zero_coefficient_gives_zero_force() {
        let f = apply_coupling(&[1.0, 2.0], &[0.1, 0.2], 5.0, &partner(0.0)).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }
}
