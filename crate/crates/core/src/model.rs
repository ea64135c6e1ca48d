//! Closed-form physics of a feedback-damped levitated mode.
//!
//! A mode is a damped harmonic oscillator driven by white thermal force noise.
//! Velocity feedback adds a damping rate `gamma_fb` on top of the intrinsic rate
//! `Γ0 = ω0/Q` without adding fluctuations, so the displacement PSD is
//!
//! ```text
//! S_x(ω) = (4 kB T Γ0 / m) / ((ω0² − ω²)² + ω² (Γ0 + Γ_FB)²)
//! ```
//!
//! Rotational modes use the moment of inertia in place of the mass and radians
//! in place of metres; every function below is shared between the two kinds.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::error::{check, non_negative, positive, Error, Result};

/// Degree of freedom of the levitated magnet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    X,
    Y,
    Z,
    Alpha,
    Beta,
    Gamma,
}

impl ModeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeLabel::X => "x",
            ModeLabel::Y => "y",
            ModeLabel::Z => "z",
            ModeLabel::Alpha => "alpha",
            ModeLabel::Beta => "beta",
            ModeLabel::Gamma => "gamma",
        }
    }

    /// Frequency ordering predicted by the analytical trap models,
    /// low to high: γ, z, y, x, β, α.
    pub const FREQUENCY_ORDER: [ModeLabel; 6] = [
        ModeLabel::Gamma,
        ModeLabel::Z,
        ModeLabel::Y,
        ModeLabel::X,
        ModeLabel::Beta,
        ModeLabel::Alpha,
    ];

    pub fn natural_kind(self) -> ModeKind {
        match self {
            ModeLabel::X | ModeLabel::Y | ModeLabel::Z => ModeKind::Translational,
            _ => ModeKind::Rotational,
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "x" => ModeLabel::X,
            "y" => ModeLabel::Y,
            "z" => ModeLabel::Z,
            "alpha" => ModeLabel::Alpha,
            "beta" => ModeLabel::Beta,
            "gamma" => ModeLabel::Gamma,
            _ => return Err(Error::UnknownMode(s.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeKind {
    Translational,
    Rotational,
}

/// One mechanical mode of the levitated magnet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    /// kg
    #[serde(rename = "mass_kg")]
    pub mass: f64,
    /// Hz
    #[serde(rename = "f0_hz")]
    pub f0: f64,
    pub q_factor: f64,
    /// Effective environment temperature, K.
    #[serde(rename = "t_env_k")]
    pub t_env: f64,
    pub label: ModeLabel,
    pub kind: ModeKind,
    /// kg·m², required for rotational modes.
    #[serde(rename = "inertia_kg_m2", default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
}

/// Mass of the levitated magnet and glass sphere as quoted with the setup, kg.
pub const MASS_SETUP_KG: f64 = 0.35e-6;
/// Alternative mass quoted with the conclusions, kg.
pub const MASS_ALTERNATIVE_KG: f64 = 0.38e-6;

/// Uncooled effective temperature of mode 3, back-derived from the minimum
/// temperature of 0.65 mK at 1 pm/√Hz detection noise.
pub const T_ENV_MODE3_K: f64 = 1.97;
/// Uncooled effective temperature of mode 4, back-derived from 1.9 mK.
pub const T_ENV_MODE4_K: f64 = 10.05;

impl ModeParams {
    pub fn translational(label: ModeLabel, mass: f64, f0: f64, q_factor: f64, t_env: f64) -> Self {
        ModeParams {
            mass,
            f0,
            q_factor,
            t_env,
            label,
            kind: ModeKind::Translational,
            inertia: None,
        }
    }

    pub fn rotational(
        label: ModeLabel,
        mass: f64,
        inertia: f64,
        f0: f64,
        q_factor: f64,
        t_env: f64,
    ) -> Self {
        ModeParams {
            mass,
            f0,
            q_factor,
            t_env,
            label,
            kind: ModeKind::Rotational,
            inertia: Some(inertia),
        }
    }

    /// Mode 3 (y): 50.59 Hz, Q = 3.8e6, calibrated uncooled temperature.
    pub fn mode3() -> Self {
        Self::translational(ModeLabel::Y, MASS_SETUP_KG, 50.59, 3.8e6, T_ENV_MODE3_K)
    }

    /// Mode 4 (x): 67.98 Hz, Q = 5.5e6, calibrated uncooled temperature.
    pub fn mode4() -> Self {
        Self::translational(ModeLabel::X, MASS_SETUP_KG, 67.98, 5.5e6, T_ENV_MODE4_K)
    }

    pub fn with_t_env(mut self, t_env: f64) -> Self {
        self.t_env = t_env;
        self
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_q(mut self, q_factor: f64) -> Self {
        self.q_factor = q_factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("f0", self.f0)?;
        positive("q_factor", self.q_factor)?;
        positive("t_env", self.t_env)?;
        match (self.kind, self.inertia) {
            (ModeKind::Rotational, None) => Err(Error::MissingInertia(self.label.to_string())),
            (_, Some(i)) => positive("inertia", i),
            _ => Ok(()),
        }
    }

    /// Mass for translational modes, moment of inertia for rotational ones.
    pub fn effective_inertia(&self) -> Result<f64> {
        match self.kind {
            ModeKind::Translational => Ok(self.mass),
            ModeKind::Rotational => self
                .inertia
                .ok_or_else(|| Error::MissingInertia(self.label.to_string())),
        }
    }

    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.f0
    }

    /// Intrinsic damping rate Γ0 = ω0/Q, 1/s.
    pub fn gamma0(&self) -> f64 {
        self.omega0() / self.q_factor
    }

    /// Spring constant k = m ω0² (N/m, or N·m/rad for rotational modes).
    pub fn spring_constant(&self) -> Result<f64> {
        Ok(self.effective_inertia()? * self.omega0().powi(2))
    }

    /// Damping coefficient γ0 = m Γ0, kg/s.
    pub fn damping_coefficient(&self) -> Result<f64> {
        Ok(self.effective_inertia()? * self.gamma0())
    }

    /// Same mode at a lowered (surrogate) Q. The environment temperature is kept,
    /// so the force noise scales as 1/Q and the mode temperature is preserved.
    pub fn with_surrogate_q(&self, q_factor: f64) -> Self {
        self.clone().with_q(q_factor)
    }

    /// Thermal RMS displacement at the environment temperature.
    pub fn thermal_rms(&self) -> Result<f64> {
        rms_from_temperature(self.t_env, self)
    }
}

/// Limits on cooling set by force noise and detection noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingLimits {
    /// Thermal force PSD, N²/Hz.
    pub s_f: f64,
    /// Detection position noise PSD, m²/Hz.
    pub s_x_det: f64,
    pub t_min: f64,
    pub n_ph_min: f64,
    pub x_zpm: f64,
}

/// Displacement PSD of a feedback-damped mode at frequency `f`, m²/Hz.
pub fn lorentzian_psd(mode: &ModeParams, gamma_fb: f64, f: f64) -> Result<f64> {
    mode.validate()?;
    non_negative("gamma_fb", gamma_fb)?;
    non_negative("f", f)?;
    let inertia = mode.effective_inertia()?;
    Ok(lorentzian_unchecked(
        mode.omega0(),
        mode.gamma0(),
        gamma_fb,
        4.0 * K_B * mode.t_env * mode.gamma0() / inertia,
        f,
    ))
}

/// `numerator / ((ω0² − ω²)² + ω² (Γ0 + Γ_FB)²)` with ω = 2πf.
pub(crate) fn lorentzian_unchecked(omega0: f64, gamma0: f64, gamma_fb: f64, numerator: f64, f: f64) -> f64 {
    let w = 2.0 * PI * f;
    let detuning = omega0 * omega0 - w * w;
    let gamma = gamma0 + gamma_fb;
    numerator / (detuning * detuning + w * w * gamma * gamma)
}

/// Thermal force PSD S_F = 4 kB T m ω0 / Q (torque PSD with I for rotational modes).
pub fn thermal_force_psd(mode: &ModeParams) -> Result<f64> {
    mode.validate()?;
    let inertia = mode.effective_inertia()?;
    Ok(4.0 * K_B * mode.t_env * inertia * mode.omega0() / mode.q_factor)
}

/// Environment temperature implied by a force PSD, T = S_F Q / (4 kB m ω0).
///
/// Inverse of [`thermal_force_psd`]; a surrogate Q with S_F rescaled by the
/// same factor leaves this temperature unchanged.
pub fn temperature_from_force_psd(mode: &ModeParams, s_f: f64) -> Result<f64> {
    non_negative("s_f", s_f)?;
    let inertia = mode.effective_inertia()?;
    Ok(s_f * mode.q_factor / (4.0 * K_B * inertia * mode.omega0()))
}

/// Mode temperature under feedback, T Γ0 / (Γ0 + Γ_FB).
pub fn analytic_mode_temperature(mode: &ModeParams, gamma_fb: f64) -> Result<f64> {
    mode.validate()?;
    non_negative("gamma_fb", gamma_fb)?;
    let g0 = mode.gamma0();
    Ok(mode.t_env * g0 / (g0 + gamma_fb))
}

/// Phonon occupation N = kB T / (ħ ω0).
pub fn phonon_number(t_mode: f64, f0: f64) -> Result<f64> {
    positive("t_mode", t_mode)?;
    positive("f0", f0)?;
    Ok(K_B * t_mode / (HBAR * 2.0 * PI * f0))
}

/// Temperature of a single phonon, ħ ω0 / kB.
pub fn single_phonon_temperature(f0: f64) -> Result<f64> {
    positive("f0", f0)?;
    Ok(HBAR * 2.0 * PI * f0 / K_B)
}

/// Minimum reachable mode temperature with force noise from `mode` and white
/// detection noise `s_x_det` (m²/Hz): T_min = (ω0 / 2kB) √(S_F S_x,det).
pub fn min_temperature(mode: &ModeParams, s_x_det: f64) -> Result<CoolingLimits> {
    positive("s_x_det", s_x_det)?;
    let s_f = thermal_force_psd(mode)?;
    let t_min = mode.omega0() / (2.0 * K_B) * (s_f * s_x_det).sqrt();
    Ok(CoolingLimits {
        s_f,
        s_x_det,
        t_min,
        n_ph_min: phonon_number(t_min, mode.f0)?,
        x_zpm: zero_point_motion(mode)?,
    })
}

/// Environment temperature for which [`min_temperature`] returns `t_min`.
/// Used to back-derive uncooled temperatures from reported cooling limits.
pub fn t_env_for_min_temperature(mode: &ModeParams, t_min: f64, s_x_det: f64) -> Result<f64> {
    positive("t_min", t_min)?;
    positive("s_x_det", s_x_det)?;
    let inertia = mode.effective_inertia()?;
    Ok(t_min * t_min * K_B * mode.q_factor / (mode.omega0().powi(3) * inertia * s_x_det))
}

/// Ground-state RMS displacement √(ħ / 2 m ω0).
pub fn zero_point_motion(mode: &ModeParams) -> Result<f64> {
    mode.validate()?;
    Ok((HBAR / (2.0 * mode.effective_inertia()? * mode.omega0())).sqrt())
}

/// Equipartition amplitude √(kB T / k).
pub fn rms_from_temperature(t_mode: f64, mode: &ModeParams) -> Result<f64> {
    check("t_mode", t_mode, |t| t > 0.0, "> 0")?;
    mode.validate()?;
    Ok((K_B * t_mode / mode.spring_constant()?).sqrt())
}

/// Temperature of a mode with RMS amplitude `a_rms`, k a² / kB.
pub fn temperature_from_rms(a_rms: f64, mode: &ModeParams) -> Result<f64> {
    non_negative("a_rms", a_rms)?;
    Ok(mode.spring_constant()? * a_rms * a_rms / K_B)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn derived_quantities_round_trip() {
        let m = ModeParams::mode3();
        let k = m.spring_constant().unwrap();
        assert_relative_eq!(k, m.mass * m.omega0().powi(2), max_relative = 1e-15);
        let q_back = m.omega0() / m.gamma0();
        assert!(rel(q_back, m.q_factor) < 1e-12);
        let gamma_coeff = m.damping_coefficient().unwrap();
        assert_relative_eq!(gamma_coeff / m.mass, m.gamma0(), max_relative = 1e-15);
    }

    #[test]
    fn rejects_bad_params() {
        let mut m = ModeParams::mode3();
        m.mass = -1.0;
        assert!(m.validate().is_err());
        let m = ModeParams::mode3().with_t_env(f64::NAN);
        assert!(lorentzian_psd(&m, 0.0, 50.0).is_err());
        assert!(lorentzian_psd(&ModeParams::mode3(), -1.0, 50.0).is_err());
        assert!(lorentzian_psd(&ModeParams::mode3(), 0.0, f64::INFINITY).is_err());
        assert!(phonon_number(0.0, 50.0).is_err());
    }

    #[test]
    fn rotational_needs_inertia() {
        let mut m = ModeParams::rotational(ModeLabel::Alpha, 3.5e-7, 1e-14, 120.0, 1e6, 1.0);
        assert!(thermal_force_psd(&m).is_ok());
        m.inertia = None;
        assert!(matches!(thermal_force_psd(&m), Err(Error::MissingInertia(_))));
    }

    #[test]
    fn torque_noise_uses_inertia() {
        let m = ModeParams::rotational(ModeLabel::Beta, 3.5e-7, 2e-14, 90.0, 1e6, 1.0);
        let expected = 4.0 * K_B * 1.0 * 2e-14 * m.omega0() / 1e6;
        assert_relative_eq!(thermal_force_psd(&m).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn psd_at_resonance_simplifies() {
        let m = ModeParams::mode3();
        let s = lorentzian_psd(&m, 0.0, m.f0).unwrap();
        let expected = 4.0 * K_B * m.t_env * m.q_factor / (m.mass * m.omega0().powi(3));
        assert_relative_eq!(s, expected, max_relative = 1e-9);
    }

    #[test]
    fn psd_matches_high_precision_value() {
        // 50-digit evaluation of the PSD formula for mode 3 at T = 1.97 K.
        let m = ModeParams::mode3();
        let at_f0 = 3.677_827_951_656_405_5e-17;
        let at_50_6 = 1.629_324_354_571_727_2e-23;
        let at_100 = 3.013_428_970_481_743_5e-31;
        assert!(rel(lorentzian_psd(&m, 0.0, 50.59).unwrap(), at_f0) < 1e-9);
        assert!(rel(lorentzian_psd(&m, 0.0, 50.6).unwrap(), at_50_6) < 1e-7);
        assert!(rel(lorentzian_psd(&m, 0.0, 100.0).unwrap(), at_100) < 1e-9);
    }

    #[test]
    fn psd_rolls_off_as_inverse_fourth_power() {
        let m = ModeParams::mode3();
        let mut prev = f64::INFINITY;
        for i in 0..50 {
            let f = m.f0 * (10.0 + i as f64 * 4.0);
            let s = lorentzian_psd(&m, 0.0, f).unwrap();
            assert!(s < prev);
            prev = s;
        }
        let f = 100.0 * m.f0;
        let ratio = lorentzian_psd(&m, 0.0, f).unwrap() / lorentzian_psd(&m, 0.0, 2.0 * f).unwrap();
        assert!(rel(ratio, 16.0) < 1e-3);
    }

    #[test]
    fn force_psd_linear_in_temperature() {
        let m = ModeParams::mode3().with_t_env(0.02);
        let s1 = thermal_force_psd(&m).unwrap();
        let s2 = thermal_force_psd(&m.clone().with_t_env(0.04)).unwrap();
        assert_relative_eq!(s2, 2.0 * s1, max_relative = 1e-15);
        // plug-in value for T = 20 mK
        assert!(rel(s1, 3.23e-35) < 0.005, "{s1:e}");
        let s_inf = thermal_force_psd(&m.clone().with_q(1e30)).unwrap();
        assert!(s_inf < 1e-57);
    }

    #[test]
    fn surrogate_q_preserves_temperature() {
        let m = ModeParams::mode3();
        let sur = m.with_surrogate_q(1e3);
        let s_f = thermal_force_psd(&m).unwrap();
        let s_f_sur = thermal_force_psd(&sur).unwrap();
        assert_relative_eq!(s_f_sur / s_f, m.q_factor / 1e3, max_relative = 1e-12);
        assert_relative_eq!(temperature_from_force_psd(&m, s_f).unwrap(), m.t_env, max_relative = 1e-12);
        assert_relative_eq!(temperature_from_force_psd(&sur, s_f_sur).unwrap(), m.t_env, max_relative = 1e-12);
        assert_relative_eq!(
            analytic_mode_temperature(&sur, 0.0).unwrap(),
            analytic_mode_temperature(&m, 0.0).unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn mode_temperature_closed_form() {
        let m = ModeParams::mode3();
        assert_eq!(analytic_mode_temperature(&m, 0.0).unwrap(), m.t_env);
        assert_relative_eq!(analytic_mode_temperature(&m, m.gamma0()).unwrap(), m.t_env / 2.0, max_relative = 1e-15);
    }

    #[test]
    fn phonon_numbers_of_cooled_modes() {
        assert!(rel(phonon_number(7.1e-3, 50.59).unwrap(), 2.9e6) < 0.02);
        assert!(rel(phonon_number(6.6e-3, 67.98).unwrap(), 2.0e6) < 0.02);
        let t1 = single_phonon_temperature(50.59).unwrap();
        assert_relative_eq!(phonon_number(t1, 50.59).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn conclusion_limits() {
        let s_det = 1e-24;
        let m3 = ModeParams::mode3().with_t_env(0.02);
        let m4 = ModeParams::mode4().with_t_env(0.02);
        assert!(rel(min_temperature(&m3, s_det).unwrap().n_ph_min, 2.7e4) < 0.03);
        assert!(rel(min_temperature(&m4, s_det).unwrap().n_ph_min, 2.6e4) < 0.03);
        let e3 = ModeParams::mode3().with_t_env(2e-3).with_q(3.8e7);
        let e4 = ModeParams::mode4().with_t_env(2e-3).with_q(5.5e7);
        assert!(rel(min_temperature(&e3, 1e-28).unwrap().n_ph_min, 27.0) < 0.05);
        assert!(rel(min_temperature(&e4, 1e-28).unwrap().n_ph_min, 26.0) < 0.05);
    }

    #[test]
    fn calibrated_uncooled_temperatures() {
        let t3 = t_env_for_min_temperature(&ModeParams::mode3(), 0.65e-3, 1e-24).unwrap();
        let t4 = t_env_for_min_temperature(&ModeParams::mode4(), 1.9e-3, 1e-24).unwrap();
        assert!(rel(t3, T_ENV_MODE3_K) < 0.005, "{t3}");
        assert!(rel(t4, T_ENV_MODE4_K) < 0.005, "{t4}");
        let lim = min_temperature(&ModeParams::mode3(), 1e-24).unwrap();
        assert!(rel(lim.t_min, 0.65e-3) < 0.005);
        assert!(rel(lim.n_ph_min, 2.7e5) < 0.02);
    }

    #[test]
    fn limits_are_consistent() {
        let lim = min_temperature(&ModeParams::mode3(), 1e-24).unwrap();
        assert!(lim.s_f > 0.0 && lim.t_min > 0.0 && lim.n_ph_min > 0.0 && lim.x_zpm > 0.0);
        let n = K_B * lim.t_min / (HBAR * ModeParams::mode3().omega0());
        assert!(rel(lim.n_ph_min, n) < 1e-12);
        assert_eq!(phonon_number(lim.t_min, 50.59).unwrap(), lim.n_ph_min);
    }

    #[test]
    fn zero_point_scales() {
        let m = ModeParams::mode3();
        let x = zero_point_motion(&m).unwrap();
        assert!(rel(x, 0.7e-15) < 0.05, "{x:e}");
        let x4 = zero_point_motion(&m.clone().with_mass(4.0 * m.mass)).unwrap();
        assert_relative_eq!(x4, x / 2.0, max_relative = 1e-14);
        assert!(rel(single_phonon_temperature(50.59).unwrap(), 2.4e-9) < 0.05);
    }

    #[test]
    fn equipartition_amplitudes() {
        let a3 = rms_from_temperature(7.1e-3, &ModeParams::mode3()).unwrap();
        let a4 = rms_from_temperature(6.6e-3, &ModeParams::mode4()).unwrap();
        assert!(rel(a3, 1.6e-12) < 0.1, "{a3:e}");
        assert!(rel(a4, 1.2e-12) < 0.1, "{a4:e}");
        let a3x4 = rms_from_temperature(4.0 * 7.1e-3, &ModeParams::mode3()).unwrap();
        assert_relative_eq!(a3x4, 2.0 * a3, max_relative = 1e-14);
        let back = temperature_from_rms(a3, &ModeParams::mode3()).unwrap();
        assert_relative_eq!(back, 7.1e-3, max_relative = 1e-12);
    }

    #[test]
    fn label_order_and_parse() {
        assert_eq!("alpha".parse::<ModeLabel>().unwrap(), ModeLabel::Alpha);
        assert!("w".parse::<ModeLabel>().is_err());
        assert_eq!(ModeLabel::FREQUENCY_ORDER[2], ModeLabel::Y);
        assert_eq!(ModeLabel::Gamma.natural_kind(), ModeKind::Rotational);
    }
}
