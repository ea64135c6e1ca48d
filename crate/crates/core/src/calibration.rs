//! Flux-to-motion calibration through the SQUID readout chain.
//!
//! A current injected through the calibration transformer both leaks straight
//! into the SQUID (crosstalk) and drives the particle through the pick-up coil.
//! Comparing the particle's ring-up with the crosstalk gives the energy
//! coupling β² between particle and pick-up circuit, and from it the flux
//! gradient dΦ/dx and the end-to-end sensitivity dV/dx.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::PHI_0;
use crate::error::{non_negative, positive, Error, Result};
use crate::model::ModeParams;
use crate::simulate::{self, DisturbanceTone, InitialState, SimConfig};

/// Inductances and SQUID gain of the flux readout circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    /// Pick-up coil, H.
    #[serde(rename = "l_pu_h")]
    pub l_pu: f64,
    /// Twisted pair, H.
    #[serde(rename = "l_tp_h")]
    pub l_tp: f64,
    /// SQUID input coil, H.
    #[serde(rename = "l_in_h")]
    pub l_in: f64,
    /// Calibration transformer, H.
    #[serde(rename = "l_cal_h")]
    pub l_cal: f64,
    /// Mutual inductance between input coil and SQUID, H.
    #[serde(rename = "m_in_sq_h")]
    pub m_in_sq: f64,
    /// SQUID gain, V per flux quantum.
    #[serde(rename = "v_per_phi0")]
    pub v_per_phi0: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self::paper()
    }
}

impl DetectionChain {
    /// Readout circuit of the reference setup: 1/M_in,SQ = 0.5 µA/Φ0 and a
    /// SQUID gain of 0.43 V/Φ0.
    pub fn paper() -> Self {
        DetectionChain {
            l_pu: 6.7e-7,
            l_tp: 1e-7,
            l_in: 1.8e-6,
            l_cal: 2e-9,
            m_in_sq: PHI_0 / 0.5e-6,
            v_per_phi0: 0.43,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("l_pu", self.l_pu)?;
        positive("l_tp", self.l_tp)?;
        positive("l_in", self.l_in)?;
        positive("l_cal", self.l_cal)?;
        positive("m_in_sq", self.m_in_sq)?;
        positive("v_per_phi0", self.v_per_phi0)
    }

    /// Inductance of the superconducting loop, H.
    pub fn l_total(&self) -> f64 {
        self.l_pu + self.l_tp + self.l_in + self.l_cal
    }

    /// SQUID flux-to-voltage gain dV/dΦ_SQ, V/Wb.
    pub fn volts_per_weber(&self) -> f64 {
        self.v_per_phi0 / PHI_0
    }

    /// Output voltage per ampere in the input coil, (dV/dΦ_SQ)·M_in,SQ, V/A.
    pub fn transimpedance(&self) -> f64 {
        self.volts_per_weber() * self.m_in_sq
    }
}

/// Raw numbers of one calibration drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveMeasurement {
    /// Steady crosstalk amplitude, V.
    #[serde(rename = "v_crosstalk_v")]
    pub v_crosstalk: f64,
    /// Growth of the particle signal amplitude during the drive, V.
    #[serde(rename = "delta_v_drive_v")]
    pub delta_v_drive: f64,
    #[serde(rename = "t_drive_s")]
    pub t_drive: f64,
    #[serde(rename = "f_drive_hz")]
    pub f_drive: f64,
}

impl DriveMeasurement {
    pub fn validate(&self) -> Result<()> {
        positive("v_crosstalk", self.v_crosstalk)?;
        non_negative("delta_v_drive", self.delta_v_drive)?;
        positive("t_drive", self.t_drive)?;
        positive("f_drive", self.f_drive)
    }

    pub fn q_eff(&self) -> f64 {
        PI * self.f_drive * self.t_drive
    }
}

/// Effective quality factor of a resonant drive of length `t_drive`, π·f·T.
pub fn q_eff(f: f64, t_drive: f64) -> Result<f64> {
    positive("f", f)?;
    positive("t_drive", t_drive)?;
    Ok(PI * f * t_drive)
}

/// Quality factor to use for a drive on `mode`: π·f·T while the ring-up is
/// still linear, the intrinsic Q once the drive outlasts it. The flag is set
/// when the intrinsic Q was substituted.
pub fn effective_drive_q(meas: &DriveMeasurement, mode: &ModeParams) -> (f64, bool) {
    let q = meas.q_eff();
    if q > mode.q_factor {
        (mode.q_factor, true)
    } else {
        (q, false)
    }
}

fn beta_sq_with_q(meas: &DriveMeasurement, q: f64) -> Result<f64> {
    meas.validate()?;
    let beta_sq = meas.delta_v_drive / meas.v_crosstalk / q;
    if beta_sq >= 1.0 {
        return Err(Error::UnphysicalCoupling(beta_sq));
    }
    Ok(beta_sq)
}

/// Energy coupling β² = (ΔV_drive / V_crosstalk) / Q_eff.
pub fn energy_coupling(meas: &DriveMeasurement) -> Result<f64> {
    beta_sq_with_q(meas, meas.q_eff())
}

/// dΦ/dx = √(β² · L_total · m · ω²), Wb/m (Wb/rad for rotational modes).
pub fn flux_gradient_from_beta_sq(chain: &DetectionChain, mode: &ModeParams, beta_sq: f64) -> Result<f64> {
    chain.validate()?;
    non_negative("beta_sq", beta_sq)?;
    let inertia = mode.effective_inertia()?;
    let w = mode.omega0();
    Ok((beta_sq * chain.l_total() * inertia * w * w).sqrt())
}

/// β² = (dΦ/dx)² / (L_total · m · ω²).
pub fn beta_sq_from_flux_gradient(chain: &DetectionChain, mode: &ModeParams, dphi_dx: f64) -> Result<f64> {
    chain.validate()?;
    non_negative("dphi_dx", dphi_dx)?;
    let inertia = mode.effective_inertia()?;
    let w = mode.omega0();
    Ok(dphi_dx * dphi_dx / (chain.l_total() * inertia * w * w))
}

/// Flux gradient from a drive measurement, using the intrinsic Q when the
/// drive reached steady state.
pub fn flux_gradient(chain: &DetectionChain, mode: &ModeParams, meas: &DriveMeasurement) -> Result<f64> {
    let (q, _) = effective_drive_q(meas, mode);
    let beta_sq = beta_sq_with_q(meas, q)?;
    flux_gradient_from_beta_sq(chain, mode, beta_sq)
}

/// dV/dx = (dV/dΦ_SQ) · M_in,SQ · dΦ/dx / L_total, V/m.
pub fn volts_per_meter(chain: &DetectionChain, dphi_dx: f64) -> Result<f64> {
    chain.validate()?;
    non_negative("dphi_dx", dphi_dx)?;
    Ok(chain.transimpedance() * dphi_dx / chain.l_total())
}

/// Inverse of [`volts_per_meter`].
pub fn flux_gradient_from_volts_per_meter(chain: &DetectionChain, dv_dx: f64) -> Result<f64> {
    chain.validate()?;
    non_negative("dv_dx", dv_dx)?;
    Ok(dv_dx * chain.l_total() / chain.transimpedance())
}

/// Mode energy corresponding to a signal amplitude `v` at coupling β², J.
///
/// Equal to `v² L_total / (2 (dV/dΦ_SQ · M_in,SQ)² β²)`: neither the mass (or
/// moment of inertia) nor the frequency enters, so translational and
/// rotational treatments of the same signal agree.
pub fn mode_energy_from_voltage(chain: &DetectionChain, mode: &ModeParams, beta_sq: f64, v: f64) -> Result<f64> {
    positive("beta_sq", beta_sq)?;
    let dv_dx = volts_per_meter(chain, flux_gradient_from_beta_sq(chain, mode, beta_sq)?)?;
    let x = v / dv_dx;
    let w = mode.omega0();
    Ok(0.5 * mode.effective_inertia()? * w * w * x * x)
}

/// Relative error contributions to the calibrated sensitivity, combined in
/// quadrature. The default is dominated by the mass uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBudget {
    pub mass: f64,
    pub q_eff: f64,
    pub l_total: f64,
    pub v_per_phi0: f64,
    pub m_in_sq: f64,
    pub omega: f64,
    pub delta_v_drive: f64,
    pub v_crosstalk: f64,
}

impl Default for UncertaintyBudget {
    fn default() -> Self {
        UncertaintyBudget {
            mass: 0.08,
            q_eff: 0.02,
            l_total: 0.01,
            v_per_phi0: 0.01,
            m_in_sq: 0.01,
            omega: 0.01,
            delta_v_drive: 0.01,
            v_crosstalk: 0.01,
        }
    }
}

impl UncertaintyBudget {
    pub fn components(&self) -> [(&'static str, f64); 8] {
        [
            ("mass", self.mass),
            ("q_eff", self.q_eff),
            ("l_total", self.l_total),
            ("v_per_phi0", self.v_per_phi0),
            ("m_in_sq", self.m_in_sq),
            ("omega", self.omega),
            ("delta_v_drive", self.delta_v_drive),
            ("v_crosstalk", self.v_crosstalk),
        ]
    }

    /// Total relative error, √Σ εᵢ².
    pub fn total(&self) -> f64 {
        self.components().iter().map(|(_, e)| e * e).sum::<f64>().sqrt()
    }
}

/// Settings of an in-silico calibration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDrive {
    /// Ground-truth flux gradient of the synthetic system, Wb/m.
    #[serde(rename = "dphi_dx_true_wb_per_m")]
    pub dphi_dx_true: f64,
    /// Drive frequency; the mode frequency when absent.
    #[serde(rename = "f_drive_hz", default, skip_serializing_if = "Option::is_none")]
    pub f_drive: Option<f64>,
    #[serde(rename = "t_drive_s", default = "default_t_drive")]
    pub t_drive: f64,
    /// Quiet interval recorded before the drive, s.
    #[serde(rename = "pre_s", default = "default_window")]
    pub pre: f64,
    /// Interval recorded after the drive, s.
    #[serde(rename = "post_s", default = "default_window")]
    pub post: f64,
    /// Particle amplitude the drive current is sized to produce, m.
    #[serde(rename = "ring_up_m", default = "default_ring_up")]
    pub ring_up: f64,
    #[serde(rename = "detector_noise_asd_m_per_rthz", default)]
    pub detector_noise_asd: f64,
    #[serde(default)]
    pub thermal_noise: bool,
    #[serde(rename = "dt_s", default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_t_drive() -> f64 {
    1.0
}

fn default_window() -> f64 {
    2.0
}

fn default_ring_up() -> f64 {
    1e-10
}

fn default_dt() -> f64 {
    2e-4
}

impl CalibrationDrive {
    pub fn new(dphi_dx_true: f64) -> Self {
        CalibrationDrive {
            dphi_dx_true,
            f_drive: None,
            t_drive: default_t_drive(),
            pre: default_window(),
            post: default_window(),
            ring_up: default_ring_up(),
            detector_noise_asd: 0.0,
            thermal_noise: false,
            dt: default_dt(),
            seed: 0,
        }
    }
}

/// Outcome of [`simulate_calibration`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub chain: DetectionChain,
    pub mode: ModeParams,
    pub drive: CalibrationDrive,
    pub measurement: DriveMeasurement,
    pub q_eff: f64,
    pub beta_sq: f64,
    pub dphi_dx_wb_per_m: f64,
    pub dv_dx_v_per_m: f64,
    pub dv_dx_true_v_per_m: f64,
    /// (recovered − true) / true.
    pub relative_error: f64,
    /// Quadrature total of the default error budget.
    pub budget_relative_uncertainty: f64,
    pub warnings: Vec<String>,
}

/// Complex amplitude `(2/N) Σ v e^{−iωt}` over the longest whole number of
/// drive periods in `[start, stop)`.
fn demodulate(v: &[f64], t: &[f64], f: f64, start: f64, stop: f64) -> Result<Complex64> {
    let i0 = t.partition_point(|&ti| ti < start);
    let i1 = t.partition_point(|&ti| ti < stop);
    let dt = if t.len() > 1 { t[1] - t[0] } else { 0.0 };
    let cycles = ((stop - start) * f).floor();
    if cycles < 1.0 || dt <= 0.0 {
        return Err(Error::invalid("calibration window", "shorter than one drive period"));
    }
    let n = ((cycles / f / dt).round() as usize).min(i1 - i0);
    let sum: Complex64 = (i0..i0 + n)
        .map(|i| v[i] * Complex64::from_polar(1.0, -TAU * f * t[i]))
        .sum();
    Ok(sum * (2.0 / n as f64))
}

/// Closes the calibration loop against the simulator.
///
/// The synthetic pick-up couples to the mode with the ground-truth `dΦ/dx`,
/// so a calibration current `I` exerts `F = dΦ/dx · I` and appears directly
/// at the output as `(dV/dΦ_SQ · M_in,SQ) · I`. The record is split into a
/// quiet, a driven and a free-ringing window, each demodulated at the drive
/// frequency. The crosstalk is the in-phase amplitude gained during the drive
/// and the ring-up is the change of the particle phasor across the drive.
pub fn simulate_calibration(
    chain: &DetectionChain,
    mode: &ModeParams,
    drive: &CalibrationDrive,
) -> Result<CalibrationReport> {
    chain.validate()?;
    mode.validate()?;
    positive("dphi_dx_true", drive.dphi_dx_true)?;
    positive("t_drive", drive.t_drive)?;
    positive("pre", drive.pre)?;
    positive("post", drive.post)?;
    positive("ring_up", drive.ring_up)?;
    let f = drive.f_drive.unwrap_or(mode.f0);
    positive("f_drive", f)?;

    let inertia = mode.effective_inertia()?;
    let w = TAU * f;
    // Linear ring-up x(T) = F T / (2 m ω) sets the force for the requested amplitude.
    let force = 2.0 * inertia * w * drive.ring_up / drive.t_drive;
    let current = force / drive.dphi_dx_true;
    let dv_dx_true = volts_per_meter(chain, drive.dphi_dx_true)?;
    let v_cross_true = chain.transimpedance() * current;

    let drive_start = drive.pre;
    let drive_stop = drive.pre + drive.t_drive;
    let mut config = SimConfig::new(vec![mode.clone()], drive.dt, drive_stop + drive.post, drive.seed);
    config.detector_noise_asd = drive.detector_noise_asd;
    config.thermal_noise = drive.thermal_noise;
    if !drive.thermal_noise {
        config.initial = vec![InitialState::At { x: 0.0, v: 0.0 }];
    }
    config.disturbances = vec![DisturbanceTone {
        start: Some(drive_start),
        stop: Some(drive_stop),
        ..DisturbanceTone::new(f, force, 0.0)
    }];
    let traj = simulate::run(&config)?;

    let voltage: Vec<f64> = traj
        .detector
        .iter()
        .zip(&traj.t)
        .map(|(&x, &t)| {
            let crosstalk = if t >= drive_start && t < drive_stop {
                v_cross_true * (w * t).cos()
            } else {
                0.0
            };
            dv_dx_true * x + crosstalk
        })
        .collect();

    let z_pre = demodulate(&voltage, &traj.t, f, 0.0, drive_start)?;
    let z_drive = demodulate(&voltage, &traj.t, f, drive_start, drive_stop)?;
    let z_post = demodulate(&voltage, &traj.t, f, drive_stop, f64::INFINITY)?;
    let measurement = DriveMeasurement {
        v_crosstalk: (z_drive - z_pre).re.abs(),
        delta_v_drive: (z_post - z_pre).norm(),
        t_drive: drive.t_drive,
        f_drive: f,
    };

    let mut warnings = Vec::new();
    let (q, saturated) = effective_drive_q(&measurement, mode);
    if saturated {
        let msg = format!(
            "drive of {} s exceeds the ring-up time (π f T = {:.3e} > Q = {:.3e}); intrinsic Q used",
            drive.t_drive,
            measurement.q_eff(),
            mode.q_factor
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let beta_sq = beta_sq_with_q(&measurement, q)?;
    let dphi_dx = flux_gradient_from_beta_sq(chain, mode, beta_sq)?;
    let dv_dx = volts_per_meter(chain, dphi_dx)?;
    Ok(CalibrationReport {
        chain: chain.clone(),
        mode: mode.clone(),
        drive: drive.clone(),
        measurement,
        q_eff: q,
        beta_sq,
        dphi_dx_wb_per_m: dphi_dx,
        dv_dx_v_per_m: dv_dx,
        dv_dx_true_v_per_m: dv_dx_true,
        relative_error: (dv_dx - dv_dx_true) / dv_dx_true,
        budget_relative_uncertainty: UncertaintyBudget::default().total(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModeLabel;

    #[test]
    fn paper_chain_totals() {
        let c = DetectionChain::paper();
        assert!((c.l_total() - 2.572e-6).abs() < 1e-15);
        assert!((c.transimpedance() - 8.6e5).abs() < 1e-6);
    }

    #[test]
    fn q_eff_arithmetic() {
        assert!((q_eff(50.59, 1.0).unwrap() - 158.93).abs() < 0.01);
        assert_eq!(q_eff(50.59, 2.0).unwrap(), 2.0 * q_eff(50.59, 1.0).unwrap());
        assert!(q_eff(0.0, 1.0).is_err());
    }

    #[test]
    fn beta_sq_definition() {
        let m = DriveMeasurement {
            v_crosstalk: 0.2,
            delta_v_drive: 0.2 * q_eff(50.0, 1.0).unwrap() * 1e-3,
            t_drive: 1.0,
            f_drive: 50.0,
        };
        assert!((energy_coupling(&m).unwrap() - 1e-3).abs() < 1e-15);
        let big = DriveMeasurement {
            delta_v_drive: 1e3 * m.v_crosstalk * m.q_eff(),
            ..m
        };
        assert!(matches!(energy_coupling(&big), Err(Error::UnphysicalCoupling(_))));
    }

    #[test]
    fn paper_sensitivities_invert() {
        let c = DetectionChain::paper();
        for (mode, dv_dx, beta, dphi) in [
            (ModeParams::mode3(), 4.7e6, 2.172e-3, 1.4056e-5),
            (ModeParams::mode4(), 3.0e6, 4.90e-4, 8.972e-6),
        ] {
            let g = flux_gradient_from_volts_per_meter(&c, dv_dx).unwrap();
            assert!((g / dphi - 1.0).abs() < 1e-3, "{g}");
            let b = beta_sq_from_flux_gradient(&c, &mode, g).unwrap();
            assert!((b / beta - 1.0).abs() < 2e-3, "{b}");
            let back = volts_per_meter(&c, flux_gradient_from_beta_sq(&c, &mode, b).unwrap()).unwrap();
            assert!((back / dv_dx - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_gradient_scalings() {
        let c = DetectionChain::paper();
        let mode = ModeParams::mode3();
        let g = flux_gradient_from_beta_sq(&c, &mode, 2.2e-3).unwrap();
        let g2 = flux_gradient_from_beta_sq(&c, &mode.clone().with_mass(2.0 * mode.mass), 2.2e-3).unwrap();
        assert!((g2 / g - 2f64.sqrt()).abs() < 1e-12);
        let zero = DriveMeasurement {
            v_crosstalk: 1.0,
            delta_v_drive: 0.0,
            t_drive: 1.0,
            f_drive: 50.59,
        };
        assert_eq!(flux_gradient(&c, &mode, &zero).unwrap(), 0.0);
        assert_eq!(volts_per_meter(&c, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn saturated_drive_uses_intrinsic_q() {
        let mode = ModeParams::mode3().with_q(100.0);
        let m = DriveMeasurement {
            v_crosstalk: 1.0,
            delta_v_drive: 0.1,
            t_drive: 10.0,
            f_drive: mode.f0,
        };
        assert_eq!(effective_drive_q(&m, &mode), (100.0, true));
    }

    #[test]
    fn budget_total() {
        assert!((UncertaintyBudget::default().total() - 0.0860).abs() < 5e-4);
    }

    #[test]
    fn energy_independent_of_inertia_and_frequency() {
        let c = DetectionChain::paper();
        let t = ModeParams::mode3();
        let r = ModeParams::rotational(ModeLabel::Alpha, 3.5e-7, 2.1e-13, 81.0, 1e6, 1.0);
        let et = mode_energy_from_voltage(&c, &t, 2e-3, 1e-3).unwrap();
        let er = mode_energy_from_voltage(&c, &r, 2e-3, 1e-3).unwrap();
        assert!((et / er - 1.0).abs() < 1e-12);
        let closed = 1e-6 * c.l_total() / (2.0 * c.transimpedance().powi(2) * 2e-3);
        assert!((et / closed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_closed_loop() {
        let r = simulate_calibration(&DetectionChain::paper(), &ModeParams::mode3(), &CalibrationDrive::new(1.4e-5)).unwrap();
        assert!(r.relative_error.abs() < 0.02, "{}", r.relative_error);
        assert!(r.warnings.is_empty());
    }
}
