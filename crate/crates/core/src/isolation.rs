//! Lumped multistage mass-spring vibration isolation.
//!
//! Stages hang in series from a moving base: spring `i` connects stage `i − 1`
//! (the base for `i = 0`) to stage `i`, and the last stage carries the
//! experiment. Losses are modelled as structural damping, `k → k (1 + 2iζ)`,
//! which gives a resonant gain of `1/(2ζ)` without spoiling the high-frequency
//! roll-off.

use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check, positive, Error, Result};
use crate::model::ModeParams;
use crate::simulate::DisturbanceTone;

/// Default per-stage damping ratio.
pub const DEFAULT_DAMPING_RATIO: f64 = 1e-3;

/// Fundamental of the pulse-tube cooler, Hz.
pub const PULSE_TUBE_HZ: f64 = 1.401;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    Axial,
    Lateral,
}

impl Axis {
    pub const BOTH: [Axis; 2] = [Axis::Axial, Axis::Lateral];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Axial => "axial",
            Axis::Lateral => "lateral",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationStage {
    #[serde(rename = "mass_kg")]
    pub mass: f64,
    #[serde(rename = "k_axial_n_per_m")]
    pub k_axial: f64,
    #[serde(rename = "k_lateral_n_per_m")]
    pub k_lateral: f64,
    #[serde(default = "default_zeta")]
    pub damping_ratio_axial: f64,
    #[serde(default = "default_zeta")]
    pub damping_ratio_lateral: f64,
}

fn default_zeta() -> f64 {
    DEFAULT_DAMPING_RATIO
}

impl IsolationStage {
    pub fn new(mass: f64, k_axial: f64, k_lateral: f64) -> Self {
        IsolationStage {
            mass,
            k_axial,
            k_lateral,
            damping_ratio_axial: DEFAULT_DAMPING_RATIO,
            damping_ratio_lateral: DEFAULT_DAMPING_RATIO,
        }
    }

    pub fn with_damping(mut self, zeta: f64) -> Self {
        self.damping_ratio_axial = zeta;
        self.damping_ratio_lateral = zeta;
        self
    }

    pub fn stiffness(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Axial => self.k_axial,
            Axis::Lateral => self.k_lateral,
        }
    }

    pub fn damping_ratio(&self, axis: Axis) -> f64 {
        match axis {
            Axis::Axial => self.damping_ratio_axial,
            Axis::Lateral => self.damping_ratio_lateral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("stage.mass", self.mass)?;
        positive("stage.k_axial", self.k_axial)?;
        positive("stage.k_lateral", self.k_lateral)?;
        for z in [self.damping_ratio_axial, self.damping_ratio_lateral] {
            check("stage.damping_ratio", z, |z| z > 0.0 && z < 1.0, "in (0, 1)")?;
        }
        Ok(())
    }
}

/// Series chain of stages, ordered from the support to the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationChain {
    pub stages: Vec<IsolationStage>,
    /// Axis used by [`transmissibility`].
    #[serde(default)]
    pub base_axis: Axis,
    /// Amplitude of a parallel short-circuit path (acoustic or mechanical)
    /// that bypasses the chain; off when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmissibility_floor: Option<f64>,
}

impl Default for IsolationChain {
    fn default() -> Self {
        Self::preset()
    }
}

impl IsolationChain {
    pub fn new(stages: Vec<IsolationStage>) -> Self {
        IsolationChain {
            stages,
            base_axis: Axis::Axial,
            transmissibility_floor: None,
        }
    }

    /// Three-stage chain with lowest modes at 1.0 Hz axial and 0.6 Hz lateral
    /// and the highest axial mode near 10 Hz.
    pub fn preset() -> Self {
        Self::new(vec![
            IsolationStage::new(4.0, 256.698395, 15136.642414),
            IsolationStage::new(2.0, 5446.638548, 29.272944),
            IsolationStage::new(0.05, 2.216018, 6.932743),
        ])
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::invalid("stages", "at least one stage is required"));
        }
        for s in &self.stages {
            s.validate()?;
        }
        if let Some(floor) = self.transmissibility_floor {
            check("transmissibility_floor", floor, |v| v >= 0.0, "non-negative")?;
        }
        Ok(())
    }

    fn stiffness_matrix(&self, axis: Axis, w: impl Fn(&IsolationStage) -> Complex64) -> DMatrix<Complex64> {
        let n = self.stages.len();
        let mut k = DMatrix::zeros(n, n);
        for (i, s) in self.stages.iter().enumerate() {
            let ki = Complex64::new(s.stiffness(axis), 0.0) * w(s);
            k[(i, i)] += ki;
            if i > 0 {
                k[(i - 1, i - 1)] += ki;
                k[(i - 1, i)] -= ki;
                k[(i, i - 1)] -= ki;
            }
        }
        k
    }
}

/// Experiment-to-base displacement ratio along `axis` at `f`.
pub fn transmissibility_axis(chain: &IsolationChain, axis: Axis, f: f64) -> Result<Complex64> {
    chain.validate()?;
    positive("f", f)?;
    let n = chain.stages.len();
    let w2 = (TAU * f).powi(2);
    let mut a = chain.stiffness_matrix(axis, |s| Complex64::new(1.0, 2.0 * s.damping_ratio(axis)));
    for (i, s) in chain.stages.iter().enumerate() {
        a[(i, i)] -= s.mass * w2;
    }
    let first = &chain.stages[0];
    let mut b = DVector::zeros(n);
    b[0] = first.stiffness(axis) * Complex64::new(1.0, 2.0 * first.damping_ratio(axis));
    let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let x = a.lu().solve(&b).ok_or(Error::Singular(f))?;
    let t = x[n - 1];
    if !t.is_finite() || scale == 0.0 {
        return Err(Error::Singular(f));
    }
    Ok(t + chain.transmissibility_floor.unwrap_or(0.0))
}

/// Transmissibility along the chain's base axis.
pub fn transmissibility(chain: &IsolationChain, f: f64) -> Result<Complex64> {
    transmissibility_axis(chain, chain.base_axis, f)
}

/// Attenuation −20·log10|T| (equal to 10·log10 of the inverse power ratio), dB.
pub fn attenuation_db_at(chain: &IsolationChain, axis: Axis, f: f64) -> Result<f64> {
    Ok(-20.0 * transmissibility_axis(chain, axis, f)?.norm().log10())
}

/// `n` log-spaced frequencies from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// Smallest and largest attenuation over `[f_lo, f_hi]` along the base axis,
/// sampled on a 2001-point logarithmic grid.
pub fn attenuation_db(chain: &IsolationChain, f_lo: f64, f_hi: f64) -> Result<(f64, f64)> {
    positive("f_lo", f_lo)?;
    if f_hi.is_nan() || f_hi <= f_lo {
        return Err(Error::invalid("f_hi", "must exceed f_lo"));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in log_grid(f_lo, f_hi, 2001) {
        let a = attenuation_db_at(chain, chain.base_axis, f)?;
        lo = lo.min(a);
        hi = hi.max(a);
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    pub f_hz: f64,
    pub axis: Axis,
}

/// Undamped eigenfrequencies along one axis, ascending.
pub fn eigenfrequencies(chain: &IsolationChain, axis: Axis) -> Result<Vec<f64>> {
    chain.validate()?;
    let n = chain.stages.len();
    let k = chain.stiffness_matrix(axis, |_| Complex64::new(1.0, 0.0)).map(|v| v.re);
    let inv_sqrt_m: Vec<f64> = chain.stages.iter().map(|s| 1.0 / s.mass.sqrt()).collect();
    let d = DMatrix::from_fn(n, n, |i, j| k[(i, j)] * inv_sqrt_m[i] * inv_sqrt_m[j]);
    let mut f: Vec<f64> = SymmetricEigen::new(d)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt() / TAU)
        .collect();
    f.sort_by(f64::total_cmp);
    Ok(f)
}

/// Eigenfrequencies of both axes, sorted by frequency.
pub fn resonance_catalog(chain: &IsolationChain) -> Result<Vec<Resonance>> {
    let mut out = Vec::new();
    for axis in Axis::BOTH {
        out.extend(eigenfrequencies(chain, axis)?.into_iter().map(|f_hz| Resonance { f_hz, axis }));
    }
    out.sort_by(|a, b| a.f_hz.total_cmp(&b.f_hz));
    Ok(out)
}

/// Base excitation feeding [`disturbance_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpLines {
    #[serde(rename = "fundamental_hz", default = "default_pulse_tube")]
    pub fundamental: f64,
    #[serde(default)]
    pub harmonics: usize,
    /// Base displacement amplitude of every line, m.
    #[serde(rename = "base_amplitude_m")]
    pub base_amplitude: f64,
    /// Also emit a tone at every chain resonance.
    #[serde(default = "default_true")]
    pub include_resonances: bool,
}

fn default_pulse_tube() -> f64 {
    PULSE_TUBE_HZ
}

fn default_true() -> bool {
    true
}

impl PumpLines {
    pub fn new(harmonics: usize, base_amplitude: f64) -> Self {
        PumpLines {
            fundamental: PULSE_TUBE_HZ,
            harmonics,
            base_amplitude,
            include_resonances: true,
        }
    }
}

/// Force tones on `mode` from base motion transmitted through the chain.
///
/// Each line of base amplitude `d` at frequency `f` moves the platform by
/// `d·|T(f)|`; in the platform frame the mode feels the inertial force
/// `m (2πf)² d |T(f)|`.
pub fn disturbance_profile(chain: &IsolationChain, pump: &PumpLines, mode: &ModeParams) -> Result<Vec<DisturbanceTone>> {
    chain.validate()?;
    positive("fundamental", pump.fundamental)?;
    check("base_amplitude", pump.base_amplitude, |v| v >= 0.0, "non-negative")?;
    let m = mode.effective_inertia()?;
    let mut freqs: Vec<f64> = (1..=pump.harmonics).map(|n| n as f64 * pump.fundamental).collect();
    if pump.include_resonances {
        freqs.extend(eigenfrequencies(chain, chain.base_axis)?);
    }
    freqs
        .into_iter()
        .map(|f| {
            let t = transmissibility(chain, f)?;
            let force = m * (TAU * f).powi(2) * pump.base_amplitude * t.norm();
            Ok(DisturbanceTone {
                mode: Some(mode.label),
                ..DisturbanceTone::new(f, force, t.arg())
            })
        })
        .collect()
}

/// Writes `f_hz,mag_db_axial,mag_db_lateral,phase_rad_axial,phase_rad_lateral`
/// where magnitude is the gain 20·log10|T|.
pub fn write_bode_csv<W: Write>(chain: &IsolationChain, freqs: &[f64], mut out: W) -> Result<()> {
    writeln!(out, "f_hz,mag_db_axial,mag_db_lateral,phase_rad_axial,phase_rad_lateral")?;
    for &f in freqs {
        let a = transmissibility_axis(chain, Axis::Axial, f)?;
        let l = transmissibility_axis(chain, Axis::Lateral, f)?;
        writeln!(
            out,
            "{f:e},{:e},{:e},{:e},{:e}",
            20.0 * a.norm().log10(),
            20.0 * l.norm().log10(),
            a.arg(),
            l.arg()
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(f0: f64, zeta: f64) -> IsolationChain {
        let k = (TAU * f0).powi(2);
        IsolationChain::new(vec![IsolationStage::new(1.0, k, k).with_damping(zeta)])
    }

    #[test]
    fn rigid_limit() {
        let t = transmissibility(&IsolationChain::preset(), 1e-4).unwrap();
        assert!((t - 1.0).norm() < 1e-6);
    }

    #[test]
    fn single_stage_closed_form() {
        let t = transmissibility(&single(1.0, 1e-4), 10.0).unwrap();
        assert!((t.norm() * 99.0 - 1.0).abs() < 1e-3);
        let zeta = 1e-2;
        let gain = -attenuation_db_at(&single(1.0, zeta), Axis::Axial, 1.0).unwrap();
        let expected = 20.0 * ((1.0 + 4.0 * zeta * zeta).sqrt() / (2.0 * zeta)).log10();
        assert!((gain - expected).abs() < 1e-9);
    }

    #[test]
    fn single_stage_eigenfrequency() {
        let f = eigenfrequencies(&single(2.5, 1e-3), Axis::Lateral).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn preset_resonances() {
        let c = IsolationChain::preset();
        let ax = eigenfrequencies(&c, Axis::Axial).unwrap();
        let lat = eigenfrequencies(&c, Axis::Lateral).unwrap();
        assert!((ax[0] - 1.0).abs() < 1e-3);
        assert!((lat[0] - 0.6).abs() < 1e-3);
        assert!((ax[2] - 10.2).abs() < 0.05);
        assert_eq!(resonance_catalog(&c).unwrap().len(), 6);
    }

    #[test]
    fn rolloff_slope() {
        let c = IsolationChain::preset();
        let a1 = attenuation_db_at(&c, Axis::Axial, 300.0).unwrap();
        let a2 = attenuation_db_at(&c, Axis::Axial, 3000.0).unwrap();
        assert!((a2 - a1 - 120.0).abs() < 0.5, "{}", a2 - a1);
    }

    #[test]
    fn floor_limits_attenuation() {
        let mut c = IsolationChain::preset();
        c.transmissibility_floor = Some(1e-6);
        let (lo, hi) = attenuation_db(&c, 50.0, 70.0).unwrap();
        assert!(lo > 119.0 && hi < 121.0);
    }

    #[test]
    fn zero_damping_rejected() {
        let c = single(1.0, 0.0);
        assert!(transmissibility(&c, 1.0).is_err());
    }

    #[test]
    fn pump_lines() {
        let c = IsolationChain::preset();
        let mode = ModeParams::mode3();
        let tones = disturbance_profile(&c, &PumpLines::new(10, 1e-6), &mode).unwrap();
        assert_eq!(tones.len(), 13);
        for (n, t) in tones.iter().take(10).enumerate() {
            assert!((t.f - PULSE_TUBE_HZ * (n + 1) as f64).abs() < 1e-12);
        }
        let only = disturbance_profile(&c, &PumpLines::new(0, 1e-6), &mode).unwrap();
        assert_eq!(only.len(), 3);
    }

    #[test]
    fn bode_header() {
        let mut buf = Vec::new();
        write_bode_csv(&IsolationChain::preset(), &log_grid(0.1, 100.0, 5), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("f_hz,mag_db_axial,mag_db_lateral,phase_rad_axial,phase_rad_lateral\n"));
    }
}
