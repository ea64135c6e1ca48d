//! Lock-in style narrow-band feedback controller.
//!
//! The detector stream is demodulated at the target frequency, the I/Q pair is
//! low-pass filtered by a 4th-order Butterworth filter, then remodulated with a
//! configurable phase lead and scaled by `gain · actuator_scale`. Seen from the
//! input, the chain is a band-pass centred on `target_f` whose half-width at
//! −3 dB is `demod_bandwidth`.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check, non_negative, positive, Error, Result};
use crate::model::{ModeLabel, ModeParams};

pub const FILTER_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    /// Demodulate, low-pass, remodulate.
    #[default]
    Lockin,
    /// Broadband derivative of the detector signal (ideal cold damping).
    Velocity,
}

/// Feedback controller settings for one cooled mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackConfig {
    /// Mode receiving the feedback force.
    pub mode: ModeLabel,
    /// Demodulation centre frequency, Hz.
    #[serde(rename = "target_f_hz")]
    pub target_f: f64,
    pub gain: f64,
    /// Phase lead of the remodulated signal, rad. π/2 gives velocity feedback.
    #[serde(rename = "phase_rad", default = "default_phase")]
    pub phase: f64,
    /// −3 dB half-width of the pass band, Hz.
    #[serde(rename = "demod_bandwidth_hz")]
    pub demod_bandwidth: f64,
    /// Force per unit controller output, N/m.
    #[serde(rename = "actuator_scale_n_per_m")]
    pub actuator_scale: f64,
    #[serde(default)]
    pub controller: ControllerKind,
    /// Controller samples between detection and actuation.
    #[serde(default = "default_latency")]
    pub latency_samples: usize,
}

fn default_phase() -> f64 {
    PI / 2.0
}

fn default_latency() -> usize {
    1
}

impl FeedbackConfig {
    /// Lock-in controller for `mode` with the given gain.
    pub fn lockin(mode: &ModeParams, gain: f64, demod_bandwidth: f64, actuator_scale: f64) -> Self {
        FeedbackConfig {
            mode: mode.label,
            target_f: mode.f0,
            gain,
            phase: PI / 2.0,
            demod_bandwidth,
            actuator_scale,
            controller: ControllerKind::Lockin,
            latency_samples: 1,
        }
    }

    pub fn velocity(mode: &ModeParams, gain: f64, actuator_scale: f64) -> Self {
        FeedbackConfig {
            controller: ControllerKind::Velocity,
            ..Self::lockin(mode, gain, mode.f0 / 4.0, actuator_scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("target_f", self.target_f)?;
        non_negative("gain", self.gain)?;
        check("phase", self.phase, |_| true, "finite")?;
        positive("actuator_scale", self.actuator_scale)?;
        positive("demod_bandwidth", self.demod_bandwidth)?;
        if self.controller == ControllerKind::Lockin && self.demod_bandwidth >= self.target_f / 2.0 {
            return Err(Error::invalid(
                "demod_bandwidth",
                format!(
                    "{} Hz must be below target_f/2 = {} Hz",
                    self.demod_bandwidth,
                    self.target_f / 2.0
                ),
            ));
        }
        Ok(())
    }

    /// Closed-loop damping rate added per unit gain, `a sin φ / (m ω0)`.
    ///
    /// Derived from the loop algebra with an ideal (flat) pass band around the
    /// resonance: the remodulated output leads position by φ, and its in-quadrature
    /// part acts as a viscous force `−(g a sin φ / ω0) v`.
    pub fn gamma_fb_unit(&self, mode: &ModeParams) -> Result<f64> {
        let phase = match self.controller {
            ControllerKind::Lockin => self.phase,
            ControllerKind::Velocity => PI / 2.0,
        };
        Ok(self.actuator_scale * phase.sin() / (mode.effective_inertia()? * 2.0 * PI * self.target_f))
    }

    pub fn gamma_fb(&self, mode: &ModeParams) -> Result<f64> {
        Ok(self.gain * self.gamma_fb_unit(mode)?)
    }

    /// Gain producing feedback damping `gamma_fb` on `mode`.
    pub fn gain_for_gamma_fb(&self, mode: &ModeParams, gamma_fb: f64) -> Result<f64> {
        non_negative("gamma_fb", gamma_fb)?;
        Ok(gamma_fb / self.gamma_fb_unit(mode)?)
    }
}

/// Direct-form-I biquad section.
#[derive(Debug, Clone, Copy)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
    x: [f64; 2],
    y: [f64; 2],
}

impl Biquad {
    /// Low-pass section with prewarped bilinear transform.
    pub fn lowpass(cutoff: f64, sample_rate: f64, q: f64) -> Self {
        let w0 = TAU * cutoff / sample_rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b1 = (1.0 - cos) / a0;
        Biquad {
            b: [0.5 * b1, b1, 0.5 * b1],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
            x: [0.0; 2],
            y: [0.0; 2],
        }
    }

    #[inline]
    pub fn process(&mut self, input: f64) -> f64 {
        let y = self.b[0] * input + self.b[1] * self.x[0] + self.b[2] * self.x[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.x = [input, self.x[0]];
        self.y = [y, self.y[0]];
        y
    }

    /// Complex response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }
}

/// 4th-order Butterworth low-pass as two cascaded biquads.
#[derive(Debug, Clone, Copy)]
pub struct Butterworth4 {
    sections: [Biquad; 2],
}

impl Butterworth4 {
    pub fn new(cutoff: f64, sample_rate: f64) -> Self {
        // Pole-pair quality factors 1 / (2 cos(π(2k+1)/8)).
        let q = |k: f64| 1.0 / (2.0 * (PI * (2.0 * k + 1.0) / 8.0).cos());
        Butterworth4 {
            sections: [
                Biquad::lowpass(cutoff, sample_rate, q(0.0)),
                Biquad::lowpass(cutoff, sample_rate, q(1.0)),
            ],
        }
    }

    #[inline]
    pub fn process(&mut self, input: f64) -> f64 {
        let y = self.sections[0].process(input);
        self.sections[1].process(y)
    }

    pub fn response(&self, w: f64) -> Complex64 {
        self.sections[0].response(w) * self.sections[1].response(w)
    }
}

/// Streaming controller state for one [`FeedbackConfig`].
#[derive(Debug, Clone)]
pub struct Controller {
    config: FeedbackConfig,
    sample_rate: f64,
    n: u64,
    i_filter: Butterworth4,
    q_filter: Butterworth4,
    prev_input: f64,
}

impl Controller {
    pub fn new(config: &FeedbackConfig, sample_rate: f64) -> Result<Self> {
        config.validate()?;
        positive("sample_rate", sample_rate)?;
        if sample_rate < 10.0 * config.target_f {
            return Err(Error::invalid(
                "sample_rate",
                format!("{sample_rate} Hz is below 10 x target_f ({} Hz)", config.target_f),
            ));
        }
        let lp = Butterworth4::new(config.demod_bandwidth, sample_rate);
        Ok(Controller {
            config: config.clone(),
            sample_rate,
            n: 0,
            i_filter: lp,
            q_filter: lp,
            prev_input: 0.0,
        })
    }

    pub fn config(&self) -> &FeedbackConfig {
        &self.config
    }

    /// Consumes one detector sample and returns the controller drive
    /// `gain · actuator_scale · u`, where `u` leads the input by the configured
    /// phase inside the pass band. The force on the mode is the negative of it.
    pub fn process(&mut self, input: f64) -> f64 {
        let cfg = &self.config;
        let u = match cfg.controller {
            ControllerKind::Lockin => {
                let cycles = (cfg.target_f * self.n as f64 / self.sample_rate).fract();
                let theta = TAU * cycles;
                let (s, c) = theta.sin_cos();
                let i = self.i_filter.process(2.0 * input * c);
                let q = self.q_filter.process(2.0 * input * s);
                // z = I − iQ is the complex amplitude; output Re(z e^{i(θ+φ)}).
                let (sp, cp) = (theta + cfg.phase).sin_cos();
                i * cp + q * sp
            }
            ControllerKind::Velocity => {
                let d = (input - self.prev_input) * self.sample_rate;
                self.prev_input = input;
                d / (TAU * cfg.target_f)
            }
        };
        self.n += 1;
        cfg.gain * cfg.actuator_scale * u
    }

    /// |H(f)|² of the controller from input to `u` (gain excluded), for f ≥ 0.
    pub fn power_response(&self, f: f64) -> f64 {
        match self.config.controller {
            ControllerKind::Lockin => {
                let w = TAU * (f - self.config.target_f) / self.sample_rate;
                self.i_filter.response(w).norm_sqr()
            }
            ControllerKind::Velocity => {
                let w = TAU * f / self.sample_rate;
                let d = (1.0 - Complex64::from_polar(1.0, -w)) * self.sample_rate;
                (d / (TAU * self.config.target_f)).norm_sqr()
            }
        }
    }
}

/// Runs a controller over a whole detector stream and returns drive samples.
pub fn lockin_controller(stream: &[f64], fb: &FeedbackConfig, sample_rate: f64) -> Result<Vec<f64>> {
    let mut ctrl = Controller::new(fb, sample_rate)?;
    Ok(stream.iter().map(|&s| ctrl.process(s)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(target: f64, bw: f64) -> FeedbackConfig {
        FeedbackConfig {
            mode: ModeLabel::Y,
            target_f: target,
            gain: 2.0,
            phase: PI / 2.0,
            demod_bandwidth: bw,
            actuator_scale: 3.0,
            controller: ControllerKind::Lockin,
            latency_samples: 1,
        }
    }

    #[test]
    fn butterworth_has_half_power_at_cutoff() {
        let f = Butterworth4::new(5.0, 5000.0);
        let at_cut = f.response(TAU * 5.0 / 5000.0).norm_sqr();
        assert!((at_cut - 0.5).abs() < 1e-6, "{at_cut}");
        assert!((f.response(0.0).norm() - 1.0).abs() < 1e-12);
        let at3 = f.response(TAU * 15.0 / 5000.0).norm_sqr();
        // analog Butterworth-4: 1/(1 + 3^8)
        assert!((10.0 * at3.log10() + 38.17).abs() < 0.1, "{}", 10.0 * at3.log10());
    }

    #[test]
    fn rejects_wide_bandwidth() {
        let fb = config(50.0, 25.0);
        assert!(matches!(Controller::new(&fb, 5000.0), Err(Error::InvalidParameter { name: "demod_bandwidth", .. })));
        let fb = config(50.0, 5.0);
        assert!(Controller::new(&fb, 400.0).is_err());
    }

    #[test]
    fn sine_input_leads_by_phase() {
        let fs = 5000.0;
        let f = 50.59;
        let fb = config(f, 5.0);
        let n = 20_000;
        let input: Vec<f64> = (0..n).map(|i| (TAU * f * i as f64 / fs).sin()).collect();
        let out = lockin_controller(&input, &fb, fs).unwrap();
        // after settling, out ≈ g·a·cos(ωt)
        let amp = fb.gain * fb.actuator_scale;
        for i in (n / 2)..n {
            let expected = amp * (TAU * f * i as f64 / fs).cos();
            assert!((out[i] - expected).abs() < 1e-3 * amp, "i={i} {} vs {}", out[i], expected);
        }
    }

    #[test]
    fn gamma_fb_unit_from_loop_algebra() {
        let mode = ModeParams::mode3();
        let fb = FeedbackConfig::lockin(&mode, 1.0, 5.0, 1e-6);
        let unit = fb.gamma_fb_unit(&mode).unwrap();
        assert!((unit - 1e-6 / (mode.mass * mode.omega0())).abs() < 1e-12 * unit);
        let g = fb.gain_for_gamma_fb(&mode, 9.0 * mode.gamma0()).unwrap();
        let fb = FeedbackConfig { gain: g, ..fb };
        assert!((fb.gamma_fb(&mode).unwrap() / mode.gamma0() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn velocity_controller_is_a_derivative() {
        let fs = 10_000.0;
        let f = 50.0;
        let mode = ModeParams::translational(ModeLabel::Y, 1.0, f, 100.0, 1.0);
        let fb = FeedbackConfig::velocity(&mode, 1.0, 1.0);
        let input: Vec<f64> = (0..2000).map(|i| (TAU * f * i as f64 / fs).sin()).collect();
        let out = lockin_controller(&input, &fb, fs).unwrap();
        for i in 10..2000 {
            // backward difference: half-sample delay
            let expected = (TAU * f * (i as f64 - 0.5) / fs).cos();
            assert!((out[i] - expected).abs() < 2e-3, "{i}");
        }
    }
}
