//! Seeded Monte-Carlo sweeps of feedback gain.
//!
//! Every realization gets its own seed derived from the base seed, the point
//! index and the realization index, and results are collected in index order,
//! so a sweep is reproducible regardless of the thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::model::{analytic_mode_temperature, phonon_number, ModeLabel};
use crate::simulate::{self, derive_seed, SimConfig};
use crate::spectral::{integrate_band, segment_for_linewidth, welch_psd, Window};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Scenario whose feedback entry for `target` gets its gain replaced.
    pub base: SimConfig,
    pub target: ModeLabel,
    pub gains: Vec<f64>,
    pub realizations: usize,
    #[serde(default = "default_bins")]
    pub bins_per_linewidth: f64,
    #[serde(default)]
    pub window: Window,
}

fn default_bins() -> f64 {
    10.0
}

/// Ensemble statistics at one gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gain: f64,
    pub gamma_fb_per_s: f64,
    pub realizations: usize,
    /// Band-integrated temperature of the true mode coordinate, K.
    pub t_band_k: f64,
    pub t_band_sem_k: f64,
    /// Temperature from the full variance of the true mode coordinate, K.
    pub t_true_k: f64,
    pub t_true_sem_k: f64,
    /// Band-integrated temperature seen by the detector after subtracting the
    /// detection floor, K.
    pub t_inloop_k: f64,
    /// Ideal cold-damping law T Γ0 / (Γ0 + Γ_FB), K.
    pub t_ideal_k: f64,
    pub n_ph_band: f64,
}

/// Per-realization measurements: (band, full variance, in-loop).
fn measure(config: &SimConfig, target: ModeLabel, gamma_total: f64, bins: f64, window: Window) -> Result<[f64; 3]> {
    let traj = simulate::run(config)?;
    let idx = config.mode_index(target).ok_or_else(|| Error::UnknownMode(target.to_string()))?;
    let mode = &config.modes[idx];
    let x = &traj.x[idx];
    let fs = traj.sample_rate();
    let n = segment_for_linewidth(fs, gamma_total, bins, x.len());
    let k = mode.spring_constant()?;
    let t_band = integrate_band(&welch_psd(x, fs, n, 0.5, window)?, mode, gamma_total, 0.0)?.t_mode;
    let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let floor = config.detector_noise_asd * config.detector_noise_asd;
    let t_inloop = integrate_band(&welch_psd(&traj.detector, fs, n, 0.5, window)?, mode, gamma_total, floor)?.t_mode;
    Ok([t_band, k * var / K_B, t_inloop])
}

fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `realizations` independent simulations per gain.
pub fn sweep_gain(cfg: &SweepConfig) -> Result<Vec<SweepPoint>> {
    if cfg.realizations == 0 {
        return Err(Error::invalid("realizations", "must be at least 1"));
    }
    if cfg.gains.is_empty() {
        return Err(Error::invalid("gains", "at least one gain is required"));
    }
    let fb_index = cfg
        .base
        .feedback
        .iter()
        .position(|f| f.mode == cfg.target)
        .ok_or_else(|| Error::invalid("feedback", format!("no controller targets mode `{}`", cfg.target)))?;
    let mode_index = cfg
        .base
        .mode_index(cfg.target)
        .ok_or_else(|| Error::UnknownMode(cfg.target.to_string()))?;
    cfg.base.validate()?;
    let mode = &cfg.base.modes[mode_index];

    cfg.gains
        .iter()
        .enumerate()
        .map(|(p, &gain)| {
            let mut point_cfg = cfg.base.clone();
            point_cfg.feedback[fb_index].gain = gain;
            let gamma_fb = point_cfg.feedback[fb_index].gamma_fb(mode)?;
            let gamma_total = mode.gamma0() + gamma_fb;
            let point_seed = derive_seed(cfg.base.seed, p as u64);
            let runs: Vec<[f64; 3]> = (0..cfg.realizations)
                .into_par_iter()
                .map(|r| {
                    let mut c = point_cfg.clone();
                    c.seed = derive_seed(point_seed, r as u64);
                    measure(&c, cfg.target, gamma_total, cfg.bins_per_linewidth, cfg.window)
                })
                .collect::<Result<_>>()?;
            let column = |i: usize| runs.iter().map(|r| r[i]).collect::<Vec<_>>();
            let (t_band, t_band_sem) = mean_sem(&column(0));
            let (t_true, t_true_sem) = mean_sem(&column(1));
            let (t_inloop, _) = mean_sem(&column(2));
            log::info!("gain {gain:.4e}: Γ_FB = {gamma_fb:.4e} 1/s, T_band = {t_band:.4e} K");
            Ok(SweepPoint {
                gain,
                gamma_fb_per_s: gamma_fb,
                realizations: cfg.realizations,
                t_band_k: t_band,
                t_band_sem_k: t_band_sem,
                t_true_k: t_true,
                t_true_sem_k: t_true_sem,
                t_inloop_k: t_inloop,
                t_ideal_k: analytic_mode_temperature(mode, gamma_fb)?,
                n_ph_band: phonon_number(t_band.max(0.0), mode.f0)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModeParams;
    use crate::simulate::FeedbackConfig;

    fn config(realizations: usize) -> SweepConfig {
        let mode = ModeParams::mode3().with_surrogate_q(100.0);
        let mut base = SimConfig::new(vec![mode.clone()], 1.0 / 2560.0, 40.0, 9);
        base.feedback.push(FeedbackConfig::velocity(&mode, 0.0, 1e-6));
        let g = base.feedback[0].gain_for_gamma_fb(&mode, mode.gamma0()).unwrap();
        SweepConfig {
            base,
            target: mode.label,
            gains: vec![0.0, g],
            realizations,
            bins_per_linewidth: 4.0,
            window: Window::Hann,
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let cfg = config(3);
        let a = sweep_gain(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sweep_gain(&cfg).unwrap());
        assert_eq!(a, b);
        assert_eq!(a[1].gamma_fb_per_s, cfg.base.modes[0].gamma0());
    }

    #[test]
    fn rejects_missing_controller() {
        let mut cfg = config(1);
        cfg.base.feedback.clear();
        assert!(sweep_gain(&cfg).is_err());
        let mut cfg = config(0);
        cfg.realizations = 0;
        assert!(sweep_gain(&cfg).is_err());
    }
}
