//! One simulation per gain point, analysed mode by mode.

use rayon::prelude::*;
use serde::Serialize;

use levitwin_core::model::{analytic_mode_temperature, ModeParams};
use levitwin_core::simulate::{self as core_sim, derive_seed, run, SimConfig, Trajectory};
use levitwin_core::spectral::{self, fit_lorentzian, integrate_band, segment_for_linewidth, thermometry, welch_psd, FitReport};
use levitwin_core::ModeLabel;

use super::Context;
use crate::error::{from_core, CliError};

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub command: &'static str,
    pub seed: u64,
    pub dt_s: f64,
    pub duration_s: f64,
    pub points: Vec<PointReport>,
}

#[derive(Debug, Serialize)]
pub struct PointReport {
    pub index: usize,
    pub seed: u64,
    pub gains: Vec<GainEntry>,
    pub trajectory_csv: Option<String>,
    pub modes: Vec<ModeReport>,
}

#[derive(Debug, Serialize)]
pub struct GainEntry {
    pub mode: ModeLabel,
    pub gain: f64,
    pub gamma_fb_per_s: f64,
}

#[derive(Debug, Serialize)]
pub struct ModeReport {
    pub label: ModeLabel,
    pub f0_hz: f64,
    pub gamma_fb_per_s: f64,
    /// Cold-damping prediction for an ideal controller, K.
    pub t_ideal_k: f64,
    pub t_mode_k: f64,
    pub a_rms_m: f64,
    pub n_ph: f64,
    pub peak_psd_m2_per_hz: f64,
    /// `fit` when the Lorentzian fit succeeded, `band` for the fallback.
    pub method: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
    pub spectrum_csv: String,
}

/// Γ_FB applied to `mode` by the controllers of `cfg`.
fn feedback_damping(cfg: &SimConfig, mode: &ModeParams) -> Result<f64, CliError> {
    let mut total = 0.0;
    for f in cfg.feedback.iter().filter(|f| f.mode == mode.label) {
        total += f.gamma_fb(mode).map_err(|e| from_core("feedback", e))?;
    }
    Ok(total)
}

fn analyse_mode(
    ctx: &Context,
    cfg: &SimConfig,
    traj: &Trajectory,
    index: usize,
    point: usize,
) -> Result<ModeReport, CliError> {
    let sim = ctx.scenario.simulation()?;
    let mode = &cfg.modes[index];
    let gamma_fb = feedback_damping(cfg, mode)?;
    let gamma_total = mode.gamma0() + gamma_fb;
    let fs = traj.sample_rate();
    let x = &traj.x[index];
    let n = segment_for_linewidth(fs, gamma_total, sim.bins_per_linewidth, x.len());
    let context = format!("point {point}, mode {}", mode.label);
    let spec = welch_psd(x, fs, n, 0.5, sim.window).map_err(|e| from_core(&context, e))?;

    let fitted = fit_lorentzian(&spec, mode.f0).and_then(|fit| Ok((fit, thermometry(&spec, mode, &fit)?)));
    let (method, fit, thermo) = match fitted {
        Ok((fit, th)) => ("fit", Some(FitReport::new(&fit, &th)), th),
        Err(e) => {
            log::warn!("{context}: Lorentzian fit failed ({e}); integrating the expected band");
            let th = integrate_band(&spec, mode, gamma_total, 0.0).map_err(|e| from_core(&context, e))?;
            ("band", None, th)
        }
    };
    let peak = spec
        .peak_in(thermo.band_lo, thermo.band_hi)
        .map(|(_, p)| p)
        .unwrap_or(0.0);

    let name = format!("spectrum_p{point}_{}.csv", mode.label);
    ctx.out.write_with(&name, |w| Ok(spectral::write_csv(&spec, w, true)?))?;
    Ok(ModeReport {
        label: mode.label,
        f0_hz: mode.f0,
        gamma_fb_per_s: gamma_fb,
        t_ideal_k: analytic_mode_temperature(mode, gamma_fb).map_err(|e| from_core(&context, e))?,
        t_mode_k: thermo.t_mode,
        a_rms_m: thermo.a_rms,
        n_ph: thermo.n_ph,
        peak_psd_m2_per_hz: peak,
        method,
        fit,
        spectrum_csv: name,
    })
}

fn run_point(ctx: &Context, point: usize, gains: &[f64]) -> Result<PointReport, CliError> {
    let seed = derive_seed(ctx.seed, point as u64);
    let cfg = ctx.scenario.sim_config(gains, seed)?;
    log::info!("point {point}: gains {gains:?}");
    let traj = run(&cfg).map_err(|e| from_core(&format!("point {point}"), e))?;

    let stride = ctx.scenario.simulation()?.trajectory_stride;
    let trajectory_csv = if stride > 0 {
        let name = format!("trajectory_p{point}.csv");
        ctx.out.write_with(&name, |w| Ok(core_sim::write_csv(&traj, w, stride)?))?;
        Some(name)
    } else {
        None
    };

    let mut gain_entries = Vec::new();
    for f in &cfg.feedback {
        let mode = ctx.scenario.mode(f.mode)?;
        gain_entries.push(GainEntry {
            mode: f.mode,
            gain: f.gain,
            gamma_fb_per_s: f.gamma_fb(mode).map_err(|e| from_core("feedback", e))?,
        });
    }
    let modes = (0..cfg.modes.len())
        .map(|i| analyse_mode(ctx, &cfg, &traj, i, point))
        .collect::<Result<_, _>>()?;
    Ok(PointReport {
        index: point,
        seed,
        gains: gain_entries,
        trajectory_csv,
        modes,
    })
}

pub fn simulate(ctx: &Context) -> Result<SimulateReport, CliError> {
    let sim = ctx.scenario.simulation()?;
    if ctx.scenario.modes.is_empty() {
        return Err(CliError::config("", "modes", "at least one mode is required"));
    }
    let schedule = ctx.scenario.gain_schedule()?;
    let points = schedule
        .par_iter()
        .enumerate()
        .map(|(p, gains)| run_point(ctx, p, gains))
        .collect::<Result<Vec<_>, _>>()?;
    let report = SimulateReport {
        command: "simulate",
        seed: ctx.seed,
        dt_s: sim.dt_s,
        duration_s: sim.duration_s,
        points,
    };
    ctx.out.write_json("report.json", &report)?;
    Ok(report)
}
