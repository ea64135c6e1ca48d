//! Cooling limits set by thermal force noise and detection noise.

use serde::Serialize;

use levitwin_core::model::{min_temperature, single_phonon_temperature};
use levitwin_core::ModeLabel;

use super::Context;
use crate::error::{from_core, CliError};

#[derive(Debug, Serialize)]
pub struct LimitsReport {
    pub command: &'static str,
    pub scenarios: Vec<LimitEntry>,
}

#[derive(Debug, Serialize)]
pub struct LimitEntry {
    pub name: String,
    pub mode: ModeLabel,
    pub f0_hz: f64,
    pub q_factor: f64,
    pub t_env_k: f64,
    pub detection_asd_m_per_rthz: f64,
    pub s_f_n2_per_hz: f64,
    pub t_min_k: f64,
    pub n_ph_min: f64,
    pub x_zpm_m: f64,
    pub t_single_phonon_k: f64,
}

pub fn limits(ctx: &Context) -> Result<LimitsReport, CliError> {
    if ctx.scenario.limits.is_empty() {
        return Err(CliError::config("", "limits", "no [[limits]] scenarios declared"));
    }
    let mut scenarios = Vec::new();
    for (i, l) in ctx.scenario.limits.iter().enumerate() {
        let path = format!("limits[{i}]");
        let base = ctx.scenario.mode(l.mode)?;
        let q = base.q_factor * l.q_scale;
        let mode = base.clone().with_t_env(l.t_env_k.unwrap_or(base.t_env)).with_q(q);
        let lim = min_temperature(&mode, l.detection_asd_m_per_rthz.powi(2)).map_err(|e| from_core(&path, e))?;
        scenarios.push(LimitEntry {
            name: l.name.clone(),
            mode: l.mode,
            f0_hz: mode.f0,
            q_factor: mode.q_factor,
            t_env_k: mode.t_env,
            detection_asd_m_per_rthz: l.detection_asd_m_per_rthz,
            s_f_n2_per_hz: lim.s_f,
            t_min_k: lim.t_min,
            n_ph_min: lim.n_ph_min,
            x_zpm_m: lim.x_zpm,
            t_single_phonon_k: single_phonon_temperature(mode.f0).map_err(|e| from_core(&path, e))?,
        });
    }
    let report = LimitsReport {
        command: "limits",
        scenarios,
    };
    ctx.out.write_json("limits.json", &report)?;
    Ok(report)
}
