//! Transmissibility of the isolation chain and its resonances.

use serde::Serialize;

use levitwin_core::isolation::{
    attenuation_db, disturbance_profile, log_grid, resonance_catalog, write_bode_csv, Resonance,
};
use levitwin_core::simulate::DisturbanceTone;

use super::Context;
use crate::error::{from_core, CliError};

#[derive(Debug, Serialize)]
pub struct IsolationReport {
    pub command: &'static str,
    pub stages: usize,
    pub band_hz: [f64; 2],
    pub band_attenuation_min_db: f64,
    pub band_attenuation_max_db: f64,
    pub resonances: Vec<Resonance>,
    pub bode_csv: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub pump_tones: Vec<DisturbanceTone>,
}

pub fn isolation(ctx: &Context) -> Result<IsolationReport, CliError> {
    let spec = ctx
        .scenario
        .isolation
        .as_ref()
        .ok_or_else(|| CliError::config("", "isolation", "missing [isolation] section"))?;
    let chain = &spec.chain;
    chain.validate().map_err(|e| from_core("isolation", e))?;
    if !(spec.f_lo_hz > 0.0 && spec.f_hi_hz > spec.f_lo_hz) || spec.points < 2 {
        return Err(CliError::config("", "isolation", "grid needs 0 < f_lo_hz < f_hi_hz and at least 2 points"));
    }
    let [band_lo, band_hi] = spec.band_hz;
    let (min_db, max_db) = attenuation_db(chain, band_lo, band_hi).map_err(|e| from_core("isolation.band_hz", e))?;
    let resonances = resonance_catalog(chain).map_err(|e| from_core("isolation", e))?;

    let freqs = log_grid(spec.f_lo_hz, spec.f_hi_hz, spec.points);
    let bode_csv = "bode.csv".to_string();
    ctx.out.write_with(&bode_csv, |w| Ok(write_bode_csv(chain, &freqs, w)?))?;

    let pump_tones = match (&spec.pump, spec.pump_mode) {
        (Some(pump), Some(label)) => {
            let mode = ctx.scenario.mode(label)?;
            disturbance_profile(chain, pump, mode).map_err(|e| from_core("isolation.pump", e))?
        }
        (Some(_), None) => return Err(CliError::config("", "isolation.pump_mode", "required when pump lines are given")),
        _ => Vec::new(),
    };

    let report = IsolationReport {
        command: "isolation",
        stages: chain.stages.len(),
        band_hz: spec.band_hz,
        band_attenuation_min_db: min_db,
        band_attenuation_max_db: max_db,
        resonances,
        bode_csv,
        pump_tones,
    };
    ctx.out.write_json("isolation.json", &report)?;
    Ok(report)
}
