//! In-silico calibration through the flux readout chain.

use serde::Serialize;

use levitwin_core::calibration::{
    beta_sq_from_flux_gradient, flux_gradient_from_volts_per_meter, simulate_calibration, CalibrationReport,
};

use super::Context;
use crate::error::{from_core, CliError};

#[derive(Debug, Serialize)]
pub struct CalibrateReport {
    pub command: &'static str,
    pub calibration: CalibrationReport,
    /// Chain inversion of the requested sensitivities.
    pub targets: Vec<TargetInversion>,
}

#[derive(Debug, Serialize)]
pub struct TargetInversion {
    pub dv_dx_v_per_m: f64,
    pub dphi_dx_wb_per_m: f64,
    pub beta_sq: f64,
}

pub fn calibrate(ctx: &Context) -> Result<CalibrateReport, CliError> {
    let chain = ctx
        .scenario
        .chain
        .as_ref()
        .ok_or_else(|| CliError::config("", "chain", "missing [chain] section"))?;
    let spec = ctx
        .scenario
        .calibration
        .as_ref()
        .ok_or_else(|| CliError::config("", "calibration", "missing [calibration] section"))?;
    let mode = ctx.scenario.mode(spec.mode)?;
    let mut drive = spec.drive.clone();
    if let Some(seed) = ctx.seed_override {
        drive.seed = seed;
    }
    let calibration = simulate_calibration(chain, mode, &drive).map_err(|e| from_core("calibration", e))?;
    for w in &calibration.warnings {
        log::warn!("{w}");
    }
    let targets = spec
        .target_dv_dx_v_per_m
        .iter()
        .enumerate()
        .map(|(i, &dv_dx)| {
            let path = format!("calibration.target_dv_dx_v_per_m[{i}]");
            let dphi = flux_gradient_from_volts_per_meter(chain, dv_dx).map_err(|e| from_core(&path, e))?;
            Ok(TargetInversion {
                dv_dx_v_per_m: dv_dx,
                dphi_dx_wb_per_m: dphi,
                beta_sq: beta_sq_from_flux_gradient(chain, mode, dphi).map_err(|e| from_core(&path, e))?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    let report = CalibrateReport {
        command: "calibrate",
        calibration,
        targets,
    };
    ctx.out.write_json("calibration.json", &report)?;
    Ok(report)
}
