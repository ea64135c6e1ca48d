//! Monte-Carlo gain sweep with several realizations per point.

use serde::Serialize;

use levitwin_core::simulate::derive_seed;
use levitwin_core::sweep::{sweep_gain, SweepConfig, SweepPoint};
use levitwin_core::ModeLabel;

use super::Context;
use crate::error::{from_core, CliError};

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub command: &'static str,
    pub seed: u64,
    pub realizations: usize,
    pub points: Vec<SweepRow>,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub mode: ModeLabel,
    #[serde(flatten)]
    pub stats: SweepPoint,
}

const CSV_HEADER: &str = "index,mode,gain,gamma_fb_per_s,realizations,t_band_k,t_band_sem_k,t_true_k,t_true_sem_k,t_inloop_k,t_ideal_k,n_ph_band";

pub fn sweep(ctx: &Context) -> Result<SweepReport, CliError> {
    let sim = ctx.scenario.simulation()?;
    if ctx.scenario.feedback.is_empty() {
        return Err(CliError::config("", "feedback", "a gain sweep needs at least one controller"));
    }
    let schedule = ctx.scenario.gain_schedule()?;
    let mut rows = Vec::new();
    for (p, gains) in schedule.iter().enumerate() {
        // Every controller sits at its point-p gain; each cooled mode is then
        // measured on the same seeded realizations.
        let base = ctx.scenario.sim_config(gains, derive_seed(ctx.seed, p as u64))?;
        for (i, fb) in base.feedback.iter().enumerate() {
            if base.feedback[..i].iter().any(|f| f.mode == fb.mode) {
                continue;
            }
            let cfg = SweepConfig {
                base: base.clone(),
                target: fb.mode,
                gains: vec![fb.gain],
                realizations: sim.realizations,
                bins_per_linewidth: sim.bins_per_linewidth,
                window: sim.window,
            };
            let stats = sweep_gain(&cfg).map_err(|e| from_core(&format!("point {p}, mode {}", fb.mode), e))?;
            rows.push(SweepRow {
                index: p,
                mode: fb.mode,
                stats: stats[0],
            });
        }
    }

    ctx.out.write_with("sweep.csv", |w| {
        use std::io::Write;
        writeln!(w, "{CSV_HEADER}")?;
        for r in &rows {
            let s = &r.stats;
            writeln!(
                w,
                "{},{},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.index,
                r.mode,
                s.gain,
                s.gamma_fb_per_s,
                s.realizations,
                s.t_band_k,
                s.t_band_sem_k,
                s.t_true_k,
                s.t_true_sem_k,
                s.t_inloop_k,
                s.t_ideal_k,
                s.n_ph_band
            )?;
        }
        Ok(())
    })?;
    let report = SweepReport {
        command: "sweep-gain",
        seed: ctx.seed,
        realizations: sim.realizations,
        points: rows,
    };
    ctx.out.write_json("sweep.json", &report)?;
    Ok(report)
}
