//! Scenario files: TOML with SI units spelled out in every key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use levitwin_core::calibration::{CalibrationDrive, DetectionChain};
use levitwin_core::isolation::{IsolationChain, PumpLines};
use levitwin_core::simulate::{DisturbanceTone, FeedbackConfig, InitialState, NonlinearCoupling, SimConfig};
use levitwin_core::spectral::Window;
use levitwin_core::{ModeLabel, ModeParams};

use crate::error::CliError;

/// Scenarios compiled into the binary, selectable with `--preset`.
pub const PRESETS: [(&str, &str); 5] = [
    ("mode34_sweep", include_str!("../presets/mode34_sweep.toml")),
    ("paper_conclusion_20mk", include_str!("../presets/paper_conclusion_20mk.toml")),
    ("paper_extreme", include_str!("../presets/paper_extreme.toml")),
    ("calibration_mode3", include_str!("../presets/calibration_mode3.toml")),
    ("isolation_default", include_str!("../presets/isolation_default.toml")),
];

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub modes: Vec<ModeParams>,
    #[serde(default)]
    pub simulation: Option<Simulation>,
    #[serde(default)]
    pub feedback: Vec<FeedbackSpec>,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceTone>,
    #[serde(default)]
    pub coupling: Option<NonlinearCoupling>,
    #[serde(default)]
    pub chain: Option<DetectionChain>,
    #[serde(default)]
    pub calibration: Option<CalibrationSpec>,
    #[serde(default)]
    pub isolation: Option<IsolationSpec>,
    #[serde(default)]
    pub limits: Vec<LimitScenario>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Simulation {
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub settle_s: f64,
    #[serde(default)]
    pub detector_noise_asd_m_per_rthz: f64,
    #[serde(default = "default_true")]
    pub thermal_noise: bool,
    #[serde(default)]
    pub initial: Vec<InitialState>,
    #[serde(default)]
    pub allow_short: bool,
    /// Keep every n-th sample in the trajectory CSV; 0 disables it.
    #[serde(default = "default_stride")]
    pub trajectory_stride: usize,
    #[serde(default)]
    pub window: Window,
    #[serde(default = "default_bins")]
    pub bins_per_linewidth: f64,
    /// Independent runs per sweep point.
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    10
}

fn default_bins() -> f64 {
    10.0
}

fn default_realizations() -> usize {
    1
}

/// A controller plus the gains to step it through.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct FeedbackSpec {
    #[serde(flatten)]
    pub config: FeedbackConfig,
    /// Explicit gains for each sweep point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_gains: Option<Vec<f64>>,
    /// Sweep points as Γ_FB / Γ0 of the target mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_gamma_ratios: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    pub mode: ModeLabel,
    pub drive: CalibrationDrive,
    /// Sensitivities to invert into β² and dΦ/dx for the report, V/m.
    #[serde(default)]
    pub target_dv_dx_v_per_m: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct IsolationSpec {
    #[serde(flatten)]
    pub chain: IsolationChain,
    #[serde(default = "default_f_lo")]
    pub f_lo_hz: f64,
    #[serde(default = "default_f_hi")]
    pub f_hi_hz: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Band whose attenuation extrema are reported.
    #[serde(default = "default_band")]
    pub band_hz: [f64; 2],
    #[serde(default)]
    pub pump: Option<PumpLines>,
    /// Mode receiving the pump-line tones.
    #[serde(default)]
    pub pump_mode: Option<ModeLabel>,
}

fn default_f_lo() -> f64 {
    0.1
}

fn default_f_hi() -> f64 {
    100.0
}

fn default_points() -> usize {
    2000
}

fn default_band() -> [f64; 2] {
    [50.0, 70.0]
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LimitScenario {
    pub name: String,
    pub mode: ModeLabel,
    /// Overrides the mode's environment temperature.
    #[serde(default)]
    pub t_env_k: Option<f64>,
    #[serde(default = "default_one")]
    pub q_scale: f64,
    pub detection_asd_m_per_rthz: f64,
}

fn default_one() -> f64 {
    1.0
}

impl Scenario {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let de = toml::Deserializer::parse(text).map_err(|e| CliError::config(origin, "", e.to_string().trim_end()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(origin, &path, e.into_inner().message().to_string())
        })
    }

    pub fn load(config: Option<&Path>, preset: Option<&str>) -> Result<Self, CliError> {
        match (config, preset) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(&path.display().to_string(), "", e.to_string()))?;
                Self::parse(&text, &path.display().to_string())
            }
            (None, Some(name)) => {
                let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
                    let known: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
                    CliError::config(name, "", format!("unknown preset; known presets: {}", known.join(", ")))
                })?;
                Self::parse(text, name)
            }
            (Some(_), Some(_)) => Err(CliError::config("", "", "use either --config or --preset, not both")),
            (None, None) => Err(CliError::config("", "", "a scenario is required: pass --config <path> or --preset <name>")),
        }
    }

    pub fn mode(&self, label: ModeLabel) -> Result<&ModeParams, CliError> {
        self.modes
            .iter()
            .find(|m| m.label == label)
            .ok_or_else(|| CliError::config("", "modes", format!("mode `{label}` is not declared")))
    }

    pub fn simulation(&self) -> Result<&Simulation, CliError> {
        self.simulation
            .as_ref()
            .ok_or_else(|| CliError::config("", "simulation", "missing [simulation] section"))
    }

    /// Gains of every controller at each sweep point. Controllers without a
    /// sweep keep their configured gain at all points.
    pub fn gain_schedule(&self) -> Result<Vec<Vec<f64>>, CliError> {
        let mut lists = Vec::new();
        for (i, f) in self.feedback.iter().enumerate() {
            let list = match (&f.sweep_gains, &f.sweep_gamma_ratios) {
                (Some(_), Some(_)) => {
                    return Err(CliError::config(
                        "",
                        &format!("feedback[{i}]"),
                        "give sweep_gains or sweep_gamma_ratios, not both",
                    ))
                }
                (Some(g), None) => g.clone(),
                (None, Some(r)) => {
                    let mode = self.mode(f.config.mode)?;
                    r.iter()
                        .map(|ratio| f.config.gain_for_gamma_fb(mode, ratio * mode.gamma0()))
                        .collect::<Result<_, _>>()
                        .map_err(|e| CliError::config("", &format!("feedback[{i}]"), e.to_string()))?
                }
                (None, None) => vec![f.config.gain],
            };
            lists.push(list);
        }
        let points = lists.iter().map(Vec::len).max().unwrap_or(1);
        if lists.iter().any(|l| l.len() != 1 && l.len() != points) {
            return Err(CliError::config("", "feedback", "all gain sweeps must have the same length"));
        }
        Ok((0..points)
            .map(|p| lists.iter().map(|l| if l.len() == 1 { l[0] } else { l[p] }).collect())
            .collect())
    }

    /// Simulator configuration with the given controller gains.
    pub fn sim_config(&self, gains: &[f64], seed: u64) -> Result<SimConfig, CliError> {
        let s = self.simulation()?;
        let mut c = SimConfig::new(self.modes.clone(), s.dt_s, s.duration_s, seed);
        c.settle = s.settle_s;
        c.detector_noise_asd = s.detector_noise_asd_m_per_rthz;
        c.thermal_noise = s.thermal_noise;
        c.initial = s.initial.clone();
        c.allow_short = s.allow_short;
        c.disturbances = self.disturbances.clone();
        c.coupling = self.coupling.clone();
        c.feedback = self
            .feedback
            .iter()
            .zip(gains)
            .map(|(f, &g)| FeedbackConfig {
                gain: g,
                ..f.config.clone()
            })
            .collect();
        c.validate().map_err(|e| CliError::config("", "", e.to_string()))?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, text) in PRESETS {
            Scenario::parse(text, name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let text = "[chain]\nl_pu_h = 6.7e-7\nl_in_h = 1.8e-6\nl_cal_h = 2e-9\nm_in_sq_h = 4.1e-9\nv_per_phi0 = 0.43\n";
        let err = Scenario::parse(text, "t").unwrap_err();
        assert!(err.to_string().contains("l_tp"), "{err}");
    }

    #[test]
    fn sweep_lengths_must_agree() {
        let mut s = Scenario::parse(PRESETS[0].1, "p").unwrap();
        s.feedback[0].sweep_gamma_ratios = Some(vec![1.0, 2.0]);
        assert!(s.gain_schedule().is_err());
    }
}
