//! Time-domain Langevin simulation of levitated modes under feedback.
//!
//! Each mode is an independent oscillator
//!
//! ```text
//! m ẍ + γ0 ẋ + k x = F_th + F_FB + F_dist + F_coupling
//! ```
//!
//! integrated with its exact one-step propagator ([`Propagator`]). Deterministic
//! forces (feedback, disturbance tones, coupling) are held constant over a step.
//! All modes are read by one detector whose position-equivalent output feeds
//! every controller, as with a single pick-up coil read out by one lock-in.

mod coupling;
mod detector;
mod export;
mod lockin;
mod propagator;

use std::collections::VecDeque;
use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use coupling::{apply_coupling, NonlinearCoupling};
pub use detector::{detector, white_noise_sigma};
pub use export::{read_binary, write_binary, write_csv};
pub use lockin::{lockin_controller, Biquad, Butterworth4, Controller, ControllerKind, FeedbackConfig, FILTER_ORDER};
pub use propagator::Propagator;

use crate::constants::K_B;
use crate::error::{check, non_negative, positive, Error, Result};
use crate::model::{ModeLabel, ModeParams};

/// Deterministic force tone, optionally gated in time and steered to one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceTone {
    #[serde(rename = "f_hz")]
    pub f: f64,
    #[serde(rename = "force_amplitude_n")]
    pub force_amplitude: f64,
    #[serde(rename = "phase_rad", default)]
    pub phase: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeLabel>,
    #[serde(rename = "start_s", default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(rename = "stop_s", default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
}

impl DisturbanceTone {
    pub fn new(f: f64, force_amplitude: f64, phase: f64) -> Self {
        DisturbanceTone {
            f,
            force_amplitude,
            phase,
            mode: None,
            start: None,
            stop: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("disturbance.f", self.f)?;
        check("disturbance.force_amplitude", self.force_amplitude, |_| true, "finite")?;
        check("disturbance.phase", self.phase, |_| true, "finite")?;
        Ok(())
    }

    #[inline]
    pub fn force(&self, t: f64) -> f64 {
        if self.start.is_some_and(|s| t < s) || self.stop.is_some_and(|s| t >= s) {
            return 0.0;
        }
        self.force_amplitude * (TAU * self.f * t + self.phase).cos()
    }
}

/// Initial state of a mode.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "type")]
pub enum InitialState {
    /// Drawn from the thermal distribution at the environment temperature.
    #[default]
    Thermal,
    At {
        #[serde(rename = "x_m")]
        x: f64,
        #[serde(rename = "v_mps")]
        v: f64,
    },
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Integrator step, s.
    #[serde(rename = "dt_s")]
    pub dt: f64,
    /// Recorded duration, s.
    #[serde(rename = "duration_s")]
    pub duration: f64,
    /// Discarded lead-in before recording starts, s.
    #[serde(rename = "settle_s", default)]
    pub settle: f64,
    pub seed: u64,
    pub modes: Vec<ModeParams>,
    #[serde(default)]
    pub feedback: Vec<FeedbackConfig>,
    #[serde(rename = "detector_noise_asd_m_per_rthz", default)]
    pub detector_noise_asd: f64,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceTone>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<NonlinearCoupling>,
    #[serde(default = "default_true")]
    pub thermal_noise: bool,
    /// One entry per mode; thermal when empty.
    #[serde(default)]
    pub initial: Vec<InitialState>,
    /// Permits records shorter than 100 periods of the slowest mode.
    #[serde(default)]
    pub allow_short: bool,
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    pub fn new(modes: Vec<ModeParams>, dt: f64, duration: f64, seed: u64) -> Self {
        SimConfig {
            dt,
            duration,
            settle: 0.0,
            seed,
            modes,
            feedback: Vec::new(),
            detector_noise_asd: 0.0,
            disturbances: Vec::new(),
            coupling: None,
            thermal_noise: true,
            initial: Vec::new(),
            allow_short: false,
        }
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    /// Number of recorded samples, ⌊duration / dt⌋.
    pub fn len(&self) -> usize {
        (self.duration / self.dt + 1e-9).floor() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode_index(&self, label: ModeLabel) -> Option<usize> {
        self.modes.iter().position(|m| m.label == label)
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        positive("duration", self.duration)?;
        non_negative("settle", self.settle)?;
        non_negative("detector_noise_asd", self.detector_noise_asd)?;
        if self.modes.is_empty() {
            return Err(Error::invalid("modes", "at least one mode is required"));
        }
        for (i, m) in self.modes.iter().enumerate() {
            m.validate()?;
            if self.modes[..i].iter().any(|o| o.label == m.label) {
                return Err(Error::invalid("modes", format!("duplicate mode label `{}`", m.label)));
            }
        }
        let f_max = self.modes.iter().map(|m| m.f0).fold(0.0, f64::max);
        let f_min = self.modes.iter().map(|m| m.f0).fold(f64::INFINITY, f64::min);
        if self.dt > 1.0 / (50.0 * f_max) * (1.0 + 1e-12) {
            return Err(Error::invalid(
                "dt",
                format!("{} s exceeds 1/(50 f_max) = {} s", self.dt, 1.0 / (50.0 * f_max)),
            ));
        }
        if !self.allow_short && self.duration < 100.0 / f_min {
            return Err(Error::invalid(
                "duration",
                format!("{} s is shorter than 100 periods of the slowest mode", self.duration),
            ));
        }
        for (i, fb) in self.feedback.iter().enumerate() {
            fb.validate()?;
            if self.mode_index(fb.mode).is_none() {
                return Err(Error::UnknownMode(fb.mode.to_string()));
            }
            if self.feedback[..i].iter().any(|o| o.mode == fb.mode) {
                return Err(Error::invalid("feedback", format!("mode `{}` has two controllers", fb.mode)));
            }
        }
        for d in &self.disturbances {
            d.validate()?;
            if let Some(l) = d.mode {
                self.mode_index(l).ok_or_else(|| Error::UnknownMode(l.to_string()))?;
            }
        }
        if let Some(c) = &self.coupling {
            c.validate()?;
            if let Some(l) = c.mode {
                self.mode_index(l).ok_or_else(|| Error::UnknownMode(l.to_string()))?;
            }
        }
        if !self.initial.is_empty() && self.initial.len() != self.modes.len() {
            return Err(Error::invalid("initial", "one initial state per mode is required"));
        }
        Ok(())
    }
}

/// Work done on a mode by each force channel over the recorded span, J.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub initial_energy: f64,
    pub final_energy: f64,
    pub feedback_work: f64,
    pub disturbance_work: f64,
    pub coupling_work: f64,
    /// Net exchange with the bath (thermal force plus intrinsic damping),
    /// obtained as the balance of the other channels.
    pub bath_exchange: f64,
}

/// Recorded state of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub labels: Vec<ModeLabel>,
    pub t: Vec<f64>,
    /// Position per mode, m (rad for rotational modes).
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Position-equivalent detector output including detection noise, m.
    pub detector: Vec<f64>,
    /// Labels of the cooled modes, in controller order.
    pub feedback_labels: Vec<ModeLabel>,
    /// Feedback force per cooled mode, N.
    pub feedback_force: Vec<Vec<f64>>,
    pub energy: Vec<EnergyLedger>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn position(&self, label: ModeLabel) -> Option<&[f64]> {
        self.labels.iter().position(|&l| l == label).map(|i| self.x[i].as_slice())
    }
}

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for stream or run `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(0x5DEE_CE66_D1CE_4E5B)))
}

struct ModeRuntime {
    prop: Propagator,
    mass: f64,
    k: f64,
    rng: ChaCha8Rng,
    state: [f64; 2],
    limit: f64,
    coupled: bool,
}

/// Integrates `config` and returns the recorded trajectory.
pub fn run(config: &SimConfig) -> Result<Trajectory> {
    config.validate()?;
    let fs = config.sample_rate();
    let dt = config.dt;

    let mut modes = Vec::with_capacity(config.modes.len());
    for (i, m) in config.modes.iter().enumerate() {
        let mut prop = Propagator::new(m, dt)?;
        if !config.thermal_noise {
            prop.chol = [[0.0; 2]; 2];
        }
        let mass = m.effective_inertia()?;
        let k = m.spring_constant()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 1 + i as u64));
        let sx = (K_B * m.t_env / k).sqrt();
        let state = match config.initial.get(i).copied().unwrap_or_default() {
            InitialState::Thermal if config.thermal_noise => {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                [sx * a, (K_B * m.t_env / mass).sqrt() * b]
            }
            InitialState::Thermal => [0.0, 0.0],
            InitialState::At { x, v } => [x, v],
        };
        let initial_scale = state[0].abs().max(state[1].abs() / m.omega0());
        // Bound on the response to the deterministic tones, reached on resonance.
        let driven_scale = config
            .disturbances
            .iter()
            .filter(|d| d.mode.is_none_or(|l| l == m.label))
            .map(|d| d.force_amplitude.abs())
            .sum::<f64>()
            * m.q_factor
            / k;
        modes.push(ModeRuntime {
            prop,
            mass,
            k,
            rng,
            state,
            limit: 1e6 * sx.max(initial_scale).max(driven_scale),
            coupled: config.coupling.as_ref().is_some_and(|c| c.applies_to(m.label)),
        });
    }

    let mut controllers = config
        .feedback
        .iter()
        .map(|fb| {
            let target = config.mode_index(fb.mode).expect("validated");
            Ok((Controller::new(fb, fs)?, target, VecDeque::from(vec![0.0; fb.latency_samples])))
        })
        .collect::<Result<Vec<_>>>()?;

    let disturbance_targets: Vec<Vec<usize>> = config
        .disturbances
        .iter()
        .map(|d| match d.mode {
            Some(l) => vec![config.mode_index(l).expect("validated")],
            None => (0..config.modes.len()).collect(),
        })
        .collect();

    let sigma_det = white_noise_sigma(config.detector_noise_asd, fs);
    let mut det_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, 0));

    let settle_steps = (config.settle / dt).round() as usize;
    let len = config.len();
    let n_modes = modes.len();
    let mut traj = Trajectory {
        dt,
        labels: config.modes.iter().map(|m| m.label).collect(),
        t: Vec::with_capacity(len),
        x: vec![Vec::with_capacity(len); n_modes],
        v: vec![Vec::with_capacity(len); n_modes],
        detector: Vec::with_capacity(len),
        feedback_labels: config.feedback.iter().map(|f| f.mode).collect(),
        feedback_force: vec![Vec::with_capacity(len); controllers.len()],
        energy: vec![EnergyLedger::default(); n_modes],
    };

    let energy = |m: &ModeRuntime| 0.5 * m.mass * m.state[1].powi(2) + 0.5 * m.k * m.state[0].powi(2);
    let mut fb_force = vec![0.0; n_modes];
    let mut dist_force = vec![0.0; n_modes];
    let mut ctrl_force = vec![0.0; controllers.len()];

    for step in 0..settle_steps + len {
        let recording = step >= settle_steps;
        let t = (step as f64 - settle_steps as f64) * dt;
        if step == settle_steps {
            for (m, e) in modes.iter().zip(traj.energy.iter_mut()) {
                e.initial_energy = energy(m);
            }
        }

        let noise: f64 = if sigma_det > 0.0 {
            let z: f64 = StandardNormal.sample(&mut det_rng);
            sigma_det * z
        } else {
            0.0
        };
        let det = modes.iter().map(|m| m.state[0]).sum::<f64>() + noise;

        fb_force.iter_mut().for_each(|f| *f = 0.0);
        for ((ctrl, target, queue), out) in controllers.iter_mut().zip(ctrl_force.iter_mut()) {
            queue.push_back(det);
            let input = queue.pop_front().unwrap_or(det);
            let force = -ctrl.process(input);
            *out = force;
            fb_force[*target] += force;
        }

        dist_force.iter_mut().for_each(|f| *f = 0.0);
        for (d, targets) in config.disturbances.iter().zip(&disturbance_targets) {
            let f = d.force(t);
            for &i in targets {
                dist_force[i] += f;
            }
        }

        if recording {
            traj.t.push(t);
            for (i, m) in modes.iter().enumerate() {
                traj.x[i].push(m.state[0]);
                traj.v[i].push(m.state[1]);
            }
            traj.detector.push(det);
            for (series, &f) in traj.feedback_force.iter_mut().zip(&ctrl_force) {
                series.push(f);
            }
        }

        for (i, m) in modes.iter_mut().enumerate() {
            let coupling_force = match (&config.coupling, m.coupled) {
                (Some(c), true) => c.force(m.k, m.state[0], t),
                _ => 0.0,
            };
            let total = fb_force[i] + dist_force[i] + coupling_force;
            let xi = if config.thermal_noise {
                [StandardNormal.sample(&mut m.rng), StandardNormal.sample(&mut m.rng)]
            } else {
                [0.0, 0.0]
            };
            let x_prev = m.state[0];
            m.state = m.prop.step(m.state, total / m.mass, xi);
            if recording {
                let dx = m.state[0] - x_prev;
                let e = &mut traj.energy[i];
                e.feedback_work += fb_force[i] * dx;
                e.disturbance_work += dist_force[i] * dx;
                e.coupling_work += coupling_force * dx;
            }
            if !m.state[0].is_finite() || m.state[0].abs() > m.limit {
                return Err(Error::Unstable {
                    mode: config.modes[i].label.to_string(),
                    step,
                    value: m.state[0].abs(),
                    limit: m.limit,
                });
            }
        }
    }

    for (m, e) in modes.iter().zip(traj.energy.iter_mut()) {
        e.final_energy = energy(m);
        e.bath_exchange =
            e.final_energy - e.initial_energy - e.feedback_work - e.disturbance_work - e.coupling_work;
    }
    Ok(traj)
}
