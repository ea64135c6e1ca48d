//! Digital twin of a magnetically levitated milligram-scale mechanical sensor
//! under linear feedback cooling.
//!
//! The crate is organised by subsystem:
//!
//! * [`model`]: closed-form physics of a feedback-damped mode (PSD, force noise,
//!   mode temperature, phonon number, cooling limits, zero-point motion).
//! * [`simulate`]: time-domain Langevin integration with a lock-in style
//!   narrow-band feedback controller, detector noise and nonlinear coupling.
//! * [`spectral`]: Welch PSD estimation, filter compensation, Lorentzian fitting
//!   and band-integrated thermometry.
//! * [`calibration`]: flux-to-motion calibration through the SQUID readout chain.
//! * [`isolation`]: lumped multistage mass-spring vibration isolation.
//! * [`sweep`]: seeded Monte-Carlo gain sweeps.

pub mod calibration;
pub mod constants;
pub mod error;
pub mod isolation;
pub mod model;
pub mod simulate;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
pub use model::{CoolingLimits, ModeKind, ModeLabel, ModeParams};
