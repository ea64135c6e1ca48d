use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("rotational mode `{0}` has no moment of inertia")]
    MissingInertia(String),

    #[error("integration unstable in mode `{mode}` at step {step}: |x| = {value:e} m exceeds {limit:e} m")]
    Unstable {
        mode: String,
        step: usize,
        value: f64,
        limit: f64,
    },

    #[error("series of {series} samples is shorter than required ({required})")]
    SeriesTooShort { series: usize, required: usize },

    #[error("band [{lo} Hz, {hi} Hz] is outside the spectrum range [{min} Hz, {max} Hz]")]
    BandOutOfRange { lo: f64, hi: f64, min: f64, max: f64 },

    #[error("filter response is below the validity floor over the whole band")]
    FullyInvalidBand,

    #[error("Lorentzian fit did not converge after {iterations} iterations (best residual {residual:e})")]
    FitNotConverged { iterations: usize, residual: f64 },

    #[error("energy coupling beta^2 = {0} is unphysical (must be < 1)")]
    UnphysicalCoupling(f64),

    #[error("coupling out of perturbative regime: |c * A| = {0} (must be < 0.1)")]
    NonPerturbative(f64),

    #[error("singular isolation system at {0} Hz (zero damping at resonance)")]
    Singular(f64),

    #[error("unknown mode label `{0}`")]
    UnknownMode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

/// Rejects NaN/infinite values and values failing `ok`.
pub(crate) fn check(name: &'static str, value: f64, ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::invalid(name, format!("non-finite value {value}")));
    }
    if !ok(value) {
        return Err(Error::invalid(name, format!("{value} must be {what}")));
    }
    Ok(())
}

pub(crate) fn positive(name: &'static str, value: f64) -> Result<()> {
    check(name, value, |v| v > 0.0, "> 0")
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<()> {
    check(name, value, |v| v >= 0.0, ">= 0")
}
