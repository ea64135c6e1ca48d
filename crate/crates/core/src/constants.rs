//! Physical constants (CODATA 2018 exact values).

/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Magnetic flux quantum h/2e, Wb.
pub const PHI_0: f64 = 2.067_833_848e-15;
