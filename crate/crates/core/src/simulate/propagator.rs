//! Exact one-step discretization of a damped harmonic oscillator driven by
//! white force noise and a zero-order-held deterministic force.

use num_complex::Complex64;

use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::model::ModeParams;

/// Per-step update `s' = Φ s + Ψ a + L ξ` for the state `s = (x, v)`, where
/// `a` is the held acceleration and `ξ` two independent unit normals.
#[derive(Debug, Clone, Copy)]
pub struct Propagator {
    pub phi: [[f64; 2]; 2],
    /// Response of (x, v) to a unit acceleration held over one step.
    pub psi: [f64; 2],
    /// Lower Cholesky factor of the per-step noise covariance.
    pub chol: [[f64; 2]; 2],
    /// Per-step noise covariance (Q11, Q12, Q22).
    pub cov: [f64; 3],
}

impl Propagator {
    /// Builds the propagator for `mode` over step `dt`.
    ///
    /// The noise covariance is the exact integral of the Langevin kernel, which
    /// equals the discrete Lyapunov solution `P − Φ P Φᵀ` for the stationary
    /// covariance `P = diag(kB T / k, kB T / m)`, evaluated without the
    /// cancellation that form suffers at high Q.
    pub fn new(mode: &ModeParams, dt: f64) -> Result<Self> {
        mode.validate()?;
        if mode.q_factor <= 0.5 {
            return Err(Error::invalid("q_factor", "overdamped modes (Q <= 0.5) are not supported"));
        }
        let m = mode.effective_inertia()?;
        let w0 = mode.omega0();
        let g = mode.gamma0();
        let wd = (w0 * w0 - 0.25 * g * g).sqrt();
        let decay = (-0.5 * g * dt).exp();
        let (s, c) = (wd * dt).sin_cos();
        let r = 0.5 * g / wd;

        let phi = [
            [decay * (c + r * s), decay * s / wd],
            [-decay * w0 * w0 * s / wd, decay * (c - r * s)],
        ];
        let x_eq = 1.0 / (w0 * w0);
        let psi = [x_eq * (1.0 - phi[0][0]), -x_eq * phi[1][0]];

        // Two-sided acceleration noise intensity: ⟨a(t) a(t')⟩ = q δ(t − t').
        let q = 2.0 * g * K_B * mode.t_env / m;
        let e0 = if g * dt < 1e-300 { dt } else { -(-g * dt).exp_m1() / g };
        let p = Complex64::new(-g, 2.0 * wd);
        let osc = complex_exp_m1(p * dt) / p;
        let (c2, s2) = (osc.re, osc.im);
        // For small wd·dt, e0 − c2 is a difference of nearly equal numbers;
        // evaluate ∫ e^{−gτ} 2 sin²(wd τ) dτ by series instead.
        let e0_minus_c2 = if wd * dt < 1e-2 {
            sin2_integral(g, wd, dt)
        } else {
            e0 - c2
        };
        let q11 = q / (wd * wd) * 0.5 * e0_minus_c2;
        let q12 = q / wd * (0.5 * s2 - r * 0.5 * e0_minus_c2);
        let q22 = q * (0.5 * (e0 + c2) - r * s2 + r * r * 0.5 * e0_minus_c2);

        let l11 = q11.max(0.0).sqrt();
        let l21 = if l11 > 0.0 { q12 / l11 } else { 0.0 };
        let l22 = (q22 - l21 * l21).max(0.0).sqrt();
        Ok(Propagator {
            phi,
            psi,
            chol: [[l11, 0.0], [l21, l22]],
            cov: [q11, q12, q22],
        })
    }

    #[inline]
    pub fn step(&self, state: [f64; 2], accel: f64, xi: [f64; 2]) -> [f64; 2] {
        let [x, v] = state;
        [
            self.phi[0][0] * x + self.phi[0][1] * v + self.psi[0] * accel + self.chol[0][0] * xi[0],
            self.phi[1][0] * x
                + self.phi[1][1] * v
                + self.psi[1] * accel
                + self.chol[1][0] * xi[0]
                + self.chol[1][1] * xi[1],
        ]
    }
}

/// `e^z − 1` without cancellation for small |z|.
fn complex_exp_m1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * c - 2.0 * half * half, z.re.exp() * s)
}

/// ∫₀^dt e^{−gτ}(1 − cos 2wτ) dτ via its Taylor series in τ (valid for w·dt ≪ 1).
fn sin2_integral(g: f64, w: f64, dt: f64) -> f64 {
    // 1 − cos 2wτ = Σ_{n≥1} (−1)^{n+1} (2wτ)^{2n} / (2n)!
    // ∫ e^{−gτ} τ^j dτ evaluated by the same series in g.
    let mut total = 0.0;
    let mut coeff = 1.0;
    for n in 1..8 {
        let k = 2 * n;
        coeff *= -(2.0 * w).powi(2) / ((k * (k - 1)) as f64);
        let moment = exp_moment(g, k, dt);
        total -= coeff * moment;
    }
    total
}

/// ∫₀^dt e^{−gτ} τ^k dτ by series in g·τ.
fn exp_moment(g: f64, k: usize, dt: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for j in 0..30 {
        if j > 0 {
            term *= -g / j as f64;
        }
        let contrib = term * dt.powi((k + j + 1) as i32) / (k + j + 1) as f64;
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}
