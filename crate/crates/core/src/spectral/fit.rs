use std::f64::consts::TAU;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{positive, Error, Result};
use crate::model::lorentzian_unchecked;

use super::Spectrum;

/// Knobs for [`fit_lorentzian_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Half-width of the fit window in linewidths.
    pub window_linewidths: f64,
    /// Peak search half-width as a fraction of the guessed frequency.
    pub search_fraction: f64,
    /// Minimum peak-to-floor ratio accepted.
    pub min_snr: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            window_linewidths: 20.0,
            search_fraction: 0.01,
            min_snr: 3.0,
            max_iterations: 200,
        }
    }
}

/// Damped-oscillator fit `A / ((ω0² − ω²)² + ω² Γ²) + C` to a PSD peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub f0_hat: f64,
    /// Total energy decay rate Γ, 1/s.
    pub gamma_total_hat: f64,
    pub amplitude: f64,
    /// Integral of the Lorentzian over all frequencies, A / (4 ω0² Γ).
    pub area: f64,
    pub noise_floor: f64,
    /// RMS relative residual over the fit window.
    pub residual: f64,
    pub snr: f64,
    pub iterations: usize,
    pub window_lo: f64,
    pub window_hi: f64,
}

pub fn fit_lorentzian(spec: &Spectrum, f_guess: f64) -> Result<PeakFit> {
    fit_lorentzian_with(spec, f_guess, &FitOptions::default())
}

/// Fits the peak nearest `f_guess`.
///
/// The largest bin within `±search_fraction · f_guess` seeds the fit; the
/// half-maximum width seeds the linewidth. Two passes are made, the second
/// over a window re-centred on the first result. Residuals are relative to
/// the model, matching the χ²-like scatter of averaged periodograms.
pub fn fit_lorentzian_with(spec: &Spectrum, f_guess: f64, opts: &FitOptions) -> Result<PeakFit> {
    positive("f_guess", f_guess)?;
    positive("window_linewidths", opts.window_linewidths)?;
    positive("search_fraction", opts.search_fraction)?;
    let df = spec.df();
    if spec.len() < 8 || df <= 0.0 {
        return Err(Error::SeriesTooShort {
            series: spec.len(),
            required: 8,
        });
    }
    let span = opts.search_fraction * f_guess;
    let (f_peak, p_peak) = spec
        .peak_in(f_guess - span, f_guess + span)
        .ok_or_else(|| Error::invalid("f_guess", "no valid bins near the guessed frequency"))?;
    let k_peak = spec.bin(f_peak);

    let fwhm = half_max_width(spec, k_peak, p_peak).max(df);
    let floor = floor_estimate(spec, f_peak, fwhm, opts.window_linewidths);
    let snr = if floor > 0.0 { p_peak / floor } else { f64::INFINITY };
    if snr < opts.min_snr {
        return Err(Error::invalid(
            "spectrum",
            format!("peak-to-floor ratio {snr:.2} is below {}", opts.min_snr),
        ));
    }

    let w0 = TAU * f_peak;
    let gamma = TAU * fwhm;
    let mut p = Vector4::new(f_peak, gamma.ln(), ((p_peak - floor).max(p_peak * 0.5) * w0 * w0 * gamma * gamma).ln(), floor);
    let mut total_iterations = 0;
    let mut residual = 0.0;
    let mut window = (0.0, 0.0);
    for _ in 0..2 {
        let half = opts.window_linewidths * p[1].exp() / TAU;
        window = ((p[0] - half).max(spec.f[0]), (p[0] + half).min(spec.f[spec.len() - 1]));
        let bins: Vec<(f64, f64)> = spec
            .f
            .iter()
            .zip(&spec.psd)
            .zip(&spec.valid)
            .filter(|((&f, _), &ok)| ok && f > 0.0 && f >= window.0 && f <= window.1)
            .map(|((&f, &s), _)| (f, s))
            .collect();
        if bins.len() < 5 {
            return Err(Error::SeriesTooShort {
                series: bins.len(),
                required: 5,
            });
        }
        let (q, iters, r) = levenberg_marquardt(&bins, p, opts.max_iterations)?;
        p = q;
        total_iterations += iters;
        residual = r;
    }

    let f0 = p[0];
    let gamma = p[1].exp();
    let amplitude = p[2].exp();
    let w0 = TAU * f0;
    Ok(PeakFit {
        f0_hat: f0,
        gamma_total_hat: gamma,
        amplitude,
        area: amplitude / (4.0 * w0 * w0 * gamma),
        noise_floor: p[3],
        residual,
        snr,
        iterations: total_iterations,
        window_lo: window.0,
        window_hi: window.1,
    })
}

fn model(p: &Vector4<f64>, f: f64) -> f64 {
    lorentzian_unchecked(TAU * p[0], p[1].exp(), 0.0, p[2].exp(), f) + p[3]
}

fn relative_residuals(bins: &[(f64, f64)], p: &Vector4<f64>) -> Vec<f64> {
    bins.iter()
        .map(|&(f, s)| {
            let m = model(p, f);
            (s - m) / m.abs().max(f64::MIN_POSITIVE)
        })
        .collect()
}

fn cost(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn levenberg_marquardt(bins: &[(f64, f64)], mut p: Vector4<f64>, max_iter: usize) -> Result<(Vector4<f64>, usize, f64)> {
    let mut r = relative_residuals(bins, &p);
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        // Forward-difference Jacobian of the model, scaled like the residuals.
        let steps = [
            1e-7 * p[0].abs().max(1e-3),
            1e-6,
            1e-6,
            1e-6 * p[3].abs().max(1e-3 * model(&p, p[0]).abs()),
        ];
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (i, &(f, _)) in bins.iter().enumerate() {
            let m = model(&p, f);
            let scale = m.abs().max(f64::MIN_POSITIVE);
            let mut row = Vector4::zeros();
            for k in 0..4 {
                let mut q = p;
                q[k] += steps[k];
                row[k] = (model(&q, f) - m) / steps[k] / scale;
            }
            jtj += row * row.transpose();
            jtr += row * r[i];
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(delta) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + delta;
            let rt = relative_residuals(bins, &trial);
            let ct = cost(&rt);
            if ct.is_finite() && ct < c && trial.iter().all(|v| v.is_finite()) {
                let rel = (c - ct) / c.max(f64::MIN_POSITIVE);
                p = trial;
                r = rt;
                c = ct;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-12 || delta.iter().zip(p.iter()).all(|(d, v)| d.abs() <= 1e-12 * v.abs().max(1e-30)) {
                    return Ok((p, iterations, (c / bins.len() as f64).sqrt()));
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No descent direction left: converged to numerical precision.
            return Ok((p, iterations, (c / bins.len() as f64).sqrt()));
        }
    }
    Err(Error::FitNotConverged {
        iterations,
        residual: (c / bins.len() as f64).sqrt(),
    })
}

/// Full width at half maximum around bin `k`, interpolated between bins.
fn half_max_width(spec: &Spectrum, k: usize, peak: f64) -> f64 {
    let half = 0.5 * peak;
    let crossing = |dir: isize| -> f64 {
        let mut i = k as isize;
        loop {
            let j = i + dir;
            if j < 0 || j as usize >= spec.len() {
                return (spec.f[i as usize] - spec.f[k]).abs();
            }
            let (pi, pj) = (spec.psd[i as usize], spec.psd[j as usize]);
            if pj <= half {
                let frac = if pi > pj { (pi - half) / (pi - pj) } else { 0.5 };
                return (spec.f[i as usize] + frac * (spec.f[j as usize] - spec.f[i as usize]) - spec.f[k]).abs();
            }
            i = j;
        }
    };
    crossing(-1) + crossing(1)
}

/// Median of the valid bins between 10 and `window` linewidths from the peak.
fn floor_estimate(spec: &Spectrum, f0: f64, fwhm: f64, window: f64) -> f64 {
    let inner = (0.5 * window) * fwhm;
    let outer = window * fwhm;
    let mut vals: Vec<f64> = spec
        .f
        .iter()
        .zip(&spec.psd)
        .zip(&spec.valid)
        .filter(|((&f, _), &ok)| ok && f > 0.0 && (f - f0).abs() >= inner && (f - f0).abs() <= outer)
        .map(|((_, &p), _)| p)
        .collect();
    if vals.is_empty() {
        // Window wider than the spectrum: fall back to every valid bin.
        vals = spec
            .f
            .iter()
            .zip(&spec.psd)
            .zip(&spec.valid)
            .filter(|((&f, _), &ok)| ok && f > 0.0)
            .map(|((_, &p), _)| p)
            .collect();
    }
    if vals.is_empty() {
        return 0.0;
    }
    vals.sort_by(f64::total_cmp);
    vals[vals.len() / 2]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic(f0: f64, gamma: f64, a: f64, c: f64, df: f64) -> Spectrum {
        let f: Vec<f64> = (0..(2.0 * f0 / df) as usize).map(|i| i as f64 * df).collect();
        Spectrum::from_fn(f, |fi| lorentzian_unchecked(TAU * f0, gamma, 0.0, a, fi) + c)
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let (f0, gamma, a) = (50.59, 0.5, 1e-20);
        let c = 1e-3 * a / (TAU * f0 * gamma).powi(2);
        let spec = analytic(f0, gamma, a, c, 0.002);
        let fit = fit_lorentzian(&spec, 50.6).unwrap();
        assert!((fit.f0_hat - f0).abs() < 1e-6);
        assert!((fit.gamma_total_hat / gamma - 1.0).abs() < 1e-6);
        assert!((fit.amplitude / a - 1.0).abs() < 1e-6);
        assert!((fit.noise_floor / c - 1.0).abs() < 1e-4);
        let w0 = TAU * f0;
        assert!((fit.area - a / (4.0 * w0 * w0 * gamma)).abs() < 1e-6 * fit.area);
    }

    #[test]
    fn low_snr_is_rejected() {
        let spec = analytic(50.0, 1.0, 1e-20, 1e-18, 0.01);
        assert!(fit_lorentzian(&spec, 50.0).is_err());
    }

    #[test]
    fn missing_peak_is_rejected() {
        let spec = analytic(50.0, 1.0, 1e-20, 0.0, 0.01);
        assert!(fit_lorentzian(&spec, 200.0).is_err());
    }
}
