//! From time series to spectra and mode thermometry.
//!
//! Spectra are stored as one-sided PSDs; amplitude spectral densities are only
//! produced at output boundaries ([`Spectrum::asd`], [`write_csv`]).

mod fit;
mod welch;

use std::f64::consts::{PI, TAU};
use std::io::Write;

use serde::{Deserialize, Serialize};

pub use fit::{fit_lorentzian, fit_lorentzian_with, FitOptions, PeakFit};
pub use welch::{segment_for_linewidth, welch_psd, Window};

use crate::constants::{HBAR, K_B};
use crate::error::{non_negative, positive, Error, Result};
use crate::model::ModeParams;

/// Bins whose filter power response falls below this fraction of the maximum
/// are flagged invalid by [`compensate_filter`].
pub const COMPENSATION_FLOOR: f64 = 1e-6;

/// Half-width of the integration band in units of the FWHM linewidth.
pub const BAND_LINEWIDTHS: f64 = 3.0;

/// Fraction of a narrow Lorentzian's power inside ±3 FWHM, (2/π)·atan(6).
///
/// The band captures about 89.5% of the energy, not 99%; integrated
/// temperatures are reported without correcting for the missing tails.
pub fn band_fraction() -> f64 {
    2.0 / PI * (2.0 * BAND_LINEWIDTHS).atan()
}

/// One-sided PSD on a uniform frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub f: Vec<f64>,
    pub psd: Vec<f64>,
    /// Bins usable for analysis; cleared by filter compensation.
    pub valid: Vec<bool>,
    /// Equivalent noise bandwidth of the window, Hz.
    pub enbw: f64,
    pub segment_length: usize,
    pub overlap_fraction: f64,
    pub window_name: String,
    pub segments: usize,
}

impl Spectrum {
    /// Builds a spectrum by sampling `psd(f)` on `f`, for synthetic tests and
    /// analytic references.
    pub fn from_fn(f: Vec<f64>, psd: impl Fn(f64) -> f64) -> Self {
        let values: Vec<f64> = f.iter().map(|&fi| psd(fi)).collect();
        Spectrum {
            valid: vec![true; f.len()],
            f,
            psd: values,
            enbw: 0.0,
            segment_length: 0,
            overlap_fraction: 0.0,
            window_name: "analytic".into(),
            segments: 0,
        }
    }

    pub fn df(&self) -> f64 {
        if self.f.len() < 2 {
            0.0
        } else {
            self.f[1] - self.f[0]
        }
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    /// Σ psd · Δf over valid bins.
    pub fn total_power(&self) -> f64 {
        self.psd
            .iter()
            .zip(&self.valid)
            .filter(|(_, &v)| v)
            .map(|(p, _)| p)
            .sum::<f64>()
            * self.df()
    }

    /// Power in [lo, hi] with fractional weighting of the edge bins, after
    /// subtracting `floor` per bin (negative bins clipped to zero).
    pub fn band_power_above(&self, lo: f64, hi: f64, floor: f64) -> f64 {
        let df = self.df();
        let mut total = 0.0;
        for ((&f, &p), &ok) in self.f.iter().zip(&self.psd).zip(&self.valid) {
            if !ok {
                continue;
            }
            let overlap = (hi.min(f + 0.5 * df) - lo.max(f - 0.5 * df)).max(0.0);
            if overlap > 0.0 {
                total += (p - floor).max(0.0) * overlap;
            }
        }
        total
    }

    pub fn band_power(&self, lo: f64, hi: f64) -> f64 {
        self.band_power_above(lo, hi, 0.0)
    }

    /// Index of the bin nearest `f`.
    pub fn bin(&self, f: f64) -> usize {
        let df = self.df();
        if df <= 0.0 {
            return 0;
        }
        (((f - self.f[0]) / df).round().max(0.0) as usize).min(self.len() - 1)
    }

    /// Frequency of the largest valid bin in [lo, hi].
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.f
            .iter()
            .zip(&self.psd)
            .zip(&self.valid)
            .filter(|((&f, _), &ok)| ok && f >= lo && f <= hi)
            .map(|((&f, &p), _)| (f, p))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }

    pub fn asd(&self) -> Vec<f64> {
        self.psd.iter().map(|p| p.sqrt()).collect()
    }
}

/// Divides out a known filter power response `|H(f)|²`.
///
/// Bins where the response is below [`COMPENSATION_FLOOR`] of its maximum are
/// marked invalid and zeroed instead of amplified.
pub fn compensate_filter(spec: &Spectrum, filter_response: impl Fn(f64) -> f64) -> Result<Spectrum> {
    let h: Vec<f64> = spec.f.iter().map(|&f| filter_response(f)).collect();
    if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid("filter_response", "must be finite and non-negative"));
    }
    let h_max = h.iter().copied().fold(0.0, f64::max);
    let threshold = COMPENSATION_FLOOR * h_max;
    let mut out = spec.clone();
    for ((p, valid), &hk) in out.psd.iter_mut().zip(out.valid.iter_mut()).zip(&h) {
        if *valid && hk > threshold && hk > 0.0 {
            *p /= hk;
        } else {
            *valid = false;
            *p = 0.0;
        }
    }
    if !out.valid.iter().any(|&v| v) {
        return Err(Error::FullyInvalidBand);
    }
    Ok(out)
}

/// Band-integrated displacement and the mode temperature it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thermometry {
    pub a_rms: f64,
    pub t_mode: f64,
    pub n_ph: f64,
    pub band_lo: f64,
    pub band_hi: f64,
}

/// Integrates the PSD over `f0 ± 3·Γ_total/2π` after subtracting `floor`, and
/// converts the variance to a temperature by equipartition.
pub fn integrate_band(spec: &Spectrum, mode: &ModeParams, gamma_total: f64, floor: f64) -> Result<Thermometry> {
    positive("gamma_total", gamma_total)?;
    non_negative("floor", floor)?;
    mode.validate()?;
    let half = BAND_LINEWIDTHS * gamma_total / TAU;
    let (lo, hi) = (mode.f0 - half, mode.f0 + half);
    let (min, max) = (
        spec.f.first().copied().unwrap_or(0.0),
        spec.f.last().copied().unwrap_or(0.0),
    );
    if lo < min || hi > max {
        return Err(Error::BandOutOfRange { lo, hi, min, max });
    }
    let variance = spec.band_power_above(lo, hi, floor);
    let t_mode = mode.spring_constant()? * variance / K_B;
    Ok(Thermometry {
        a_rms: variance.sqrt(),
        t_mode,
        n_ph: K_B * t_mode / (HBAR * mode.omega0()),
        band_lo: lo,
        band_hi: hi,
    })
}

/// [`integrate_band`] centred on a fitted peak, using its linewidth and floor.
pub fn thermometry(spec: &Spectrum, mode: &ModeParams, fit: &PeakFit) -> Result<Thermometry> {
    let centred = ModeParams {
        f0: fit.f0_hat,
        ..mode.clone()
    };
    integrate_band(spec, &centred, fit.gamma_total_hat, fit.noise_floor.max(0.0))
}

/// Fit summary emitted as JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub f0_hz: f64,
    pub gamma_total_per_s: f64,
    pub area_m2: f64,
    pub floor_m2_per_hz: f64,
    pub t_mode_k: f64,
    pub a_rms_m: f64,
    pub n_ph: f64,
}

impl FitReport {
    pub fn new(fit: &PeakFit, thermo: &Thermometry) -> Self {
        FitReport {
            f0_hz: fit.f0_hat,
            gamma_total_per_s: fit.gamma_total_hat,
            area_m2: fit.area,
            floor_m2_per_hz: fit.noise_floor,
            t_mode_k: thermo.t_mode,
            a_rms_m: thermo.a_rms,
            n_ph: thermo.n_ph,
        }
    }
}

/// Writes `f_hz,psd_m2_per_hz[,asd_m_per_sqrt_hz]`; invalid bins are skipped.
pub fn write_csv<W: Write>(spec: &Spectrum, mut out: W, with_asd: bool) -> Result<()> {
    if with_asd {
        writeln!(out, "f_hz,psd_m2_per_hz,asd_m_per_sqrt_hz")?;
    } else {
        writeln!(out, "f_hz,psd_m2_per_hz")?;
    }
    for ((f, p), ok) in spec.f.iter().zip(&spec.psd).zip(&spec.valid) {
        if !ok {
            continue;
        }
        if with_asd {
            writeln!(out, "{f:e},{p:e},{:e}", p.sqrt())?;
        } else {
            writeln!(out, "{f:e},{p:e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{analytic_mode_temperature, lorentzian_psd, ModeLabel};

    fn grid(lo: f64, hi: f64, df: f64) -> Vec<f64> {
        let n = ((hi - lo) / df).round() as usize + 1;
        (0..n).map(|i| lo + i as f64 * df).collect()
    }

    #[test]
    fn band_fraction_value() {
        assert!((band_fraction() - 0.894_863).abs() < 1e-6);
    }

    #[test]
    fn analytic_curve_integrates_to_band_fraction() {
        let mode = ModeParams::translational(ModeLabel::Y, 3.5e-7, 50.59, 1e3, 1.97);
        for ratio in [0.0, 1.0, 9.0] {
            let gfb = ratio * mode.gamma0();
            let spec = Spectrum::from_fn(grid(0.0, 200.0, 1e-3), |f| lorentzian_psd(&mode, gfb, f).unwrap());
            let th = integrate_band(&spec, &mode, mode.gamma0() + gfb, 0.0).unwrap();
            let expected = analytic_mode_temperature(&mode, gfb).unwrap() * band_fraction();
            assert!((th.t_mode / expected - 1.0).abs() < 0.01, "ratio {ratio}: {} vs {expected}", th.t_mode);
        }
    }

    #[test]
    fn band_past_nyquist_is_rejected() {
        let mode = ModeParams::translational(ModeLabel::Y, 3.5e-7, 50.59, 10.0, 1.97);
        let spec = Spectrum::from_fn(grid(0.0, 55.0, 0.01), |_| 1.0);
        assert!(matches!(
            integrate_band(&spec, &mode, mode.gamma0(), 0.0),
            Err(Error::BandOutOfRange { .. })
        ));
    }

    #[test]
    fn floor_only_spectrum_integrates_to_zero() {
        let mode = ModeParams::translational(ModeLabel::Y, 3.5e-7, 50.59, 1e3, 1.97);
        let spec = Spectrum::from_fn(grid(0.0, 100.0, 0.01), |_| 1e-24);
        let th = integrate_band(&spec, &mode, mode.gamma0(), 1e-24).unwrap();
        assert_eq!(th.t_mode, 0.0);
    }

    #[test]
    fn identity_compensation() {
        let spec = Spectrum::from_fn(grid(0.0, 10.0, 0.5), |f| f + 1.0);
        let out = compensate_filter(&spec, |_| 1.0).unwrap();
        assert_eq!(out, spec);
    }

    #[test]
    fn zeroed_band_is_marked_invalid() {
        let spec = Spectrum::from_fn(grid(0.0, 10.0, 0.5), |_| 1.0);
        let out = compensate_filter(&spec, |f| if f < 5.0 { 0.0 } else { 0.25 }).unwrap();
        for (i, &f) in out.f.iter().enumerate() {
            assert!(out.psd[i].is_finite());
            assert_eq!(out.valid[i], f >= 5.0);
            if f >= 5.0 {
                assert_eq!(out.psd[i], 4.0);
            }
        }
        assert!(matches!(compensate_filter(&spec, |_| 0.0), Err(Error::FullyInvalidBand)));
    }

    #[test]
    fn spectrum_csv() {
        let spec = Spectrum::from_fn(vec![0.0, 1.0], |_| 4.0);
        let mut buf = Vec::new();
        write_csv(&spec, &mut buf, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "f_hz,psd_m2_per_hz,asd_m_per_sqrt_hz\n0e0,4e0,2e0\n1e0,4e0,2e0\n");
    }
}
