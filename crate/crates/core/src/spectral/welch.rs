use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check, positive, Error, Result};

use super::Spectrum;

/// Segment taper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    #[default]
    Hann,
    Hamming,
    Blackman,
}

impl Window {
    pub const ALL: [Window; 4] = [Window::Rectangular, Window::Hann, Window::Hamming, Window::Blackman];

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
            Window::Hamming => "hamming",
            Window::Blackman => "blackman",
        }
    }

    /// Periodic (DFT-even) coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        let nf = n as f64;
        (0..n)
            .map(|i| {
                let p = TAU * i as f64 / nf;
                match self {
                    Window::Rectangular => 1.0,
                    Window::Hann => 0.5 - 0.5 * p.cos(),
                    Window::Hamming => 0.54 - 0.46 * p.cos(),
                    Window::Blackman => 0.42 - 0.5 * p.cos() + 0.08 * (2.0 * p).cos(),
                }
            })
            .collect()
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Window::ALL
            .into_iter()
            .find(|w| w.name() == s)
            .ok_or_else(|| Error::invalid("window", format!("unknown window `{s}`")))
    }
}

/// Segments summed per parallel work unit; partial sums are combined in index
/// order so the result does not depend on the thread count.
const SEGMENTS_PER_TASK: usize = 8;

/// One-sided Welch PSD of `series` (units²/Hz).
///
/// Each segment is tapered, transformed, and normalized by `fs · Σw²` so that
/// `Σ psd · Δf` equals the mean-square of the series. Bins other than DC and
/// (for even segment lengths) Nyquist are doubled. No detrending is applied.
pub fn welch_psd(
    series: &[f64],
    sample_rate: f64,
    segment_length: usize,
    overlap_fraction: f64,
    window: Window,
) -> Result<Spectrum> {
    positive("sample_rate", sample_rate)?;
    check("overlap_fraction", overlap_fraction, |o| (0.0..1.0).contains(&o), "in [0, 1)")?;
    if segment_length < 2 {
        return Err(Error::invalid("segment_length", "must be at least 2"));
    }
    if segment_length > series.len() {
        return Err(Error::SeriesTooShort {
            series: series.len(),
            required: segment_length,
        });
    }
    let n = segment_length;
    let step = (n - (overlap_fraction * n as f64).round() as usize).max(1);
    let n_segments = 1 + (series.len() - n) / step;
    let w = window.coefficients(n);
    let w_power: f64 = w.iter().map(|v| v * v).sum();
    let w_sum: f64 = w.iter().sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let n_bins = n / 2 + 1;

    let partials: Vec<Vec<f64>> = (0..n_segments)
        .collect::<Vec<_>>()
        .par_chunks(SEGMENTS_PER_TASK)
        .map(|chunk| {
            let mut acc = vec![0.0; n_bins];
            let mut buf = vec![Complex64::new(0.0, 0.0); n];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for &s in chunk {
                let seg = &series[s * step..s * step + n];
                for ((b, &x), &wi) in buf.iter_mut().zip(seg).zip(&w) {
                    *b = Complex64::new(x * wi, 0.0);
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b.norm_sqr();
                }
            }
            acc
        })
        .collect();

    let mut psd = vec![0.0; n_bins];
    for p in &partials {
        for (a, b) in psd.iter_mut().zip(p) {
            *a += b;
        }
    }
    let scale = 1.0 / (sample_rate * w_power * n_segments as f64);
    let nyquist_bin = if n.is_multiple_of(2) { Some(n / 2) } else { None };
    for (k, p) in psd.iter_mut().enumerate() {
        let doubled = k != 0 && Some(k) != nyquist_bin;
        *p *= if doubled { 2.0 * scale } else { scale };
    }
    let df = sample_rate / n as f64;
    Ok(Spectrum {
        f: (0..n_bins).map(|k| k as f64 * df).collect(),
        valid: vec![true; n_bins],
        psd,
        enbw: sample_rate * w_power / (w_sum * w_sum),
        segment_length: n,
        overlap_fraction,
        window_name: window.name().to_string(),
        segments: n_segments,
    })
}

/// Segment length resolving a peak of linewidth `gamma_total` (1/s) with at
/// least `bins_per_linewidth` bins across its FWHM, capped at `max_len`.
pub fn segment_for_linewidth(sample_rate: f64, gamma_total: f64, bins_per_linewidth: f64, max_len: usize) -> usize {
    let fwhm = gamma_total / TAU;
    let n = (bins_per_linewidth * sample_rate / fwhm).ceil() as usize;
    n.min(max_len).max(2)
}
