use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{non_negative, positive, Result};

/// Per-sample standard deviation of white noise with one-sided ASD `asd`
/// (units/√Hz) sampled at `sample_rate`.
pub fn white_noise_sigma(asd: f64, sample_rate: f64) -> f64 {
    asd * (0.5 * sample_rate).sqrt()
}

/// Adds white Gaussian noise of one-sided amplitude spectral density
/// `noise_asd` (m/√Hz) to a position record.
pub fn detector(x: &[f64], noise_asd: f64, sample_rate: f64, seed: u64) -> Result<Vec<f64>> {
    non_negative("noise_asd", noise_asd)?;
    positive("sample_rate", sample_rate)?;
    if noise_asd == 0.0 {
        return Ok(x.to_vec());
    }
    let sigma = white_noise_sigma(noise_asd, sample_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(x
        .iter()
        .map(|&xi| {
            let n: f64 = StandardNormal.sample(&mut rng);
            xi + sigma * n
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_is_identity() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(detector(&x, 0.0, 1000.0, 7).unwrap(), x);
    }

    #[test]
    fn noise_variance_matches_asd() {
        let fs = 2000.0;
        let n = 200_000;
        let out = detector(&vec![0.0; n], 1e-12, fs, 1).unwrap();
        let var = out.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let expected = 1e-24 * fs / 2.0;
        assert!((var / expected - 1.0).abs() < 0.02);
        assert!(detector(&out, -1.0, fs, 1).is_err());
    }
}
