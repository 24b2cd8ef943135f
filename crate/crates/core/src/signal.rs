//! Spectral estimates on uniformly sampled series.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Angular frequency (rad per unit of `dt`) of the strongest non-DC Fourier
/// component, refined by parabolic interpolation of the zero-padded spectrum.
pub fn dominant_angular_frequency(samples: &[f64], dt: f64) -> Result<f64> {
    if samples.len() < 4 {
        return Err(Error::Usage("need at least four samples for a spectral peak".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("sample spacing must be > 0, got {dt}")));
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let n = (samples.len() * 16).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = samples
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(n)
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let power: Vec<f64> = buf[..n / 2].iter().map(|z| z.norm_sqr()).collect();
    // skip the DC lobe: start after the first local minimum
    let mut start = 1;
    while start + 1 < power.len() && power[start + 1] < power[start] {
        start += 1;
    }
    let (k, _) = power
        .iter()
        .enumerate()
        .skip(start)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Degenerate("flat spectrum".into()))?;
    let shift = if k > 0 && k + 1 < power.len() {
        let (a, b, c) = (power[k - 1], power[k], power[k + 1]);
        let denom = a - 2.0 * b + c;
        if denom != 0.0 {
            0.5 * (a - c) / denom
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(std::f64::consts::TAU * (k as f64 + shift) / (n as f64 * dt))
}
