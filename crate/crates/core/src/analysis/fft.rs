use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::spin::C64;

pub const MIN_SAMPLES: usize = 16;

/// Peaks must exceed this multiple of the median magnitude.
pub const PEAK_THRESHOLD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    /// Angular frequency, directly comparable with energy differences.
    pub omega: f64,
    pub magnitude: f64,
}

/// Frequency content of a uniformly sampled real series.
///
/// The mean is removed and a Hann window applied before the transform, so a
/// finite record of a few periods does not smear each line across the whole
/// spectrum. Returned peaks are sorted by descending magnitude.
pub fn oscillation_spectrum(times: &[f64], values: &[f64]) -> Result<Vec<SpectralPeak>> {
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            got: n,
            need: MIN_SAMPLES,
        });
    }
    if times.len() != n {
        return Err(Error::Shape {
            expected: n,
            actual: times.len(),
        });
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::Domain("series must be uniformly sampled".into()));
    }

    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<C64> = values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            C64::new((v - mean) * w, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2 + 1;
    let mag: Vec<f64> = buf[..half].iter().map(|z| z.norm()).collect();
    let mut sorted = mag.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let threshold = PEAK_THRESHOLD * median.max(f64::MIN_POSITIVE);

    let bin = 2.0 * std::f64::consts::PI / (n as f64 * dt);
    let mut peaks: Vec<SpectralPeak> = (1..half - 1)
        .filter(|&k| mag[k] > threshold && mag[k] >= mag[k - 1] && mag[k] > mag[k + 1])
        .map(|k| {
            let (a, b, c) = (mag[k - 1], mag[k], mag[k + 1]);
            let denom = a - 2.0 * b + c;
            let shift = if denom != 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            SpectralPeak {
                omega: (k as f64 + shift) * bin,
                magnitude: b - 0.25 * (a - c) * shift,
            }
        })
        .collect();
    peaks.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude));
    Ok(peaks)
}

/// Width of one frequency bin in angular units.
pub fn bin_width(times: &[f64]) -> f64 {
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    2.0 * std::f64::consts::PI / (n as f64 * dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tone() {
        let t: Vec<f64> = (0..4000).map(|k| k as f64 * 5e-3).collect();
        let v: Vec<f64> = t.iter().map(|x| (2.0 * x).sin()).collect();
        let peaks = oscillation_spectrum(&t, &v).unwrap();
        assert!((peaks[0].omega - 2.0).abs() < bin_width(&t));
        // Hann sidelobes stay far below the main line
        assert!(peaks.iter().skip(1).all(|p| p.magnitude < 0.05 * peaks[0].magnitude));
    }

    #[test]
    fn two_tones_resolved() {
        let t: Vec<f64> = (0..8192).map(|k| k as f64 * 1e-2).collect();
        let v: Vec<f64> = t.iter().map(|x| 0.3 + (1.3 * x).cos() + 0.5 * (4.1 * x).sin()).collect();
        let peaks = oscillation_spectrum(&t, &v).unwrap();
        let w = bin_width(&t);
        assert!((peaks[0].omega - 1.3).abs() < w);
        assert!((peaks[1].omega - 4.1).abs() < w);
    }

    #[test]
    fn too_short() {
        let t: Vec<f64> = (0..8).map(|k| k as f64).collect();
        assert!(matches!(
            oscillation_spectrum(&t, &t),
            Err(Error::InsufficientData { got: 8, need: 16 })
        ));
    }

    #[test]
    fn non_uniform_rejected() {
        let mut t: Vec<f64> = (0..32).map(|k| k as f64).collect();
        t[10] += 0.3;
        let v = vec![0.0; 32];
        assert!(matches!(oscillation_spectrum(&t, &v), Err(Error::Domain(_))));
    }
}
