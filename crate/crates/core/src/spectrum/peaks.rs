use serde::Serialize;

use super::AmplitudeSpectrum;

/// Scale from median absolute deviation to standard deviation for Gaussian
/// noise.
const MAD_SCALE: f64 = 1.482_602_218_505_602;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Hz, parabolically interpolated.
    pub freq: f64,
    pub amplitude: f64,
    /// `(amplitude - noise_floor) / σ`.
    pub snr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakList {
    pub peaks: Vec<Peak>,
    pub noise_floor: f64,
    pub sigma: f64,
    pub threshold: f64,
    /// Grid spacing of the source spectrum, Hz.
    pub df: f64,
    pub f_max: f64,
}

impl PeakList {
    pub fn freqs(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.freq).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Local maxima above `median + sigma_mult · 1.4826 · MAD`.
pub fn detect_peaks(spec: &AmplitudeSpectrum, sigma_mult: f64) -> PeakList {
    let a = &spec.amplitudes;
    let floor = median(a);
    let dev: Vec<f64> = a.iter().map(|v| (v - floor).abs()).collect();
    let sigma = MAD_SCALE * median(&dev);
    let threshold = floor + sigma_mult * sigma;
    let snr_scale = if sigma > 0.0 { sigma } else { f64::MIN_POSITIVE };

    let n = a.len();
    let mut peaks = Vec::new();
    for i in 0..n {
        let b = a[i];
        if !(b > threshold) {
            continue;
        }
        let left = if i > 0 { a[i - 1] } else { f64::NEG_INFINITY };
        let right = if i + 1 < n { a[i + 1] } else { f64::NEG_INFINITY };
        if !(b > left && b >= right) {
            continue;
        }
        let (shift, amp) = if i > 0 && i + 1 < n {
            let denom = left - 2.0 * b + right;
            if denom < 0.0 {
                let d = (0.5 * (left - right) / denom).clamp(-0.5, 0.5);
                (d, b - 0.25 * (left - right) * d)
            } else {
                (0.0, b)
            }
        } else {
            (0.0, b)
        };
        peaks.push(Peak {
            freq: spec.freqs[i] + shift * spec.df,
            amplitude: amp,
            snr: ((amp - floor) / snr_scale).min(f64::MAX),
        });
    }
    PeakList {
        peaks,
        noise_floor: floor,
        sigma,
        threshold,
        df: spec.df,
        f_max: spec.f_max,
    }
}
