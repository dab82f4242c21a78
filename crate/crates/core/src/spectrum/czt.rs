//! Fourier sums of a uniformly sampled sequence on an arbitrary uniform
//! frequency grid, via Bluestein's chirp-z algorithm.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Reusable plan for `X(f_k) = Σ_n x_n exp(-2πi f_k n Δt)` with
/// `f_k = f0 + k·df`, `k < n_freq`, for input length `n_in`.
pub struct ChirpZ {
    n_in: usize,
    n_freq: usize,
    len: usize,
    pre: Vec<Complex64>,
    post: Vec<Complex64>,
    kernel_hat: Vec<Complex64>,
    fft: std::sync::Arc<dyn rustfft::Fft<f64>>,
    ifft: std::sync::Arc<dyn rustfft::Fft<f64>>,
}

// exp(-iπ c j²) with the argument reduced before multiplying by π.
fn chirp(c: f64, j: usize) -> Complex64 {
    let jj = (j as f64) * (j as f64);
    let hi = c * jj;
    let lo = c.mul_add(jj, -hi);
    let turns = hi.rem_euclid(2.0) + lo;
    Complex64::from_polar(1.0, -PI * turns)
}

impl ChirpZ {
    pub fn new(n_in: usize, dt: f64, f0: f64, df: f64, n_freq: usize) -> Self {
        let len = (n_in + n_freq).saturating_sub(1).max(1).next_power_of_two();
        let c = df * dt;
        let pre = (0..n_in)
            .map(|n| {
                let shift = Complex64::from_polar(1.0, -2.0 * PI * (f0 * dt * n as f64).rem_euclid(1.0));
                shift * chirp(c, n)
            })
            .collect();
        let post = (0..n_freq).map(|k| chirp(c, k)).collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); len];
        for j in 0..n_freq.max(n_in) {
            let v = chirp(c, j).conj();
            if j < n_freq {
                kernel[j] = v;
            }
            if j > 0 && j < n_in {
                kernel[len - j] = v;
            }
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(len);
        let ifft = planner.plan_fft_inverse(len);
        fft.process(&mut kernel);
        ChirpZ {
            n_in,
            n_freq,
            len,
            pre,
            post,
            kernel_hat: kernel,
            fft,
            ifft,
        }
    }

    pub fn transform(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n_in);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        for (n, &v) in x.iter().enumerate() {
            buf[n] = self.pre[n] * v;
        }
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        (0..self.n_freq).map(|k| buf[k] * self.post[k] * scale).collect()
    }
}

/// Direct evaluation of the same sum, `O(n·K)`.
pub fn direct_dft(x: &[f64], dt: f64, freqs: &[f64]) -> Vec<Complex64> {
    freqs
        .iter()
        .map(|&f| {
            x.iter()
                .enumerate()
                .map(|(n, &v)| {
                    let turns = (f * dt * n as f64).rem_euclid(1.0);
                    Complex64::from_polar(v, -2.0 * PI * turns)
                })
                .sum()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_direct_sum() {
        let x: Vec<f64> = (0..777)
            .map(|n| (0.37 * n as f64).sin() + 0.2 * (n as f64 * 1.91).cos() + 0.05)
            .collect();
        let dt = 1e-3;
        let (f0, df, k) = (0.7, 0.173, 1200);
        let freqs: Vec<f64> = (0..k).map(|i| f0 + i as f64 * df).collect();
        let a = ChirpZ::new(x.len(), dt, f0, df, k).transform(&x);
        let b = direct_dft(&x, dt, &freqs);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-9, "{p} vs {q}");
        }
    }

    #[test]
    fn natural_grid_is_fft() {
        let x: Vec<f64> = (0..64).map(|n| ((n * n) % 7) as f64).collect();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(64);
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft.process(&mut buf);
        let dt = 0.5;
        let czt = ChirpZ::new(64, dt, 0.0, 1.0 / (64.0 * dt), 64).transform(&x);
        for (p, q) in czt.iter().zip(&buf) {
            assert!((p - q).norm() < 1e-10);
        }
    }
}
