//! Temporal amplitude spectrum of `g²` on fringe antinode rows, and peak
//! detection.

mod czt;
mod peaks;

pub use czt::{direct_dft, ChirpZ};
pub use peaks::{detect_peaks, Peak, PeakList};
pub(crate) use peaks::median;

use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::TAU;
use std::io::Write;

use crate::correlate::CorrelationGrid;
use crate::error::{Error, Result};

/// How the grid spacing compares with the `1/τ_max` resolution of the rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Matched,
    /// Finer than `1/τ_max`; neighbouring points are correlated.
    Oversampled,
    /// Coarser than `1/τ_max`; lines between grid points are attenuated.
    Undersampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmplitudeSpectrum {
    pub df: f64,
    pub f_max: f64,
    /// `df, 2·df, …`
    pub freqs: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub n_rows_averaged: usize,
    pub source_dtau: f64,
    /// u positions of the rows used, mm.
    pub rows_u: Vec<f64>,
    pub resolution: Resolution,
}

impl AmplitudeSpectrum {
    /// Columns `freq_hz,amplitude`.
    pub fn write_columns<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq_hz,amplitude")?;
        for (f, a) in self.freqs.iter().zip(&self.amplitudes) {
            writeln!(w, "{f},{a}")?;
        }
        Ok(())
    }

    /// Amplitude at the grid point nearest `f`.
    pub fn amplitude_at(&self, f: f64) -> Option<f64> {
        let i = (f / self.df).round() as i64 - 1;
        (0..self.amplitudes.len() as i64)
            .contains(&i)
            .then(|| self.amplitudes[i as usize])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowParity {
    #[default]
    All,
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub df: f64,
    pub f_max: f64,
    pub parity: RowParity,
    /// Rows with less relative pair exposure are skipped.
    pub min_exposure: f64,
}

impl SpectrumOptions {
    pub fn new(df: f64, f_max: f64) -> Self {
        SpectrumOptions {
            df,
            f_max,
            parity: RowParity::All,
            min_exposure: 0.05,
        }
    }
}

/// Spectrum with default options; see [`temporal_spectrum_with`].
pub fn temporal_spectrum(grid: &CorrelationGrid, period: f64, df: f64, f_max: f64) -> Result<AmplitudeSpectrum> {
    temporal_spectrum_with(grid, period, &SpectrumOptions::new(df, f_max))
}

/// Mean-subtracted transform of each antinode row `u ≈ N_u λ/2`, magnitude
/// `(1/M)|Σ_n x_n e^{-2πi f τ_n}|`, averaged over rows with weights equal to
/// their pair exposure. A row `a·cos(2πfτ)` gives `a/2` at `f`, the
/// normalization under which a single-frequency line at `m f₁` has height
/// `½K₀² J_m(φ₁)²`. Each row is divided by `|cos(k δu)|` for its offset `δu`
/// from the exact antinode.
pub fn temporal_spectrum_with(grid: &CorrelationGrid, period: f64, opts: &SpectrumOptions) -> Result<AmplitudeSpectrum> {
    if !(period > 0.0) {
        return Err(Error::Spectrum(format!("period must be > 0, got {period}")));
    }
    if !(opts.df > 0.0 && opts.f_max >= opts.df) {
        return Err(Error::Spectrum(format!(
            "need 0 < df <= f_max, got df={} f_max={}",
            opts.df, opts.f_max
        )));
    }
    let nyquist = 0.5 / grid.dtau;
    if opts.f_max > nyquist * (1.0 + 1e-12) {
        return Err(Error::Spectrum(format!(
            "f_max {} Hz exceeds the Nyquist frequency {nyquist} Hz of dtau = {} s",
            opts.f_max, grid.dtau
        )));
    }

    let k = TAU / period;
    let half = 0.5 * period;
    let n_max = (grid.window / half).floor() as i64;
    let mut rows: Vec<(usize, f64, f64)> = Vec::new(); // (iu, weight, antinode correction)
    for nu in -n_max..=n_max {
        let parity_ok = match opts.parity {
            RowParity::All => true,
            RowParity::Even => nu % 2 == 0,
            RowParity::Odd => nu % 2 != 0,
        };
        let target = nu as f64 * half;
        if !parity_ok || target.abs() >= grid.window {
            continue;
        }
        let Some(iu) = grid.u_index(target) else {
            continue;
        };
        if rows.iter().any(|r| r.0 == iu) {
            continue;
        }
        let exposure = grid.u_exposure(iu);
        let cos = (k * (grid.u_center(iu) - target)).cos().abs();
        if exposure < opts.min_exposure || cos < 0.5 {
            continue;
        }
        rows.push((iu, exposure, 1.0 / cos));
    }
    if rows.len() < 2 {
        return Err(Error::Spectrum(format!(
            "only {} usable antinode rows; need at least 2",
            rows.len()
        )));
    }

    let n_freq = (opts.f_max / opts.df * (1.0 + 1e-12)).floor() as usize;
    let m = grid.n_tau();
    let plan = ChirpZ::new(m, grid.dtau, opts.df, opts.df, n_freq);
    let per_row: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|&(iu, _, corr)| {
            let mut x = grid.row(iu);
            let mean = x.iter().sum::<f64>() / m as f64;
            for v in &mut x {
                *v -= mean;
            }
            plan.transform(&x).iter().map(|z| z.norm() * corr / m as f64).collect()
        })
        .collect();
    let wsum: f64 = rows.iter().map(|r| r.1).sum();
    let mut amplitudes = vec![0.0; n_freq];
    for (r, spec) in rows.iter().zip(&per_row) {
        for (a, s) in amplitudes.iter_mut().zip(spec) {
            *a += r.1 * s / wsum;
        }
    }

    let natural = 1.0 / grid.tau_max;
    let resolution = if (opts.df - natural).abs() <= 1e-9 * natural {
        Resolution::Matched
    } else if opts.df < natural {
        Resolution::Oversampled
    } else {
        Resolution::Undersampled
    };
    Ok(AmplitudeSpectrum {
        df: opts.df,
        f_max: n_freq as f64 * opts.df,
        freqs: (1..=n_freq).map(|i| i as f64 * opts.df).collect(),
        amplitudes,
        n_rows_averaged: rows.len(),
        source_dtau: grid.dtau,
        rows_u: rows.iter().map(|r| grid.u_center(r.0)).collect(),
        resolution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlate::pair_histogram;
    use crate::model::{approx_g2, theoretical_spectrum, ExpansionLimits, FringeModel, PerturbationComponent};
    use crate::simulate::{generate_events, SimConfig};
    use std::f64::consts::PI;

    // Analytic grid with enough virtual events that count rounding is
    // negligible.
    fn analytic(comps: &[PerturbationComponent], tau_max: f64, dtau: f64) -> CorrelationGrid {
        let k = TAU / 2.6;
        let n = (4e8 * 20.0 * 26.0 / (dtau * 0.1)).sqrt() as usize;
        CorrelationGrid::from_fn(0.1, dtau, tau_max, 20.0, 26.0, n, |u, tau| {
            approx_g2(u, tau, 0.6, k, comps, 30)
        })
        .unwrap()
    }

    #[test]
    fn cross_oracle_with_theory() {
        let comps = [PerturbationComponent::new(50.0, 0.6 * PI, 0.0).unwrap()];
        let grid = analytic(&comps, 1.0, 1e-4);
        let spec = temporal_spectrum(&grid, 2.6, 1.0, 400.0).unwrap();
        assert_eq!(spec.resolution, Resolution::Matched);
        let theory = theoretical_spectrum(&spec.freqs, 0.6, &comps, 20.0, &ExpansionLimits::for_components(1)).unwrap();
        for m in 1..=6 {
            let f = 50.0 * m as f64;
            let i = (f as usize) - 1;
            let (a, b) = (spec.amplitudes[i], theory.amplitudes[i]);
            assert!((a - b).abs() < 1e-3, "{f} Hz: {a} vs {b}");
        }
    }

    #[test]
    fn parseval_on_natural_grid() {
        let x: Vec<f64> = (0..256).map(|n| (0.3 * n as f64).sin() + 0.1 * ((n % 5) as f64 - 2.0)).collect();
        let dt = 1e-3;
        let m = x.len();
        let df = 1.0 / (m as f64 * dt);
        let plan = ChirpZ::new(m, dt, 0.0, df, m);
        let energy: f64 = plan.transform(&x).iter().map(|z| (z.norm() / m as f64).powi(2)).sum();
        let mean_sq: f64 = x.iter().map(|v| v * v).sum::<f64>() / m as f64;
        assert!((energy - mean_sq).abs() < 1e-6 * mean_sq.max(1.0));
    }

    #[test]
    fn rejects_bad_settings() {
        let comps = [PerturbationComponent::new(50.0, 0.6 * PI, 0.0).unwrap()];
        let grid = analytic(&comps, 0.2, 1e-3);
        assert!(temporal_spectrum(&grid, 2.6, 1.0, 600.0).is_err());
        assert!(temporal_spectrum(&grid, 0.0, 1.0, 100.0).is_err());
        let s = temporal_spectrum(&grid, 2.6, 0.1, 100.0).unwrap();
        assert_eq!(s.resolution, Resolution::Oversampled);
        let s = temporal_spectrum(&grid, 2.6, 10.0, 100.0).unwrap();
        assert_eq!(s.resolution, Resolution::Undersampled);
    }

    fn sim_grid(comps: Vec<PerturbationComponent>, seed: u64) -> CorrelationGrid {
        let f = FringeModel::new(0.6, 2.6, 1.0, 0.3).unwrap();
        let ev = generate_events(&SimConfig::new(f, comps, 3000.0, 20.0, seed)).unwrap();
        pair_histogram(&ev, 0.1, 1e-3, 1.0).unwrap()
    }

    #[test]
    fn unperturbed_has_no_strong_points() {
        let spec = temporal_spectrum(&sim_grid(vec![], 1), 2.6, 1.0, 400.0).unwrap();
        let p = detect_peaks(&spec, 5.0);
        let max = spec.amplitudes.iter().cloned().fold(0.0, f64::max);
        assert!(max <= p.noise_floor + 6.0 * p.sigma, "{max} {}", p.noise_floor);
    }

    #[test]
    fn row_parity_agrees() {
        let comps = vec![PerturbationComponent::new(40.0, 0.7 * PI, 0.0).unwrap()];
        let grid = sim_grid(comps, 2);
        let mut opts = SpectrumOptions::new(1.0, 200.0);
        opts.parity = RowParity::Even;
        let even = temporal_spectrum_with(&grid, 2.6, &opts).unwrap();
        opts.parity = RowParity::Odd;
        let odd = temporal_spectrum_with(&grid, 2.6, &opts).unwrap();
        let noise = detect_peaks(&even, 3.0).sigma.max(detect_peaks(&odd, 3.0).sigma);
        for f in [40.0, 80.0] {
            let (a, b) = (even.amplitude_at(f).unwrap(), odd.amplitude_at(f).unwrap());
            assert!((a - b).abs() < 5.0 * noise, "{f}: {a} vs {b} (σ {noise})");
        }
    }

    // Power spectrum of the intensity at a fixed position versus the g² route:
    // same peak positions, amplitudes proportional. The position k·y₀ = π/4
    // keeps both odd and even harmonics in the intensity.
    #[test]
    fn wiener_khintchine_consistency() {
        let comps = [PerturbationComponent::new(30.0, 0.8 * PI, 0.4).unwrap()];
        let (dt, t_total) = (1e-3, 1.0);
        let m = (t_total / dt) as usize;
        let intensity: Vec<f64> = (0..m)
            .map(|n| 1.0 + 0.6 * (PI / 4.0 + crate::model::phase_shift(&comps, n as f64 * dt)).cos())
            .collect();
        let freqs: Vec<f64> = (1..=300).map(|i| i as f64).collect();
        let power: Vec<f64> = direct_dft(&intensity, dt, &freqs)
            .iter()
            .map(|z| (z.norm() / m as f64).powi(2))
            .collect();
        let grid = analytic(&comps, 1.0, dt);
        let spec = temporal_spectrum(&grid, 2.6, 1.0, 300.0).unwrap();
        let pick = |v: &[f64]| -> Vec<usize> {
            (1..v.len() - 1)
                .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > 1e-4 * v.iter().cloned().fold(0.0, f64::max))
                .collect()
        };
        let pp = pick(&power);
        let sp = pick(&spec.amplitudes);
        assert_eq!(pp, sp);
        let ratio0 = spec.amplitudes[pp[0]] / power[pp[0]];
        for &i in &pp[1..] {
            let r = spec.amplitudes[i] / power[i];
            assert!((r / ratio0 - 1.0).abs() < 0.1, "{} Hz", i + 1);
        }
    }
}
