//! Seeded banks of synthetic spectra with known fundamentals, for measuring
//! how often the search recovers them.
//!
//! Each scenario places the exact line spectrum of `n` components on the
//! frequency grid and adds circular complex Gaussian noise whose standard
//! deviation is the weakest fundamental's amplitude divided by `snr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::f64::consts::PI;

use super::{search, SearchConfig};
use crate::error::{Error, Result};
use crate::model::{theoretical_spectrum, ExpansionLimits, PerturbationComponent};
use crate::spectrum::{detect_peaks, AmplitudeSpectrum, Resolution};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BankConfig {
    pub n_components: usize,
    pub scenarios: usize,
    pub seed: u64,
    pub contrast: f64,
    /// Hz.
    pub df: f64,
    /// Hz.
    pub f_max: f64,
    /// Range of the drawn fundamentals, Hz.
    pub freq_range: (f64, f64),
    /// Minimum spacing between drawn fundamentals, Hz.
    pub min_separation: f64,
    /// Range of the drawn peak phase deviations, rad.
    pub dev_range: (f64, f64),
    pub snr: f64,
    pub sigma_mult: f64,
    pub search: SearchConfig,
}

impl BankConfig {
    pub fn new(n_components: usize, scenarios: usize, seed: u64) -> Self {
        BankConfig {
            n_components,
            scenarios,
            seed,
            contrast: 0.6,
            df: 0.1,
            f_max: 1000.0,
            freq_range: (20.0, 300.0),
            min_separation: 2.0,
            dev_range: (0.1 * PI, 0.3 * PI),
            snr: 10.0,
            sigma_mult: 7.0,
            search: SearchConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioOutcome {
    pub truth: Vec<PerturbationComponent>,
    pub found: Vec<f64>,
    pub n_peaks: usize,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BankReport {
    pub success_rate: f64,
    pub outcomes: Vec<ScenarioOutcome>,
}

/// Draw one scenario and return its truth and noisy amplitude spectrum.
pub fn draw_scenario(cfg: &BankConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<PerturbationComponent>, AmplitudeSpectrum)> {
    let n = cfg.n_components;
    let (lo, hi) = (
        (cfg.freq_range.0 / cfg.df).ceil() as u64,
        (cfg.freq_range.1 / cfg.df).floor() as u64,
    );
    if n == 0 || hi <= lo {
        return Err(Error::Config("empty scenario frequency range".into()));
    }
    let mut freqs: Vec<f64>;
    let mut tries = 0;
    loop {
        let mut bins: Vec<u64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
        bins.sort_unstable();
        freqs = bins.iter().map(|&b| b as f64 * cfg.df).collect();
        if freqs.windows(2).all(|w| w[1] - w[0] >= cfg.min_separation - 1e-9) {
            break;
        }
        tries += 1;
        if tries > 10_000 {
            return Err(Error::Config("cannot place fundamentals with the requested separation".into()));
        }
    }
    let truth = freqs
        .iter()
        .map(|&f| {
            let d = rng.random_range(cfg.dev_range.0..=cfg.dev_range.1);
            let p = rng.random_range(0.0..2.0 * PI);
            PerturbationComponent::new(f, d, p)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_bins = (cfg.f_max / cfg.df).round() as usize;
    let grid: Vec<f64> = (1..=n_bins).map(|i| i as f64 * cfg.df).collect();
    let clean = theoretical_spectrum(&grid, cfg.contrast, &truth, 1.0 / cfg.df, &ExpansionLimits::for_components(n))?;
    let weakest = freqs
        .iter()
        .map(|&f| clean.amplitudes[(f / cfg.df).round() as usize - 1])
        .fold(f64::INFINITY, f64::min);
    let sigma = weakest / cfg.snr;
    let normal = Normal::new(0.0, sigma / 2f64.sqrt()).map_err(|e| Error::Config(e.to_string()))?;
    let amplitudes = clean
        .amplitudes
        .iter()
        .map(|&a| {
            let (re, im) = (a + normal.sample(rng), normal.sample(rng));
            re.hypot(im)
        })
        .collect();
    let spec = AmplitudeSpectrum {
        df: cfg.df,
        f_max: cfg.f_max,
        freqs: grid,
        amplitudes,
        n_rows_averaged: 1,
        source_dtau: 0.0,
        rows_u: Vec::new(),
        resolution: Resolution::Matched,
    };
    Ok((truth, spec))
}

/// Run every scenario; success means the selected candidate has exactly the
/// true fundamentals, each within the match tolerance.
pub fn run_bank(cfg: &BankConfig) -> Result<BankReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let tol = cfg.search.match_tol.unwrap_or(cfg.df) + 1e-9;
    let mut outcomes = Vec::with_capacity(cfg.scenarios);
    for _ in 0..cfg.scenarios {
        let (truth, spec) = draw_scenario(cfg, &mut rng)?;
        let peaks = detect_peaks(&spec, cfg.sigma_mult);
        let found = match search(&peaks, &spec, cfg.contrast, 1.0, &cfg.search) {
            Ok(r) => r.freqs(),
            Err(Error::IdentificationFailure { .. }) | Err(Error::Input(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
        let success = found.len() == truth.len()
            && found.iter().zip(&truth).all(|(f, c)| (f - c.freq).abs() <= tol);
        outcomes.push(ScenarioOutcome {
            truth,
            found,
            n_peaks: peaks.peaks.len(),
            success,
        });
    }
    let hits = outcomes.iter().filter(|o| o.success).count();
    Ok(BankReport {
        success_rate: hits as f64 / cfg.scenarios.max(1) as f64,
        outcomes,
    })
}
