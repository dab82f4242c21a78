//! Identification of the fundamental perturbation frequencies from spectral
//! peaks, and fitting of their peak phase deviations.

pub mod bank;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{BesselTable, LineModel, PerturbationComponent};
use crate::spectrum::{AmplitudeSpectrum, PeakList};

/// Bound on the number of order vectors enumerated for one candidate.
pub const MAX_ORDER_VECTORS: usize = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Percent.
    pub accept_threshold: f64,
    /// Percent.
    pub reject_threshold: f64,
    /// Hz; `None` uses the spectrum grid spacing.
    pub match_tol: Option<f64>,
    pub max_n: usize,
    /// Combined order cap `Σ|m_j|` for candidates of 1, 2, … frequencies; the
    /// last entry applies to larger sets.
    pub order_caps: Vec<u32>,
    pub fit: PhaseFitConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            accept_threshold: 80.0,
            reject_threshold: 10.0,
            match_tol: None,
            max_n: 4,
            order_caps: vec![20, 8],
            fit: PhaseFitConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.reject_threshold
            && self.reject_threshold < self.accept_threshold
            && self.accept_threshold <= 100.0)
        {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 < reject ({}) < accept ({}) <= 100",
                self.reject_threshold, self.accept_threshold
            )));
        }
        if self.max_n == 0 {
            return Err(Error::Config("max_n must be at least 1".into()));
        }
        if self.order_caps.is_empty() || self.order_caps.contains(&0) {
            return Err(Error::Config("order caps must be nonempty and positive".into()));
        }
        if let Some(t) = self.match_tol {
            if !(t > 0.0) {
                return Err(Error::Config(format!("match tolerance must be > 0, got {t}")));
            }
        }
        self.fit.validate()
    }

    pub fn order_cap(&self, n: usize) -> u32 {
        self.order_caps[(n.max(1) - 1).min(self.order_caps.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseFitConfig {
    /// Upper end of the peak phase deviation scan, rad.
    pub max_dev: f64,
    /// Scan step, rad.
    pub step: f64,
    /// Coordinate sweeps over all components.
    pub sweeps: usize,
    /// Bessel order cap for the model lines, per candidate size (last entry
    /// reused).
    pub order_caps: Vec<u32>,
    /// A residual above this flags a poor fit.
    pub poor_fit_residual: f64,
    /// Relative uncertainty allowed on the supplied contrast. The model line
    /// heights may scale by up to `(1 ± t)²` to absorb it.
    pub contrast_tolerance: f64,
}

impl Default for PhaseFitConfig {
    fn default() -> Self {
        PhaseFitConfig {
            max_dev: 3.0 * PI,
            step: 0.01 * PI,
            sweeps: 3,
            order_caps: vec![12, 6, 5, 4],
            poor_fit_residual: 0.25,
            contrast_tolerance: 0.15,
        }
    }
}

impl PhaseFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_dev > 0.0 && self.step > 0.0 && self.step < self.max_dev) {
            return Err(Error::Config("phase fit scan needs 0 < step < max_dev".into()));
        }
        if !(0.0..1.0).contains(&self.contrast_tolerance) {
            return Err(Error::Config("contrast tolerance must lie in [0, 1)".into()));
        }
        if self.sweeps == 0 || self.order_caps.is_empty() {
            return Err(Error::Config("phase fit needs at least one sweep and an order cap".into()));
        }
        Ok(())
    }

    fn order_cap(&self, n: usize) -> u32 {
        self.order_caps[(n.max(1) - 1).min(self.order_caps.len() - 1)]
    }
}

/// One candidate frequency set and how well it explains the spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub freqs: Vec<f64>,
    pub congruence: f64,
    pub peak_phase_devs: Vec<f64>,
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentificationResult {
    /// Phases are provisional (zero).
    pub components: Vec<PerturbationComponent>,
    pub congruence: f64,
    /// `√RSS / (½K₀²)` over the compared spectral points.
    pub fit_residual: f64,
    pub contrast_used: f64,
    pub period_used: f64,
    pub poor_fit: bool,
    /// Size of the frequency sets in the final search pass.
    pub search_depth: usize,
    pub candidates_tested: usize,
    /// All accepted candidates, best first.
    pub accepted: Vec<CandidateScore>,
}

impl IdentificationResult {
    pub fn freqs(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.freq).collect()
    }
}

// Order vectors m with Σ|m_j| ≤ cap and |m_j| ≤ per-component caps.
fn order_vectors(limits: &[i32], cap: i32, out: &mut Vec<Vec<i32>>) -> Result<()> {
    fn rec(j: usize, budget: i32, limits: &[i32], cur: &mut Vec<i32>, out: &mut Vec<Vec<i32>>) -> Result<()> {
        if j == limits.len() {
            if out.len() >= MAX_ORDER_VECTORS {
                return Err(Error::Input(format!(
                    "more than {MAX_ORDER_VECTORS} intermodulation orders; lower the order cap"
                )));
            }
            out.push(cur.clone());
            return Ok(());
        }
        let lim = limits[j].min(budget);
        for m in -lim..=lim {
            cur.push(m);
            rec(j + 1, budget - m.abs(), limits, cur, out)?;
            cur.pop();
        }
        Ok(())
    }
    rec(0, cap, limits, &mut Vec::with_capacity(limits.len()), out)
}

/// Positive frequencies `|Σ m_j f_j| ≤ f_max` with `Σ|m_j| ≤ order_cap` and
/// `|m_j| ≤ f_max/f_j`, merged within `tol` and sorted.
pub fn expected_components(candidate: &[f64], f_max: f64, order_cap: u32, tol: f64) -> Result<Vec<f64>> {
    if candidate.is_empty() {
        return Err(Error::Input("candidate frequency set is empty".into()));
    }
    if candidate.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::Input("candidate frequencies must be positive".into()));
    }
    let limits: Vec<i32> = candidate
        .iter()
        .map(|&f| ((f_max / f).floor() as i64).min(order_cap as i64) as i32)
        .collect();
    let mut vectors = Vec::new();
    order_vectors(&limits, order_cap as i32, &mut vectors)?;
    let eps = 1e-9 * f_max.max(1.0);
    let mut out: Vec<f64> = vectors
        .iter()
        .map(|m| m.iter().zip(candidate).map(|(&mj, &f)| mj as f64 * f).sum::<f64>().abs())
        .filter(|&f| f > eps && f <= f_max + eps)
        .collect();
    out.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::with_capacity(out.len());
    for f in out {
        if merged.last().is_none_or(|&l| f - l > tol) {
            merged.push(f);
        }
    }
    Ok(merged)
}

/// Percentage of `expt` entries lying within `tol` of some `theor` entry.
pub fn congruence(theor: &[f64], expt: &[f64], tol: f64) -> f64 {
    if expt.is_empty() {
        return 0.0;
    }
    let mut sorted = theor.to_vec();
    sorted.sort_by(f64::total_cmp);
    let slack = tol + 1e-9 * tol.max(1.0);
    let matched = expt
        .iter()
        .filter(|&&e| {
            let i = sorted.partition_point(|&t| t < e);
            (i < sorted.len() && sorted[i] - e <= slack) || (i > 0 && e - sorted[i - 1] <= slack)
        })
        .count();
    100.0 * matched as f64 / expt.len() as f64
}

/// The search loop: score every candidate set of the current size, accept at
/// `M ≥ accept`, keep as possible above `reject`; if nothing was accepted,
/// form all sets one larger from the frequencies of the possible list. The
/// accepted sets are fitted against `spec` and the smallest residual wins.
pub fn search(
    peaks: &PeakList,
    spec: &AmplitudeSpectrum,
    contrast: f64,
    period: f64,
    cfg: &SearchConfig,
) -> Result<IdentificationResult> {
    cfg.validate()?;
    if peaks.peaks.is_empty() {
        return Err(Error::Input("peak list is empty".into()));
    }
    let tol = cfg.match_tol.unwrap_or(peaks.df);
    let mut expt = peaks.freqs();
    expt.sort_by(f64::total_cmp);
    let f_max = peaks.f_max;

    let mut list: Vec<Vec<f64>> = expt.iter().map(|&f| vec![f]).collect();
    let mut tested = 0usize;
    let mut best_seen: (Vec<f64>, f64) = (Vec::new(), -1.0);
    let mut n = 1;
    loop {
        let cap = cfg.order_cap(n);
        let scored: Vec<Result<f64>> = list
            .par_iter()
            .map(|cand| Ok(congruence(&expected_components(cand, f_max, cap, tol)?, &expt, tol)))
            .collect();
        tested += list.len();
        let mut accepted = Vec::new();
        let mut possible = Vec::new();
        for (cand, m) in list.iter().zip(scored) {
            let m = m?;
            if m > best_seen.1 {
                best_seen = (cand.clone(), m);
            }
            if m >= cfg.accept_threshold {
                accepted.push((cand.clone(), m));
            } else if m > cfg.reject_threshold {
                possible.push(cand.clone());
            }
        }
        if !accepted.is_empty() {
            return select_best(accepted, spec, contrast, period, cfg, n, tested);
        }
        if n >= cfg.max_n {
            return Err(Error::IdentificationFailure {
                max_n: cfg.max_n,
                best: best_seen.0,
                best_congruence: best_seen.1.max(0.0),
            });
        }
        let mut unique: Vec<f64> = possible.into_iter().flatten().collect();
        unique.sort_by(f64::total_cmp);
        unique.dedup();
        n += 1;
        list = combinations(&unique, n);
    }
}

fn combinations(items: &[f64], k: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 || k > items.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let mut i = k;
        while i > 0 && idx[i - 1] == items.len() - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn select_best(
    accepted: Vec<(Vec<f64>, f64)>,
    spec: &AmplitudeSpectrum,
    contrast: f64,
    period: f64,
    cfg: &SearchConfig,
    depth: usize,
    tested: usize,
) -> Result<IdentificationResult> {
    let fits: Vec<Result<IdentificationResult>> = accepted
        .par_iter()
        .map(|(freqs, m)| {
            let mut r = fit_peak_phase_deviations(spec, freqs, contrast, period, &cfg.fit)?;
            r.congruence = *m;
            Ok(r)
        })
        .collect();
    let mut fits: Vec<IdentificationResult> = fits.into_iter().collect::<Result<_>>()?;
    fits.sort_by(|a, b| {
        a.fit_residual
            .total_cmp(&b.fit_residual)
            .then(a.components.len().cmp(&b.components.len()))
            .then(a.freqs().iter().sum::<f64>().total_cmp(&b.freqs().iter().sum::<f64>()))
    });
    let scores: Vec<CandidateScore> = fits
        .iter()
        .map(|r| CandidateScore {
            freqs: r.freqs(),
            congruence: r.congruence,
            peak_phase_devs: r.components.iter().map(|c| c.peak_phase_dev).collect(),
            fit_residual: r.fit_residual,
        })
        .collect();
    let mut best = fits.swap_remove(0);
    best.search_depth = depth;
    best.candidates_tested = tested;
    best.accepted = scores;
    Ok(best)
}

// Largest amplitude within one bin of `i`, above the floor, with the
// bin-average attenuation of the τ binning undone.
fn measured_at(spec: &AmplitudeSpectrum, floor: f64, i: usize) -> f64 {
    let n = spec.amplitudes.len();
    let lo = i.saturating_sub(1);
    let hi = (i + 1).min(n - 1);
    let peak = spec.amplitudes[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let att = crate::model::sinc(PI * spec.freqs[i] * spec.source_dtau);
    ((peak - floor) / att).max(0.0)
}

/// Spectral points compared in a fit: grid index, measured amplitude above the
/// floor, and the model lines landing there.
struct FitTarget {
    measured: Vec<f64>,
    line_slots: Vec<usize>,
}

impl FitTarget {
    fn new(spec: &AmplitudeSpectrum, model: &LineModel, peaks_hint: &[f64]) -> Self {
        let n = spec.amplitudes.len();
        let floor = crate::spectrum::median(&spec.amplitudes);
        let index = |f: f64| -> Option<usize> {
            let i = (f / spec.df).round() as i64 - 1;
            (0..n as i64).contains(&i).then_some(i as usize)
        };
        let mut slots: Vec<usize> = Vec::new();
        let mut line_slots = Vec::with_capacity(model.lines().len());
        for &f in model.lines() {
            match index(f) {
                Some(i) => {
                    let pos = slots.iter().position(|&s| s == i).unwrap_or_else(|| {
                        slots.push(i);
                        slots.len() - 1
                    });
                    line_slots.push(pos);
                }
                None => line_slots.push(usize::MAX),
            }
        }
        for &f in peaks_hint {
            if let Some(i) = index(f) {
                if !slots.contains(&i) {
                    slots.push(i);
                }
            }
        }
        let measured = slots.iter().map(|&i| measured_at(spec, floor, i)).collect();
        FitTarget {
            measured,
            line_slots,
        }
    }

    /// Residual sum of squares after the least-squares overall scale,
    /// clamped to `scale`.
    fn rss(&self, line_amps: &[f64], scale: (f64, f64), buf: &mut [f64]) -> f64 {
        buf.iter_mut().for_each(|v| *v = 0.0);
        for (a, &s) in line_amps.iter().zip(&self.line_slots) {
            if s != usize::MAX {
                buf[s] += a;
            }
        }
        let mm: f64 = buf.iter().map(|m| m * m).sum();
        let md: f64 = buf.iter().zip(&self.measured).map(|(m, d)| m * d).sum();
        let s = if mm > 0.0 { (md / mm).clamp(scale.0, scale.1) } else { 1.0 };
        buf.iter()
            .zip(&self.measured)
            .map(|(m, d)| (s * m - d).powi(2))
            .sum()
    }
}

/// With contrast and frequencies fixed, fit each peak phase deviation by
/// coordinate scans over `[0, max_dev]` followed by golden-section refinement.
/// Phases are left at zero.
pub fn fit_peak_phase_deviations(
    spec: &AmplitudeSpectrum,
    freqs: &[f64],
    contrast: f64,
    period: f64,
    cfg: &PhaseFitConfig,
) -> Result<IdentificationResult> {
    cfg.validate()?;
    if freqs.is_empty() {
        return Err(Error::Input("no frequencies to fit".into()));
    }
    if !(contrast > 0.0) {
        return Err(Error::Fit(format!("contrast must be > 0 for the phase fit, got {contrast}")));
    }
    let n = freqs.len();
    let cap = cfg.order_cap(n);
    let model = LineModel::new(freqs, 1.0 / spec.df, cap, 2_000_000)?;
    let target = FitTarget::new(spec, &model, &[]);
    let mut buf = vec![0.0; target.measured.len()];

    let grid: Vec<f64> = {
        let steps = (cfg.max_dev / cfg.step).round() as usize;
        (0..=steps).map(|i| i as f64 * cfg.step).collect()
    };
    let tables: Vec<BesselTable> = grid.iter().map(|&d| BesselTable::new(d, cap)).collect();
    let phases = vec![0.0; n];
    let scale = ((1.0 - cfg.contrast_tolerance).powi(2), (1.0 + cfg.contrast_tolerance).powi(2));
    let eval = |idx: &[usize], buf: &mut [f64]| -> f64 {
        let t: Vec<BesselTable> = idx.iter().map(|&i| tables[i].clone()).collect();
        target.rss(&model.amplitudes_with(contrast, &t, &phases), scale, buf)
    };

    let descend = |mut idx: Vec<usize>, buf: &mut [f64]| -> (Vec<usize>, f64) {
        let mut best = eval(&idx, buf);
        for _ in 0..cfg.sweeps {
            let before = best;
            for j in 0..n {
                for g in 0..grid.len() {
                    let mut trial = idx.clone();
                    trial[j] = g;
                    let r = eval(&trial, buf);
                    if r < best {
                        best = r;
                        idx = trial;
                    }
                }
            }
            if best >= before {
                break;
            }
        }
        (idx, best)
    };

    // Start once from zero and once from per-component estimates using the
    // ratios of each fundamental's own harmonics.
    let floor = crate::spectrum::median(&spec.amplitudes);
    let ratio_start: Vec<usize> = freqs
        .iter()
        .map(|&f| {
            let meas: Vec<(u32, f64)> = (1..=cap)
                .filter_map(|m| {
                    let i = (m as f64 * f / spec.df).round() as i64 - 1;
                    (0..spec.amplitudes.len() as i64)
                        .contains(&i)
                        .then(|| (m, measured_at(spec, floor, i as usize)))
                })
                .collect();
            let half_k2 = 0.5 * contrast * contrast;
            let score = |t: &BesselTable| -> f64 {
                let b: Vec<f64> = meas.iter().map(|&(m, _)| t.get(m as i32).powi(2)).collect();
                let scale = if meas.len() < 2 {
                    half_k2
                } else {
                    let den: f64 = b.iter().map(|v| v * v).sum();
                    if den > 0.0 {
                        b.iter().zip(&meas).map(|(v, (_, y))| v * y).sum::<f64>() / den
                    } else {
                        0.0
                    }
                };
                b.iter().zip(&meas).map(|(v, (_, y))| (scale * v - y).powi(2)).sum()
            };
            (0..grid.len())
                .min_by(|&a, &b| score(&tables[a]).total_cmp(&score(&tables[b])))
                .unwrap_or(0)
        })
        .collect();
    let (idx, _) = [vec![0usize; n], ratio_start]
        .into_iter()
        .map(|start| descend(start, &mut buf))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("two starts");

    // continuous refinement around the grid optimum
    let mut devs: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
    let eval_devs = |d: &[f64], buf: &mut [f64]| -> f64 {
        target.rss(&model.amplitudes(contrast, d, &phases), scale, buf)
    };
    let mut best = eval_devs(&devs, &mut buf);
    for _ in 0..2 {
        for j in 0..n {
            let (mut a, mut b) = ((devs[j] - cfg.step).max(0.0), devs[j] + cfg.step);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut trial = devs.clone();
            let f = |x: f64, trial: &mut Vec<f64>, buf: &mut [f64]| {
                trial[j] = x;
                eval_devs(trial, buf)
            };
            let mut c = b - g * (b - a);
            let mut d = a + g * (b - a);
            let mut fc = f(c, &mut trial, &mut buf);
            let mut fd = f(d, &mut trial, &mut buf);
            for _ in 0..40 {
                if fc < fd {
                    b = d;
                    d = c;
                    fd = fc;
                    c = b - g * (b - a);
                    fc = f(c, &mut trial, &mut buf);
                } else {
                    a = c;
                    c = d;
                    fc = fd;
                    d = a + g * (b - a);
                    fd = f(d, &mut trial, &mut buf);
                }
            }
            let x = if fc < fd { c } else { d };
            let r = f(x, &mut trial, &mut buf);
            if r < best {
                best = r;
                devs[j] = x;
            }
        }
    }

    let residual = best.sqrt() / (0.5 * contrast * contrast);
    let components = freqs
        .iter()
        .zip(&devs)
        .map(|(&f, &d)| PerturbationComponent::new(f, d, 0.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(IdentificationResult {
        components,
        congruence: 100.0,
        fit_residual: residual,
        contrast_used: contrast,
        period_used: period,
        poor_fit: residual > cfg.poor_fit_residual,
        search_depth: n,
        candidates_tested: 1,
        accepted: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{theoretical_spectrum, ExpansionLimits};
    use crate::spectrum::{Peak, Resolution};

    const PAPER_LIST: [f64; 17] = [
        6.0, 12.0, 18.0, 22.0, 28.0, 34.0, 40.0, 46.0, 52.0, 58.0, 62.0, 68.0, 74.0, 80.0, 86.0, 92.0, 98.0,
    ];

    fn spectrum_from(comps: &[PerturbationComponent], df: f64, f_max: f64) -> AmplitudeSpectrum {
        let n = (f_max / df).round() as usize;
        let freqs: Vec<f64> = (1..=n).map(|i| i as f64 * df).collect();
        let t = theoretical_spectrum(&freqs, 0.6, comps, 1.0 / df, &ExpansionLimits::for_components(comps.len())).unwrap();
        AmplitudeSpectrum {
            df,
            f_max,
            freqs,
            amplitudes: t.amplitudes,
            n_rows_averaged: 1,
            source_dtau: 0.0,
            rows_u: vec![],
            resolution: Resolution::Matched,
        }
    }

    fn peak_list(freqs: &[f64], df: f64, f_max: f64) -> PeakList {
        PeakList {
            peaks: freqs
                .iter()
                .map(|&f| Peak {
                    freq: f,
                    amplitude: 1.0,
                    snr: 100.0,
                })
                .collect(),
            noise_floor: 0.0,
            sigma: 0.0,
            threshold: 0.0,
            df,
            f_max,
        }
    }

    #[test]
    fn expected_single() {
        let e = expected_components(&[6.0], 100.0, 20, 0.1).unwrap();
        let want: Vec<f64> = (1..=16).map(|m| 6.0 * m as f64).collect();
        assert_eq!(e, want);
        assert!(expected_components(&[], 100.0, 20, 0.1).is_err());
    }

    #[test]
    fn expected_pair_contains_intermodulation() {
        let e = expected_components(&[6.0, 40.0], 100.0, 8, 0.1).unwrap();
        for f in [34.0, 46.0, 74.0, 86.0] {
            assert!(e.iter().any(|&x| (x - f).abs() < 1e-9), "{f}");
        }
        // brute force over m1·6 + m2·40
        let mut brute = Vec::new();
        for m1 in -8i32..=8 {
            for m2 in -2i32..=2 {
                let f = (m1 as f64 * 6.0 + m2 as f64 * 40.0).abs();
                if m1.abs() + m2.abs() <= 8 && f > 0.0 && f <= 100.0 && !brute.contains(&f) {
                    brute.push(f);
                }
            }
        }
        brute.sort_by(f64::total_cmp);
        assert_eq!(e, brute);
    }

    #[test]
    fn paper_congruence_value() {
        let e = expected_components(&[6.0], 100.0, 20, 0.1).unwrap();
        let m = congruence(&e, &PAPER_LIST, 0.1);
        assert!((m - 17.6).abs() < 0.05, "{m}");
        assert_eq!(congruence(&PAPER_LIST, &PAPER_LIST, 0.1), 100.0);
        // |m_j| ≤ 1 here, leaving 16, 58 and 74 of which two are peaks
        let pair = expected_components(&[58.0, 74.0], 100.0, 8, 0.1).unwrap();
        assert_eq!(pair, vec![16.0, 58.0, 74.0]);
        assert!((congruence(&pair, &PAPER_LIST, 0.1) - 200.0 / 17.0).abs() < 1e-9);
        let off = expected_components(&[50.5], 100.0, 20, 0.1).unwrap();
        assert_eq!(congruence(&off, &PAPER_LIST, 0.1), 0.0);
    }

    #[test]
    fn paper_two_frequency_search() {
        let comps = [
            PerturbationComponent::new(6.0, 0.6 * PI, 0.0).unwrap(),
            PerturbationComponent::new(40.0, 0.5 * PI, 0.0).unwrap(),
        ];
        let spec = spectrum_from(&comps, 0.1, 100.0);
        let peaks = peak_list(&PAPER_LIST, 0.1, 100.0);
        let r = search(&peaks, &spec, 0.6, 2.6, &SearchConfig::default()).unwrap();
        assert_eq!(r.freqs(), vec![6.0, 40.0]);
        assert!(r.accepted.len() > 1);
        let again = search(&peaks, &spec, 0.6, 2.6, &SearchConfig::default()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn singleton_peak() {
        let comps = [PerturbationComponent::new(540.0, 0.2, 0.0).unwrap()];
        let spec = spectrum_from(&comps, 0.1, 1000.0);
        let peaks = peak_list(&[540.0], 0.1, 1000.0);
        let r = search(&peaks, &spec, 0.6, 2.6, &SearchConfig::default()).unwrap();
        assert_eq!(r.freqs(), vec![540.0]);
        assert_eq!(r.congruence, 100.0);
    }

    #[test]
    fn failure_reports_best() {
        let spec = spectrum_from(&[PerturbationComponent::new(5.0, 0.5, 0.0).unwrap()], 0.1, 100.0);
        // pairwise incommensurate peaks never reach 80% with one or two lines
        let peaks = peak_list(&[11.3, 23.9, 37.1, 52.7, 71.3, 89.9], 0.1, 100.0);
        let cfg = SearchConfig {
            max_n: 2,
            ..Default::default()
        };
        match search(&peaks, &spec, 0.6, 2.6, &cfg) {
            Err(Error::IdentificationFailure { best, .. }) => assert!(!best.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fit_recovers_single_deviation() {
        let comps = [PerturbationComponent::new(540.0, 0.6 * PI, 0.0).unwrap()];
        let spec = spectrum_from(&comps, 0.1, 2000.0);
        let r = fit_peak_phase_deviations(&spec, &[540.0], 0.6, 2.6, &PhaseFitConfig::default()).unwrap();
        let d = r.components[0].peak_phase_dev / PI;
        assert!((d - 0.6).abs() < 0.005, "{d}");
        assert!(r.fit_residual < 1e-3);
    }

    #[test]
    fn fit_on_zero_spectrum() {
        let mut spec = spectrum_from(&[PerturbationComponent::new(50.0, 0.0, 0.0).unwrap()], 0.1, 200.0);
        spec.amplitudes.iter_mut().for_each(|a| *a = 0.0);
        let r = fit_peak_phase_deviations(&spec, &[50.0], 0.6, 2.6, &PhaseFitConfig::default()).unwrap();
        assert!(r.components[0].peak_phase_dev < 0.02);
        assert!(r.fit_residual < 1e-6);
    }

    #[test]
    fn fit_recovers_two_deviations() {
        let comps = [
            PerturbationComponent::new(6.0, 0.6 * PI, 0.0).unwrap(),
            PerturbationComponent::new(40.0, 0.5 * PI, 0.0).unwrap(),
        ];
        let spec = spectrum_from(&comps, 0.1, 100.0);
        let r = fit_peak_phase_deviations(&spec, &[6.0, 40.0], 0.6, 2.6, &PhaseFitConfig::default()).unwrap();
        assert!((r.components[0].peak_phase_dev / PI - 0.6).abs() < 0.01);
        assert!((r.components[1].peak_phase_dev / PI - 0.5).abs() < 0.01);
    }

    #[test]
    fn combinations_lexicographic() {
        let c = combinations(&[1.0, 2.0, 3.0, 4.0], 2);
        assert_eq!(c.len(), 6);
        assert_eq!(c[0], vec![1.0, 2.0]);
        assert_eq!(c[5], vec![3.0, 4.0]);
        assert!(combinations(&[1.0], 2).is_empty());
    }

    #[test]
    fn config_validation() {
        let bad = SearchConfig {
            reject_threshold: 90.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(SearchConfig::default().order_cap(1), 20);
        assert_eq!(SearchConfig::default().order_cap(4), 8);
    }
}
