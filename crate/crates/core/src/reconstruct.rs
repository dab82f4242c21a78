//! Undoing a known dephasing event by event, and refining the perturbation
//! parameters by maximizing the contrast of the corrected pattern.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::correlate::{fit_integrated, FitOptions, FringeFit};
use crate::error::{Error, Result};
use crate::events::{Event, EventList};
use crate::identify::IdentificationResult;
use crate::model::{phase_shift, PerturbationComponent};

/// Shift every `y` by `(λ/2π)·φ(t)`, wrapped into the window. The shift has
/// the sign that cancels the phase in `cos(ky + θ + φ(t))`.
pub fn reconstruct_events(events: &EventList, period: f64, components: &[PerturbationComponent]) -> Result<EventList> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::Input(format!("period must be > 0, got {period}")));
    }
    let window = events.window();
    let scale = period / TAU;
    let shifted: Vec<Event> = events
        .events()
        .par_iter()
        .map(|e| {
            let mut y = (e.y + scale * phase_shift(components, e.t)).rem_euclid(window);
            // rem_euclid can round up to the window edge
            if y >= window {
                y = 0.0;
            }
            Event { x: e.x, y, t: e.t }
        })
        .collect();
    EventList::new(shifted, events.duration(), window)
}

/// Search windows and stopping rule for [`optimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeWindows {
    /// Half-width of the frequency scan, Hz (twice the spectral grid spacing).
    pub freq_half_width: f64,
    /// Hz.
    pub freq_step: f64,
    /// Half-width of the peak phase deviation scan, rad.
    pub dev_half_width: f64,
    /// rad.
    pub dev_step: f64,
    /// Step of the phase scan over `[0, 2π)`, rad.
    pub phase_step: f64,
    /// A full sweep must raise the contrast by at least this much to continue.
    pub min_gain: f64,
    pub max_sweeps: usize,
    /// Histogram bins for the final integrated fit.
    pub integrated_bins: usize,
}

impl OptimizeWindows {
    /// Windows for a spectrum with grid spacing `df`.
    pub fn for_resolution(df: f64) -> Self {
        OptimizeWindows {
            freq_half_width: 2.0 * df,
            freq_step: 1e-3,
            dev_half_width: 0.2 * PI,
            dev_step: 0.01 * PI,
            phase_step: 0.01 * PI,
            min_gain: 1e-3,
            max_sweeps: 20,
            integrated_bins: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.freq_step, self.dev_step, self.phase_step, self.min_gain];
        if positive.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Config("optimizer steps and gain threshold must be > 0".into()));
        }
        if !(self.freq_half_width >= 0.0 && self.dev_half_width >= 0.0) {
            return Err(Error::Config("optimizer windows must be >= 0".into()));
        }
        if self.max_sweeps == 0 || self.integrated_bins < 16 {
            return Err(Error::Config("optimizer needs at least one sweep and 16 bins".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionResult {
    pub components: Vec<PerturbationComponent>,
    /// `K_rec` from the integrated fit of the reconstructed events.
    pub contrast: f64,
    /// `λ_rec`, mm.
    pub period: f64,
    pub fringe_fit: FringeFit,
    /// Completed sweeps.
    pub iterations: usize,
    pub window_used: OptimizeWindows,
    /// Objective after the start and after each single-component refinement.
    pub objective_history: Vec<f64>,
    /// The optimizer found nothing better than the initial parameters.
    pub not_improved: bool,
}

// Contrast of the phase-corrected pattern at fixed period:
// 2|⟨exp(i(k y + φ(t)))⟩|, the least-squares amplitude over a window holding
// an integer number of fringes.
struct Objective {
    base: Vec<Complex64>,
    times: Vec<f64>,
}

impl Objective {
    fn new(events: &EventList, period: f64) -> Self {
        let k = TAU / period;
        Objective {
            base: events.events().iter().map(|e| Complex64::from_polar(1.0, k * e.y)).collect(),
            times: events.events().iter().map(|e| e.t).collect(),
        }
    }

    // Phasors with every component but `skip` applied.
    fn partial(&self, comps: &[PerturbationComponent], skip: usize) -> Vec<Complex64> {
        self.base
            .par_iter()
            .zip(&self.times)
            .map(|(z, &t)| {
                let phi: f64 = comps
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != skip)
                    .map(|(_, c)| c.phase_at(t))
                    .sum();
                z * Complex64::from_polar(1.0, phi)
            })
            .collect()
    }

    fn with(&self, partial: &[Complex64], c: &PerturbationComponent) -> f64 {
        if partial.is_empty() {
            return 0.0;
        }
        let s: Complex64 = partial
            .iter()
            .zip(&self.times)
            .map(|(z, &t)| z * Complex64::from_polar(1.0, c.phase_at(t)))
            .sum();
        2.0 * s.norm() / partial.len() as f64
    }

    fn value(&self, comps: &[PerturbationComponent]) -> f64 {
        let p = self.partial(comps, usize::MAX);
        if p.is_empty() {
            return 0.0;
        }
        2.0 * p.iter().sum::<Complex64>().norm() / p.len() as f64
    }
}

// Best trial by objective, lowest index on ties.
fn scan(
    obj: &Objective,
    partial: &[Complex64],
    trials: &[PerturbationComponent],
) -> Option<(PerturbationComponent, f64)> {
    let values: Vec<f64> = trials.par_iter().map(|c| obj.with(partial, c)).collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, v)| (trials[i], v))
}

fn grid(center: f64, half: f64, step: f64, lower: f64) -> Vec<f64> {
    let n = (half / step).round() as i64;
    (-n..=n)
        .map(|i| center + i as f64 * step)
        .filter(|&v| v >= lower)
        .collect()
}

/// Coordinate ascent of the corrected contrast over `(ϕ_j, φ_j, f_j)` in
/// narrow windows around the identified values, refining components one
/// after another from the largest deviation down.
pub fn optimize(
    events: &EventList,
    initial: &IdentificationResult,
    windows: &OptimizeWindows,
) -> Result<ReconstructionResult> {
    windows.validate()?;
    if initial.components.is_empty() {
        return Err(Error::Input("no components to optimize".into()));
    }
    let period = initial.period_used;
    if !(period > 0.0) {
        return Err(Error::Input(format!("period must be > 0, got {period}")));
    }
    let obj = Objective::new(events, period);
    let mut comps = initial.components.clone();
    let mut order: Vec<usize> = (0..comps.len()).collect();
    order.sort_by(|&a, &b| comps[b].peak_phase_dev.total_cmp(&comps[a].peak_phase_dev).then(a.cmp(&b)));

    let start = obj.value(&comps);
    let mut current = start;
    let mut history = vec![start];
    let mut sweeps = 0;
    while sweeps < windows.max_sweeps {
        let before = current;
        for &j in &order {
            let partial = obj.partial(&comps, j);
            let c = comps[j];
            let mut best = (c, obj.with(&partial, &c));

            let phases: Vec<PerturbationComponent> = (0..(TAU / windows.phase_step).round() as usize)
                .map(|i| PerturbationComponent { phase: i as f64 * windows.phase_step, ..best.0 })
                .collect();
            if let Some(t) = scan(&obj, &partial, &phases).filter(|t| t.1 > best.1) {
                best = t;
            }
            let devs: Vec<PerturbationComponent> = grid(best.0.peak_phase_dev, windows.dev_half_width, windows.dev_step, 0.0)
                .into_iter()
                .map(|d| PerturbationComponent { peak_phase_dev: d, ..best.0 })
                .collect();
            if let Some(t) = scan(&obj, &partial, &devs).filter(|t| t.1 > best.1) {
                best = t;
            }
            let freqs: Vec<PerturbationComponent> =
                grid(best.0.freq, windows.freq_half_width, windows.freq_step, f64::MIN_POSITIVE)
                    .into_iter()
                    .map(|f| PerturbationComponent { freq: f, ..best.0 })
                    .collect();
            if let Some(t) = scan(&obj, &partial, &freqs).filter(|t| t.1 > best.1) {
                best = t;
            }
            comps[j] = best.0;
            current = best.1;
            history.push(current);
        }
        sweeps += 1;
        if current - before < windows.min_gain {
            break;
        }
    }

    let not_improved = !(current > start);
    if not_improved {
        comps = initial.components.clone();
    }
    let rec = reconstruct_events(events, period, &comps)?;
    let opts = FitOptions {
        period_range: Some((0.8 * period, 1.25 * period)),
    };
    let fit = fit_integrated(&rec, windows.integrated_bins, &opts)?;
    Ok(ReconstructionResult {
        components: comps,
        contrast: fit.contrast,
        period: fit.period,
        fringe_fit: fit,
        iterations: sweeps,
        window_used: windows.clone(),
        objective_history: history,
        not_improved,
    })
}

/// Contrast of `events` after reconstruction with `components`, from the
/// integrated fit with the period restricted near `period`.
pub fn reconstructed_contrast(
    events: &EventList,
    period: f64,
    components: &[PerturbationComponent],
    n_bins: usize,
) -> Result<FringeFit> {
    let rec = reconstruct_events(events, period, components)?;
    fit_integrated(
        &rec,
        n_bins,
        &FitOptions {
            period_range: Some((0.8 * period, 1.25 * period)),
        },
    )
}
