//! Normalized pair histogram `g²(u, τ)` and fringe fits.

mod fit;

pub use fit::{fit_integrated, fit_sinusoid, fit_zero_lag, FitOptions, FringeFit, ParameterCi, SineFit};

use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

use crate::error::{Error, Result};
use crate::events::{Event, EventList};

/// Largest number of histogram cells allocated for one grid.
pub const MAX_GRID_CELLS: usize = 250_000_000;

/// Pair counts binned in `u = y_i - y_j` (both signs) and `τ = t_i - t_j ≥ 0`,
/// with the expected count of an uncorrelated stream per bin.
#[derive(Debug, Clone, Serialize)]
pub struct CorrelationGrid {
    pub du: f64,
    pub dtau: f64,
    /// Upper edge of the last τ bin.
    pub tau_max: f64,
    pub duration: f64,
    pub window: f64,
    pub n_events: usize,
    half_u: usize,
    n_tau: usize,
    #[serde(skip)]
    counts: Vec<u32>,
    #[serde(skip)]
    exposure_u: Vec<f64>,
    #[serde(skip)]
    exposure_tau: Vec<f64>,
    base: f64,
}

impl CorrelationGrid {
    pub fn n_u(&self) -> usize {
        2 * self.half_u + 1
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    /// Centre of u bin `iu`, mm.
    pub fn u_center(&self, iu: usize) -> f64 {
        (iu as f64 - self.half_u as f64) * self.du
    }

    /// Lower edge of τ bin `it`, s. Bin `it` covers `[it·Δτ, (it+1)·Δτ)`.
    pub fn tau_lower(&self, it: usize) -> f64 {
        it as f64 * self.dtau
    }

    pub fn tau_center(&self, it: usize) -> f64 {
        (it as f64 + 0.5) * self.dtau
    }

    /// Bin index whose centre is nearest `u`.
    pub fn u_index(&self, u: f64) -> Option<usize> {
        let i = (u / self.du).round() as i64 + self.half_u as i64;
        (0..self.n_u() as i64).contains(&i).then_some(i as usize)
    }

    pub fn count(&self, iu: usize, it: usize) -> u32 {
        self.counts[iu * self.n_tau + it]
    }

    /// Expected count for uncorrelated events.
    pub fn expected(&self, iu: usize, it: usize) -> f64 {
        self.base * self.exposure_u[iu] * self.exposure_tau[it]
    }

    /// `g²` of one bin; zero where no pairs can occur.
    pub fn value(&self, iu: usize, it: usize) -> f64 {
        let e = self.expected(iu, it);
        if e > 0.0 {
            self.count(iu, it) as f64 / e
        } else {
            0.0
        }
    }

    /// `g²(u_iu, ·)` over all τ bins.
    pub fn row(&self, iu: usize) -> Vec<f64> {
        (0..self.n_tau).map(|it| self.value(iu, it)).collect()
    }

    /// `g²(·, τ_it)` over all u bins.
    pub fn column(&self, it: usize) -> Vec<f64> {
        (0..self.n_u()).map(|iu| self.value(iu, it)).collect()
    }

    /// Fraction of pair exposure in u bin `iu` relative to `u = 0`.
    pub fn u_exposure(&self, iu: usize) -> f64 {
        self.exposure_u[iu]
    }

    pub fn total_pairs(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Count-weighted mean of `g²`, i.e. total counts over total expected.
    pub fn normalization(&self) -> f64 {
        let eu: f64 = self.exposure_u.iter().sum();
        let et: f64 = self.exposure_tau.iter().sum();
        self.total_pairs() as f64 / (self.base * eu * et)
    }

    /// The same grid with `u → -u`.
    pub fn mirrored(&self) -> Self {
        let mut out = self.clone();
        let n_u = self.n_u();
        for iu in 0..n_u {
            let src = n_u - 1 - iu;
            out.counts[iu * self.n_tau..(iu + 1) * self.n_tau]
                .copy_from_slice(&self.counts[src * self.n_tau..(src + 1) * self.n_tau]);
        }
        out.exposure_u.reverse();
        out
    }

    /// Columns `u_mm,tau_s,g2,count`; τ is the bin centre.
    pub fn write_columns<W: Write>(&self, w: W) -> Result<()> {
        self.write_columns_upto(w, self.n_tau)
    }

    /// As [`write_columns`](Self::write_columns), for the first `n_tau` τ bins only.
    pub fn write_columns_upto<W: Write>(&self, mut w: W, n_tau: usize) -> Result<()> {
        writeln!(w, "u_mm,tau_s,g2,count")?;
        for iu in 0..self.n_u() {
            for it in 0..n_tau.min(self.n_tau) {
                writeln!(
                    w,
                    "{},{},{},{}",
                    self.u_center(iu),
                    self.tau_center(it),
                    self.value(iu, it),
                    self.count(iu, it)
                )?;
            }
        }
        Ok(())
    }

    /// Grid with prescribed `g²` values and the exposure of a stream of
    /// `n_events`; counts are rounded from `value · expected`. Intended for
    /// analytic inputs and tests.
    pub fn from_fn(
        du: f64,
        dtau: f64,
        tau_max: f64,
        duration: f64,
        window: f64,
        n_events: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut g = Self::empty(du, dtau, tau_max, duration, window, n_events)?;
        for iu in 0..g.n_u() {
            for it in 0..g.n_tau {
                let v = (f(g.u_center(iu), g.tau_lower(it)) * g.expected(iu, it)).max(0.0).round();
                if v > u32::MAX as f64 {
                    return Err(Error::Input("analytic grid count exceeds u32 range".into()));
                }
                g.counts[iu * g.n_tau + it] = v as u32;
            }
        }
        Ok(g)
    }

    fn empty(du: f64, dtau: f64, tau_max: f64, duration: f64, window: f64, n_events: usize) -> Result<Self> {
        if !(du > 0.0 && dtau > 0.0) {
            return Err(Error::Input("bin widths du and dtau must be > 0".into()));
        }
        if !(tau_max > 0.0) {
            return Err(Error::Input("tau_max must be > 0".into()));
        }
        if tau_max > duration {
            return Err(Error::Input(format!(
                "tau_max {tau_max} s exceeds the acquisition time {duration} s"
            )));
        }
        let n_tau = ((tau_max / dtau) * (1.0 + 1e-12)).floor() as usize;
        if n_tau == 0 {
            return Err(Error::Input("tau_max is shorter than one dtau bin".into()));
        }
        let half_u = (window / du - 0.5).ceil().max(0.0) as usize;
        let cells = (2 * half_u + 1).saturating_mul(n_tau);
        if cells > MAX_GRID_CELLS {
            return Err(Error::Input(format!(
                "correlation grid of {cells} cells exceeds the bound {MAX_GRID_CELLS}; increase du or dtau, or reduce tau_max"
            )));
        }
        let exposure_u = (0..2 * half_u + 1)
            .map(|iu| {
                let c = (iu as f64 - half_u as f64) * du;
                triangle_average(c - 0.5 * du, c + 0.5 * du, window)
            })
            .collect();
        let exposure_tau = (0..n_tau)
            .map(|it| (1.0 - (it as f64 + 0.5) * dtau / duration).max(0.0))
            .collect();
        let n = n_events as f64;
        Ok(CorrelationGrid {
            du,
            dtau,
            tau_max: n_tau as f64 * dtau,
            duration,
            window,
            n_events,
            half_u,
            n_tau,
            counts: vec![0; cells],
            exposure_u,
            exposure_tau,
            base: n * n * dtau * du / (duration * window),
        })
    }
}

// Mean of max(0, 1 - |u|/Y) over [a, b].
fn triangle_average(a: f64, b: f64, y: f64) -> f64 {
    // antiderivative of 1 - |u|/Y clipped to [-Y, Y]
    let prim = |u: f64| {
        let u = u.clamp(-y, y);
        u - u * u.abs() / (2.0 * y)
    };
    (prim(b) - prim(a)) / (b - a)
}

/// Histogram of all ordered pairs `t_i > t_j` with `τ < tau_max`, normalized so
/// that an uncorrelated stream gives `g² = 1`.
pub fn pair_histogram(events: &EventList, du: f64, dtau: f64, tau_max: f64) -> Result<CorrelationGrid> {
    if events.is_empty() {
        return Err(Error::Input("event list is empty".into()));
    }
    let mut grid = CorrelationGrid::empty(du, dtau, tau_max, events.duration(), events.window(), events.len())?;
    let ev = events.events();
    let cells = grid.counts.len();
    // one private grid per chunk, within the overall cell budget
    let chunks = rayon::current_num_threads().min(MAX_GRID_CELLS / cells.max(1)).max(1);
    let step = ev.len().div_ceil(chunks);
    let spec = Binning {
        du,
        dtau,
        tau_end: grid.tau_max,
        half_u: grid.half_u as i64,
        n_u: grid.n_u() as i64,
        n_tau: grid.n_tau,
    };

    if chunks == 1 {
        accumulate(ev, 0, ev.len(), &spec, &mut grid.counts);
    } else {
        let partials: Vec<Vec<u32>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut local = vec![0u32; cells];
                accumulate(ev, c * step, ((c + 1) * step).min(ev.len()), &spec, &mut local);
                local
            })
            .collect();
        for p in partials {
            for (a, b) in grid.counts.iter_mut().zip(p) {
                *a += b;
            }
        }
    }
    Ok(grid)
}

struct Binning {
    du: f64,
    dtau: f64,
    tau_end: f64,
    half_u: i64,
    n_u: i64,
    n_tau: usize,
}

// Pairs whose later event has index in [start, end).
fn accumulate(ev: &[Event], start: usize, end: usize, b: &Binning, counts: &mut [u32]) {
    for i in start..end {
        let ei = ev[i];
        for j in (0..i).rev() {
            let tau = ei.t - ev[j].t;
            if tau >= b.tau_end {
                break;
            }
            let it = ((tau / b.dtau) as usize).min(b.n_tau - 1);
            let iu = ((ei.y - ev[j].y) / b.du).round() as i64 + b.half_u;
            if (0..b.n_u).contains(&iu) {
                counts[iu as usize * b.n_tau + it] += 1;
            }
        }
    }
}
