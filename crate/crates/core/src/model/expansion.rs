//! Bessel-multiplet expansion of the correlation function and its line
//! spectrum.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, TAU};

use super::bessel::BesselTable;
use super::PerturbationComponent;
use crate::error::{Error, Result};

/// Integer multiplet `{n_j, m_j}` indexing one term of the expansion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Multiplet {
    pub n: Vec<i32>,
    pub m: Vec<i32>,
}

impl Multiplet {
    pub fn new(n: Vec<i32>, m: Vec<i32>) -> Result<Self> {
        if n.len() != m.len() {
            return Err(Error::Input(format!(
                "multiplet halves differ in length ({} vs {})",
                n.len(),
                m.len()
            )));
        }
        Ok(Multiplet { n, m })
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        self.n.iter().zip(&self.m).all(|(n, m)| *n == -*m)
    }

    /// Spatial correlation phase `π/2 Σ (m_j - n_j)`.
    pub fn spatial_phase(&self) -> f64 {
        FRAC_PI_2 * self.n.iter().zip(&self.m).map(|(n, m)| (m - n) as f64).sum::<f64>()
    }

    /// Temporal phase `Σ ϕ_j (m_j + n_j)`.
    pub fn temporal_phase(&self, components: &[PerturbationComponent]) -> f64 {
        self.n
            .iter()
            .zip(&self.m)
            .zip(components)
            .map(|((n, m), c)| c.phase * (m + n) as f64)
            .sum()
    }

    /// Line position `Σ m_j f_j` in Hz.
    pub fn line_frequency(&self, components: &[PerturbationComponent]) -> f64 {
        self.m.iter().zip(components).map(|(m, c)| *m as f64 * c.freq).sum()
    }

    /// `Σ (n_j + m_j) f_j` in Hz; zero for a strictly resonant multiplet.
    pub fn mismatch(&self, components: &[PerturbationComponent]) -> f64 {
        self.n
            .iter()
            .zip(&self.m)
            .zip(components)
            .map(|((n, m), c)| (n + m) as f64 * c.freq)
            .sum()
    }

    fn order_sum_parity_even(&self) -> bool {
        self.n.iter().zip(&self.m).map(|(n, m)| n + m).sum::<i32>() % 2 == 0
    }
}

/// Truncation of the infinite multiplet sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct ExpansionLimits {
    /// Largest `|n_j|`, `|m_j|`.
    pub order_cap: u32,
    /// Multiplets with `|B̃|` below this are dropped.
    pub min_amplitude: f64,
    /// Enumeration fails beyond this many admitted multiplets.
    pub max_multiplets: usize,
}

impl ExpansionLimits {
    pub fn for_components(count: usize) -> Self {
        ExpansionLimits {
            order_cap: if count <= 1 { 12 } else { 6 },
            min_amplitude: 1e-6,
            max_multiplets: 2_000_000,
        }
    }

    pub fn exhaustive(order_cap: u32) -> Self {
        ExpansionLimits {
            order_cap,
            min_amplitude: 0.0,
            max_multiplets: 2_000_000,
        }
    }
}

const MAX_SEARCH_VOLUME: f64 = 1e13;

/// All multiplets with `|n_j|, |m_j| ≤ order_cap` whose frequency mismatch is
/// below the resolution `1/T` and whose Bessel product reaches
/// `limits.min_amplitude`.
pub fn enumerate_multiplets(
    components: &[PerturbationComponent],
    duration: f64,
    limits: &ExpansionLimits,
) -> Result<Vec<Multiplet>> {
    if !(duration > 0.0) {
        return Err(Error::Input(format!("acquisition time must be > 0, got {duration}")));
    }
    let count = components.len();
    let cap = limits.order_cap as i32;
    let volume = ((2 * cap + 1) as f64).powi(2 * count as i32);
    if volume > MAX_SEARCH_VOLUME {
        return Err(overflow(limits, count));
    }

    let freqs: Vec<f64> = components.iter().map(|c| c.freq).collect();
    let tables: Vec<BesselTable> = components
        .iter()
        .map(|c| BesselTable::new(c.peak_phase_dev, limits.order_cap))
        .collect();
    let mut suffix = vec![0.0; count + 1];
    for j in (0..count).rev() {
        suffix[j] = suffix[j + 1] + freqs[j].abs();
    }

    let mut walker = Walker {
        freqs: &freqs,
        tables: &tables,
        suffix: &suffix,
        tol: 1.0 / duration,
        cap,
        limits,
        sums: vec![0; count],
        n: vec![0; count],
        out: Vec::new(),
    };
    walker.sums_from(0, 0.0)?;
    Ok(walker.out)
}

fn overflow(limits: &ExpansionLimits, components: usize) -> Error {
    Error::EnumerationOverflow {
        bound: limits.max_multiplets,
        order_cap: limits.order_cap,
        components,
    }
}

struct Walker<'a> {
    freqs: &'a [f64],
    tables: &'a [BesselTable],
    suffix: &'a [f64],
    tol: f64,
    cap: i32,
    limits: &'a ExpansionLimits,
    sums: Vec<i32>,
    n: Vec<i32>,
    out: Vec<Multiplet>,
}

impl Walker<'_> {
    // Chooses s_j = n_j + m_j subject to the resonance constraint.
    fn sums_from(&mut self, j: usize, partial: f64) -> Result<()> {
        if j == self.freqs.len() {
            if partial == 0.0 || partial.abs() < self.tol {
                return self.orders_from(0, 1.0);
            }
            return Ok(());
        }
        let reach = 2.0 * self.cap as f64 * self.suffix[j + 1];
        for s in -2 * self.cap..=2 * self.cap {
            let p = partial + s as f64 * self.freqs[j];
            if p != 0.0 && p.abs() - reach >= self.tol {
                continue;
            }
            self.sums[j] = s;
            self.sums_from(j + 1, p)?;
        }
        Ok(())
    }

    fn orders_from(&mut self, j: usize, product: f64) -> Result<()> {
        if j == self.freqs.len() {
            if self.out.len() >= self.limits.max_multiplets {
                return Err(overflow(self.limits, self.freqs.len()));
            }
            let m = self.sums.iter().zip(&self.n).map(|(s, n)| s - n).collect();
            self.out.push(Multiplet {
                n: self.n.clone(),
                m,
            });
            return Ok(());
        }
        let s = self.sums[j];
        let lo = (-self.cap).max(s - self.cap);
        let hi = self.cap.min(s + self.cap);
        for n in lo..=hi {
            let m = s - n;
            let p = product * (self.tables[j].get(n) * self.tables[j].get(m)).abs();
            if p < self.limits.min_amplitude {
                continue;
            }
            self.n[j] = n;
            self.orders_from(j + 1, p)?;
        }
        Ok(())
    }
}

/// `B̃ = Π_j J_{n_j}(φ_j) J_{m_j}(φ_j)`.
pub fn bessel_amplitude(multiplet: &Multiplet, components: &[PerturbationComponent]) -> Result<f64> {
    if multiplet.len() != components.len() {
        return Err(Error::Input(format!(
            "multiplet has {} entries but there are {} components",
            multiplet.len(),
            components.len()
        )));
    }
    Ok(multiplet
        .n
        .iter()
        .zip(&multiplet.m)
        .zip(components)
        .map(|((&n, &m), c)| {
            let cap = n.unsigned_abs().max(m.unsigned_abs());
            let t = BesselTable::new(c.peak_phase_dev, cap);
            t.get(n) * t.get(m)
        })
        .product())
}

#[derive(Debug, Clone, Copy)]
struct CorrelationTerm {
    amplitude: f64,
    angular_freq: f64,
    temporal_phase: f64,
    spatial_phase: f64,
}

/// The explicit multiplet sum for `g²(u, τ)`, prepared once for repeated
/// evaluation.
#[derive(Debug, Clone)]
pub struct ExplicitCorrelation {
    half_contrast_sq: f64,
    wavenumber: f64,
    terms: Vec<CorrelationTerm>,
}

impl ExplicitCorrelation {
    pub fn new(
        contrast: f64,
        wavenumber: f64,
        components: &[PerturbationComponent],
        duration: f64,
        limits: &ExpansionLimits,
    ) -> Result<Self> {
        let multiplets = enumerate_multiplets(components, duration, limits)?;
        let mut terms = Vec::with_capacity(multiplets.len());
        for mp in &multiplets {
            terms.push(CorrelationTerm {
                amplitude: bessel_amplitude(mp, components)?,
                angular_freq: TAU * mp.line_frequency(components),
                temporal_phase: mp.temporal_phase(components),
                spatial_phase: mp.spatial_phase(),
            });
        }
        Ok(ExplicitCorrelation {
            half_contrast_sq: 0.5 * contrast * contrast,
            wavenumber,
            terms,
        })
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn value(&self, u: f64, tau: f64) -> f64 {
        let ku = self.wavenumber * u;
        let sum: f64 = self
            .terms
            .iter()
            .map(|t| {
                t.amplitude
                    * (t.angular_freq * tau + t.temporal_phase).cos()
                    * (ku + t.spatial_phase).cos()
            })
            .sum();
        1.0 + self.half_contrast_sq * sum
    }
}

/// Explicit correlation function at one point.
pub fn explicit_g2(
    u: f64,
    tau: f64,
    contrast: f64,
    wavenumber: f64,
    components: &[PerturbationComponent],
    duration: f64,
    limits: &ExpansionLimits,
) -> Result<f64> {
    Ok(ExplicitCorrelation::new(contrast, wavenumber, components, duration, limits)?.value(u, tau))
}

/// Modulation amplitude `A(τ) = ½K₀² Π_j Σ_m J_m(φ_j)² cos(m ω_j τ)`.
pub fn approx_amplitude(tau: f64, contrast: f64, components: &[PerturbationComponent], order_cap: u32) -> f64 {
    let cap = order_cap as i32;
    let product: f64 = components
        .iter()
        .map(|c| {
            let t = BesselTable::new(c.peak_phase_dev, order_cap);
            let w = c.angular_freq() * tau;
            (-cap..=cap).map(|m| t.get(m).powi(2) * (m as f64 * w).cos()).sum::<f64>()
        })
        .product();
    0.5 * contrast * contrast * product
}

/// Approximate correlation function `1 + A(τ) cos(k u)` (diagonal multiplets only).
pub fn approx_g2(
    u: f64,
    tau: f64,
    contrast: f64,
    wavenumber: f64,
    components: &[PerturbationComponent],
    order_cap: u32,
) -> f64 {
    1.0 + approx_amplitude(tau, contrast, components, order_cap) * (wavenumber * u).cos()
}

/// Line amplitudes deposited on a frequency grid.
#[derive(Debug, Clone, Serialize)]
pub struct TheoreticalSpectrum {
    pub freqs: Vec<f64>,
    pub amplitudes: Vec<f64>,
    /// The grid spacing exceeds the `1/T` resolution somewhere.
    pub coarse_grid: bool,
}

/// Positive-frequency amplitude spectrum of the correlation function seen on a
/// fringe antinode row.
///
/// Each multiplet contributes `B̃ cos(φ̃) e^{iΦ}` at `Σ m_j f_j`; contributions
/// falling on the same grid point add coherently and the magnitude is scaled
/// by `½K₀²`. For the diagonal family this is `½K₀² Π J_{m_j}(φ_j)²`.
pub fn theoretical_spectrum(
    freq_grid: &[f64],
    contrast: f64,
    components: &[PerturbationComponent],
    duration: f64,
    limits: &ExpansionLimits,
) -> Result<TheoreticalSpectrum> {
    validate_grid(freq_grid)?;
    let multiplets = enumerate_multiplets(components, duration, limits)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); freq_grid.len()];
    for mp in &multiplets {
        if !mp.order_sum_parity_even() {
            continue;
        }
        let f = mp.line_frequency(components);
        if f <= 0.0 {
            continue;
        }
        let Some(idx) = nearest_grid_index(freq_grid, f) else {
            continue;
        };
        let weight = bessel_amplitude(mp, components)? * mp.spatial_phase().cos().round();
        acc[idx] += Complex64::from_polar(weight, mp.temporal_phase(components));
    }
    let scale = 0.5 * contrast * contrast;
    let max_step = freq_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    Ok(TheoreticalSpectrum {
        freqs: freq_grid.to_vec(),
        amplitudes: acc.iter().map(|z| scale * z.norm()).collect(),
        coarse_grid: max_step > (1.0 + 1e-9) / duration,
    })
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Input("frequency grid is empty".into()));
    }
    if !(grid[0] > 0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input(
            "frequency grid must be positive and strictly increasing".into(),
        ));
    }
    Ok(())
}

/// Index of the grid point nearest `f`, or `None` when `f` lies more than half a
/// spacing outside the grid.
pub(crate) fn nearest_grid_index(grid: &[f64], f: f64) -> Option<usize> {
    let last = grid.len() - 1;
    let pos = grid.partition_point(|&g| g < f);
    let idx = if pos == 0 {
        0
    } else if pos > last {
        last
    } else if (f - grid[pos - 1]) <= (grid[pos] - f) {
        pos - 1
    } else {
        pos
    };
    let half = if grid.len() > 1 {
        0.5 * if idx == last {
            grid[last] - grid[last - 1]
        } else {
            grid[idx + 1] - grid[idx]
        }
    } else {
        0.5 * grid[0]
    };
    if (f - grid[idx]).abs() > half + 1e-12 * grid[idx].abs() {
        None
    } else {
        Some(idx)
    }
}

#[derive(Debug, Clone)]
struct LineTerm {
    line: usize,
    n: Vec<i32>,
    m: Vec<i32>,
    sign: f64,
}

/// Line structure for a fixed set of perturbation frequencies, reusable across
/// many trial peak phase deviations and phases.
#[derive(Debug, Clone)]
pub struct LineModel {
    order_cap: u32,
    lines: Vec<f64>,
    terms: Vec<LineTerm>,
    components: usize,
}

impl LineModel {
    pub fn new(freqs: &[f64], duration: f64, order_cap: u32, max_multiplets: usize) -> Result<Self> {
        let comps: Vec<PerturbationComponent> = freqs
            .iter()
            .map(|&f| PerturbationComponent::new(f, 0.0, 0.0))
            .collect::<Result<_>>()?;
        let limits = ExpansionLimits {
            order_cap,
            min_amplitude: 0.0,
            max_multiplets,
        };
        let multiplets = enumerate_multiplets(&comps, duration, &limits)?;

        let mut raw: Vec<(f64, Multiplet)> = multiplets
            .into_iter()
            .filter(|mp| mp.order_sum_parity_even())
            .map(|mp| (mp.line_frequency(&comps), mp))
            .filter(|(f, _)| *f > 0.0)
            .collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut lines: Vec<f64> = Vec::new();
        let mut terms = Vec::with_capacity(raw.len());
        for (f, mp) in raw {
            let same = lines
                .last()
                .is_some_and(|&l| (f - l).abs() <= 1e-9 * f.max(1.0));
            if !same {
                lines.push(f);
            }
            let sign = mp.spatial_phase().cos().round();
            terms.push(LineTerm {
                line: lines.len() - 1,
                n: mp.n,
                m: mp.m,
                sign,
            });
        }
        Ok(LineModel {
            order_cap,
            lines,
            terms,
            components: freqs.len(),
        })
    }

    pub fn lines(&self) -> &[f64] {
        &self.lines
    }

    pub fn order_cap(&self) -> u32 {
        self.order_cap
    }

    /// Line amplitudes for the given peak phase deviations and phases.
    pub fn amplitudes(&self, contrast: f64, devs: &[f64], phases: &[f64]) -> Vec<f64> {
        let tables: Vec<BesselTable> = devs
            .iter()
            .map(|&d| BesselTable::new(d, self.order_cap))
            .collect();
        self.amplitudes_with(contrast, &tables, phases)
    }

    /// As [`LineModel::amplitudes`] with precomputed Bessel tables (cap at
    /// least `order_cap`).
    pub fn amplitudes_with(&self, contrast: f64, tables: &[BesselTable], phases: &[f64]) -> Vec<f64> {
        assert_eq!(tables.len(), self.components);
        let zero_phase = phases.iter().all(|p| *p == 0.0);
        let mut acc = vec![Complex64::new(0.0, 0.0); self.lines.len()];
        for t in &self.terms {
            let mut b = t.sign;
            for (j, table) in tables.iter().enumerate() {
                b *= table.get(t.n[j]) * table.get(t.m[j]);
            }
            if zero_phase {
                acc[t.line].re += b;
            } else {
                let phi: f64 = (0..self.components)
                    .map(|j| phases[j] * (t.n[j] + t.m[j]) as f64)
                    .sum();
                acc[t.line] += Complex64::from_polar(b, phi);
            }
        }
        let scale = 0.5 * contrast * contrast;
        acc.iter().map(|z| scale * z.norm()).collect()
    }
}
