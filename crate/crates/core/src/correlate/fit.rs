//! Weighted sinusoid fits: linear in (offset, cos, sin) on a wavenumber scan,
//! then golden-section refinement of the wavenumber.

use serde::Serialize;
use std::f64::consts::TAU;

use super::CorrelationGrid;
use crate::error::{Error, Result};
use crate::events::EventList;

const Z95: f64 = 1.959_963_984_540_054;

/// Result of fitting `c0 + a cos(kx) + b sin(kx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SineFit {
    pub c0: f64,
    pub a: f64,
    pub b: f64,
    pub k: f64,
    /// Covariance of `(c0, a, b)`, scaled by the residual variance.
    pub cov: [[f64; 3]; 3],
    pub k_sigma: f64,
    pub rss: f64,
    pub dof: usize,
}

impl SineFit {
    pub fn amplitude(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// `θ` in `R cos(kx + θ)`.
    pub fn phase(&self) -> f64 {
        (-self.b).atan2(self.a)
    }

    fn var(&self, grad: [f64; 3]) -> f64 {
        let mut v = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                v += grad[i] * self.cov[i][j] * grad[j];
            }
        }
        v.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ParameterCi {
    pub contrast: f64,
    pub period: f64,
    pub phase: f64,
    pub mean: f64,
}

/// Fitted fringe: contrast `K`, period `λ` (mm), phase `θ` and mean level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FringeFit {
    pub contrast: f64,
    pub period: f64,
    pub phase: f64,
    pub mean: f64,
    /// 95% confidence half-widths.
    pub ci95: ParameterCi,
    /// Reduced chi-square of the fit.
    pub reduced_chi2: f64,
    pub points: usize,
}

impl FringeFit {
    /// Contrast divided by a known binning attenuation, with its interval.
    pub fn corrected(&self, attenuation: f64) -> FringeFit {
        let mut out = *self;
        if attenuation > 0.0 {
            out.contrast /= attenuation;
            out.ci95.contrast /= attenuation;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOptions {
    /// Restrict the period search to `[min, max]` mm.
    pub period_range: Option<(f64, f64)>,
}

#[derive(Default, Clone, Copy)]
struct Normal {
    m: [[f64; 3]; 3],
    v: [f64; 3],
    yy: f64,
}

fn normal_equations(x: &[f64], y: &[f64], w: &[f64], k: f64) -> Normal {
    let mut n = Normal::default();
    for i in 0..x.len() {
        let (s, c) = (k * x[i]).sin_cos();
        let basis = [1.0, c, s];
        let wi = w[i];
        for r in 0..3 {
            for q in r..3 {
                n.m[r][q] += wi * basis[r] * basis[q];
            }
            n.v[r] += wi * basis[r] * y[i];
        }
        n.yy += wi * y[i] * y[i];
    }
    for r in 0..3 {
        for q in 0..r {
            n.m[r][q] = n.m[q][r];
        }
    }
    n
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let scale = m[0][0].abs().max(m[1][1].abs()).max(m[2][2].abs()).powi(3);
    if !(det.abs() > 1e-13 * scale) {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    #[allow(clippy::needless_range_loop)]
    for r in 0..3 {
        for c in 0..3 {
            let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
            let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
            inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / det;
        }
    }
    Some(inv)
}

// Weighted residual sum of squares and coefficients at fixed k.
fn solve(x: &[f64], y: &[f64], w: &[f64], k: f64) -> Option<([f64; 3], f64, [[f64; 3]; 3])> {
    let n = normal_equations(x, y, w, k);
    let inv = invert3(&n.m)?;
    let mut p = [0.0; 3];
    for r in 0..3 {
        p[r] = (0..3).map(|c| inv[r][c] * n.v[c]).sum();
    }
    let fitted: f64 = (0..3).map(|r| p[r] * n.v[r]).sum();
    Some((p, (n.yy - fitted).max(0.0), inv))
}

/// Weighted least-squares fit of `c0 + a cos(kx) + b sin(kx)`, with `k`
/// searched in `[k_min, k_max]`.
pub fn fit_sinusoid(x: &[f64], y: &[f64], w: &[f64], k_min: f64, k_max: f64) -> Result<SineFit> {
    if x.len() != y.len() || x.len() != w.len() {
        return Err(Error::Fit("coordinate, value and weight lengths differ".into()));
    }
    let used = w.iter().filter(|&&v| v > 0.0).count();
    if used < 5 {
        return Err(Error::Fit(format!("only {used} weighted points; need at least 5")));
    }
    if !(k_min > 0.0 && k_max > k_min) {
        return Err(Error::Fit(format!("invalid wavenumber range [{k_min}, {k_max}]")));
    }
    let (lo, hi) = x
        .iter()
        .zip(w)
        .filter(|(_, &wi)| wi > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (&xi, _)| (a.min(xi), b.max(xi)));
    let extent = (hi - lo).max(f64::MIN_POSITIVE);
    let step = TAU / (8.0 * extent);
    let n_scan = (((k_max - k_min) / step).ceil() as usize).clamp(2, 200_000);
    let step = (k_max - k_min) / n_scan as f64;

    let rss_at = |k: f64| solve(x, y, w, k).map(|s| s.1).unwrap_or(f64::INFINITY);
    let mut best = (f64::INFINITY, k_min);
    for i in 0..=n_scan {
        let k = k_min + i as f64 * step;
        let r = rss_at(k);
        if r < best.0 {
            best = (r, k);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Fit("normal equations are singular at every trial wavenumber".into()));
    }

    let (mut a, mut b) = ((best.1 - step).max(k_min), (best.1 + step).min(k_max));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (rss_at(c), rss_at(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = rss_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = rss_at(d);
        }
        if (b - a) < 1e-12 * best.1.abs().max(1.0) {
            break;
        }
    }
    let k = if fc.min(fd) <= best.0 {
        if fc < fd {
            c
        } else {
            d
        }
    } else {
        best.1
    };

    let (p, rss, inv) = solve(x, y, w, k).ok_or_else(|| Error::Fit("singular normal equations at optimum".into()))?;
    let dof = used.saturating_sub(4).max(1);
    let s2 = rss / dof as f64;
    let mut cov = inv;
    for row in cov.iter_mut() {
        for v in row.iter_mut() {
            *v *= s2;
        }
    }
    // curvature of the profiled RSS in k
    let h = 1e-3 * step.max(1e-9 * k);
    let curv = (rss_at(k + h) - 2.0 * rss + rss_at(k - h)) / (h * h);
    let k_sigma = if curv > 0.0 { (2.0 * s2 / curv).sqrt() } else { f64::INFINITY };
    Ok(SineFit {
        c0: p[0],
        a: p[1],
        b: p[2],
        k,
        cov,
        k_sigma,
        rss,
        dof,
    })
}

fn k_bounds(default_min_period: f64, default_max_period: f64, opts: &FitOptions) -> (f64, f64) {
    let (pmin, pmax) = opts
        .period_range
        .unwrap_or((default_min_period, default_max_period));
    (TAU / pmax, TAU / pmin)
}

fn period_ci(fit: &SineFit) -> f64 {
    Z95 * TAU * fit.k_sigma / (fit.k * fit.k)
}

fn phase_var(fit: &SineFit) -> f64 {
    let r2 = fit.a * fit.a + fit.b * fit.b;
    if r2 == 0.0 {
        return f64::INFINITY;
    }
    fit.var([0.0, fit.b / r2, -fit.a / r2])
}

/// Fit of `c0 (1 + ½K² cos(ku + θ))` to the τ = 0 row, weighted by the
/// expected pair count per bin.
pub fn fit_zero_lag(grid: &CorrelationGrid, opts: &FitOptions) -> Result<FringeFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for iu in 0..grid.n_u() {
        let e = grid.expected(iu, 0);
        if e > 0.0 && grid.u_exposure(iu) > 0.05 {
            x.push(grid.u_center(iu));
            y.push(grid.value(iu, 0));
            w.push(e);
        }
    }
    let populated = (0..grid.n_u()).filter(|&iu| grid.count(iu, 0) > 0).count();
    if populated < 10 {
        return Err(Error::Fit(format!(
            "zero-lag row has {populated} populated u bins; need at least 10"
        )));
    }
    let (kmin, kmax) = k_bounds(4.0 * grid.du, grid.window, opts);
    let fit = fit_sinusoid(&x, &y, &w, kmin, kmax)?;
    let r = fit.amplitude();
    if !(fit.c0 > 0.0) {
        return Err(Error::Fit(format!("non-positive mean level {} in zero-lag fit", fit.c0)));
    }
    let contrast = (2.0 * r / fit.c0).sqrt();
    let contrast_var = if r > 0.0 {
        let dk_dr = contrast / (2.0 * r);
        let dk_dc0 = -contrast / (2.0 * fit.c0);
        fit.var([dk_dc0, dk_dr * fit.a / r, dk_dr * fit.b / r])
    } else {
        // K = √(2R/c0) has infinite slope at R = 0; use the amplitude scatter
        let sr = fit.var([0.0, 1.0, 0.0]).max(fit.var([0.0, 0.0, 1.0]));
        2.0 * sr.sqrt() / fit.c0
    };
    Ok(FringeFit {
        contrast,
        period: TAU / fit.k,
        phase: fit.phase(),
        mean: fit.c0,
        ci95: ParameterCi {
            contrast: Z95 * contrast_var.sqrt(),
            period: period_ci(&fit),
            phase: Z95 * phase_var(&fit).sqrt(),
            mean: Z95 * fit.cov[0][0].max(0.0).sqrt(),
        },
        reduced_chi2: fit.rss / fit.dof as f64,
        points: x.len(),
    })
}

/// Fit of `I₀(1 + K cos(ky + θ))` to the y histogram of all events.
pub fn fit_integrated(events: &EventList, n_bins: usize, opts: &FitOptions) -> Result<FringeFit> {
    if n_bins < 16 {
        return Err(Error::Fit(format!("need at least 16 bins, got {n_bins}")));
    }
    if events.is_empty() {
        return Err(Error::Fit("no events to fit".into()));
    }
    let width = events.window() / n_bins as f64;
    let mut counts = vec![0.0; n_bins];
    for e in events.events() {
        counts[((e.y / width) as usize).min(n_bins - 1)] += 1.0;
    }
    let x: Vec<f64> = (0..n_bins).map(|i| (i as f64 + 0.5) * width).collect();
    let w = vec![1.0; n_bins];
    let (kmin, kmax) = k_bounds(4.0 * width, events.window(), opts);
    let fit = fit_sinusoid(&x, &counts, &w, kmin, kmax)?;
    if !(fit.c0 > 0.0) {
        return Err(Error::Fit("non-positive mean level in integrated fit".into()));
    }
    let r = fit.amplitude();
    let contrast = r / fit.c0;
    let contrast_var = if r > 0.0 {
        fit.var([-r / (fit.c0 * fit.c0), fit.a / (r * fit.c0), fit.b / (r * fit.c0)])
    } else {
        fit.var([0.0, 1.0, 0.0]) / (fit.c0 * fit.c0)
    };
    // Poisson variance of a bin is its mean
    let reduced_chi2 = fit.rss / fit.dof as f64 / fit.c0;
    Ok(FringeFit {
        contrast,
        period: TAU / fit.k,
        phase: fit.phase(),
        mean: fit.c0,
        ci95: ParameterCi {
            contrast: Z95 * contrast_var.sqrt(),
            period: period_ci(&fit),
            phase: Z95 * phase_var(&fit).sqrt(),
            mean: Z95 * fit.cov[0][0].max(0.0).sqrt(),
        },
        reduced_chi2,
        points: n_bins,
    })
}
