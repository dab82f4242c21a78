//! Closed-form signal theory for a fringe pattern under harmonic phase
//! perturbations.

mod bessel;
mod expansion;
mod sensitivity;

pub use bessel::{bessel_j, bessel_j_orders, sinc, BesselTable};
pub use expansion::{
    approx_amplitude, approx_g2, bessel_amplitude, enumerate_multiplets, explicit_g2,
    theoretical_spectrum, ExpansionLimits, ExplicitCorrelation, LineModel, Multiplet,
    TheoreticalSpectrum,
};
pub use sensitivity::{
    binning_attenuation, reconstruction_sensitivity, sensitivity_closed_form, Deviation,
    Sensitivity, SensitivityMethod,
};

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// One harmonic term `φ_j cos(ω_j t + ϕ_j)` of the fringe phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationComponent {
    /// Hz.
    pub freq: f64,
    /// Peak phase deviation in radians.
    pub peak_phase_dev: f64,
    /// Radians, kept in `[0, 2π)`.
    pub phase: f64,
}

impl PerturbationComponent {
    pub fn new(freq: f64, peak_phase_dev: f64, phase: f64) -> Result<Self> {
        let c = PerturbationComponent {
            freq,
            peak_phase_dev,
            phase: normalize_phase(phase),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.freq.is_finite() && self.freq > 0.0) {
            return Err(Error::Config(format!(
                "perturbation frequency must be > 0, got {}",
                self.freq
            )));
        }
        if !(self.peak_phase_dev.is_finite() && self.peak_phase_dev >= 0.0) {
            return Err(Error::Config(format!(
                "peak phase deviation must be >= 0, got {}",
                self.peak_phase_dev
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::Config("perturbation phase must be finite".into()));
        }
        Ok(())
    }

    /// rad/s
    pub fn angular_freq(&self) -> f64 {
        TAU * self.freq
    }

    pub fn phase_at(&self, t: f64) -> f64 {
        self.peak_phase_dev * (TAU * self.freq * t + self.phase).cos()
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn normalize_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Parameters of the unperturbed fringe pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeModel {
    pub contrast: f64,
    /// mm
    pub period: f64,
    /// Events per mm per s.
    pub mean_intensity: f64,
    /// Offset of the fringe in the detector frame, radians.
    #[serde(default)]
    pub spatial_phase: f64,
}

impl FringeModel {
    pub fn new(contrast: f64, period: f64, mean_intensity: f64, spatial_phase: f64) -> Result<Self> {
        let f = FringeModel {
            contrast,
            period,
            mean_intensity,
            spatial_phase,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.contrast) {
            return Err(Error::Config(format!(
                "contrast must lie in [0, 1], got {}",
                self.contrast
            )));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return Err(Error::Config(format!("period must be > 0, got {}", self.period)));
        }
        if !(self.mean_intensity.is_finite() && self.mean_intensity > 0.0) {
            return Err(Error::Config(format!(
                "mean intensity must be > 0, got {}",
                self.mean_intensity
            )));
        }
        if !self.spatial_phase.is_finite() {
            return Err(Error::Config("spatial phase must be finite".into()));
        }
        Ok(())
    }

    /// rad/mm
    pub fn wavenumber(&self) -> f64 {
        TAU / self.period
    }
}

/// Total perturbation phase `φ(t) = Σ φ_j cos(ω_j t + ϕ_j)`.
pub fn phase_shift(components: &[PerturbationComponent], t: f64) -> f64 {
    components.iter().map(|c| c.phase_at(t)).sum()
}

/// Event density `f₀(1 + K₀ cos(k y + θ + φ(t)))` per mm per s.
pub fn fringe_density(y: f64, t: f64, fringe: &FringeModel, components: &[PerturbationComponent]) -> f64 {
    let arg = fringe.wavenumber() * y + fringe.spatial_phase + phase_shift(components, t);
    fringe.mean_intensity * (1.0 + fringe.contrast * arg.cos())
}

/// Factor `Π_j J₀(φ_j)` by which the time-integrated contrast is reduced.
pub fn washout_factor(components: &[PerturbationComponent]) -> f64 {
    components
        .iter()
        .map(|c| bessel_j(0, c.peak_phase_dev))
        .product()
}

/// Displacement amplitude `λ φ / 2π` of a phase deviation, in the unit of
/// `unmagnified_period`.
pub fn displacement_amplitude(peak_phase_dev: f64, unmagnified_period: f64) -> f64 {
    unmagnified_period * peak_phase_dev / TAU
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn comp(f: f64, dev_pi: f64, phase_pi: f64) -> PerturbationComponent {
        PerturbationComponent::new(f, dev_pi * PI, phase_pi * PI).unwrap()
    }

    #[test]
    fn phase_shift_examples() {
        assert_eq!(phase_shift(&[], 0.37), 0.0);
        let c = comp(540.0, 0.66, 0.0);
        assert!((phase_shift(&[c], 0.0) - 0.66 * PI).abs() < 1e-15);
        let c = comp(540.0, 0.66, 0.59);
        // 0.66π·cos(0.59π)
        assert!((phase_shift(&[c], 0.0) - (-0.578_5)).abs() < 5e-5);
    }

    #[test]
    fn fringe_density_examples() {
        let f = FringeModel::new(0.6, 2.6, 10.0, 0.0).unwrap();
        assert!((fringe_density(0.0, 0.0, &f, &[]) - 16.0).abs() < 1e-12);
        let flat = FringeModel::new(0.0, 2.6, 10.0, 0.0).unwrap();
        assert!((fringe_density(0.77, 3.1, &flat, &[comp(50.0, 0.4, 0.1)]) - 10.0).abs() < 1e-12);
        // k·y = π and φ(t) = π
        let c = comp(100.0, 1.0, 0.0);
        assert!((fringe_density(1.3, 0.0, &f, &[c]) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn washout_examples() {
        assert_eq!(washout_factor(&[comp(10.0, 0.0, 0.0)]), 1.0);
        let w = washout_factor(&[PerturbationComponent::new(10.0, 0.2, 0.0).unwrap()]);
        assert!((w - 0.990_025).abs() < 1e-5);
        assert!((w - (1.0 - 0.2f64.powi(2) / 4.0)).abs() < 1e-4);
        let w = washout_factor(&[comp(540.0, 0.5725, 0.0)]);
        assert!((w - 0.340_8).abs() < 1e-3);
    }

    // |(1/T)∫ exp(iφ(t)) dt| by midpoint quadrature over 10⁴ periods of the
    // slowest component.
    fn time_averaged_ratio(comps: &[PerturbationComponent]) -> f64 {
        let slow = comps.iter().map(|c| c.freq).fold(f64::INFINITY, f64::min);
        let fast = comps.iter().map(|c| c.freq).fold(0.0, f64::max);
        let t = 1e4 / slow;
        let n = (t * fast * 40.0) as usize;
        let h = t / n as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for i in 0..n {
            let p = phase_shift(comps, (i as f64 + 0.5) * h);
            re += p.cos();
            im += p.sin();
        }
        (re * re + im * im).sqrt() / n as f64
    }

    #[test]
    fn washout_matches_time_average() {
        let one = [PerturbationComponent::new(1.0, 1.3, 0.4).unwrap()];
        assert!((time_averaged_ratio(&one) - washout_factor(&one)).abs() < 1e-4);
        let two = [
            PerturbationComponent::new(1.0, 0.9, 0.2).unwrap(),
            PerturbationComponent::new(std::f64::consts::SQRT_2, 0.6, 1.0).unwrap(),
        ];
        assert!((time_averaged_ratio(&two) - washout_factor(&two)).abs() < 1e-4);
    }

    #[test]
    fn component_validation() {
        assert!(PerturbationComponent::new(0.0, 1.0, 0.0).is_err());
        assert!(PerturbationComponent::new(1.0, -0.1, 0.0).is_err());
        let c = PerturbationComponent::new(1.0, 0.1, -0.5 * PI).unwrap();
        assert!((c.phase - 1.5 * PI).abs() < 1e-12);
        assert!(FringeModel::new(1.2, 1.0, 1.0, 0.0).is_err());
        assert!(FringeModel::new(0.5, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn displacement_helper() {
        // 2.32π at an 880 nm period is about 1.02 µm
        let a = displacement_amplitude(2.32 * PI, 880.0);
        assert!((a - 1020.8).abs() < 0.1);
    }
}
