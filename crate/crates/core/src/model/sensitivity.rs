//! Contrast losses from temporal binning and from reconstructing with
//! inexact perturbation parameters.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::bessel::{bessel_j, sinc, BesselTable};
use super::PerturbationComponent;

/// `K_g²/K₀` for a correlation histogram with temporal bin width `dtau` (s):
/// `√|Π_j Σ_m J_m(φ_j)² sinc(m ω_j Δτ)|`.
pub fn binning_attenuation(components: &[PerturbationComponent], dtau: f64, order_cap: u32) -> f64 {
    let cap = order_cap as i32;
    let product: f64 = components
        .iter()
        .map(|c| {
            let t = BesselTable::new(c.peak_phase_dev, order_cap);
            let x = c.angular_freq() * dtau.abs();
            (-cap..=cap).map(|m| t.get(m).powi(2) * sinc(m as f64 * x)).sum::<f64>()
        })
        .product();
    product.abs().sqrt()
}

/// Error in the parameters of one perturbation component used for
/// reconstruction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// rad/s
    pub d_omega: f64,
    /// rad
    pub d_peak_phase_dev: f64,
    /// rad
    pub d_phase: f64,
}

impl Deviation {
    fn nonzero_count(&self) -> usize {
        [self.d_omega, self.d_peak_phase_dev, self.d_phase]
            .iter()
            .filter(|v| **v != 0.0)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityMethod {
    Quadrature,
    /// Small-deviation approximations; only used when exactly one deviation
    /// is nonzero, otherwise quadrature is used.
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sensitivity {
    /// `K_rec/K₀`.
    pub ratio: f64,
    pub method: SensitivityMethod,
    /// Fewer than 50 perturbation periods in the record.
    pub short_record: bool,
}

const SAMPLES_PER_PERIOD: f64 = 200.0;
const MIN_PERIODS: f64 = 50.0;

/// Expected `K_rec/K₀` after reconstructing a single-component perturbation
/// `reference` with parameters offset by `dev`, over a record of `duration` s.
pub fn reconstruction_sensitivity(
    dev: &Deviation,
    reference: &PerturbationComponent,
    duration: f64,
    method: SensitivityMethod,
) -> Sensitivity {
    let short_record = duration * reference.freq < MIN_PERIODS;
    if method == SensitivityMethod::ClosedForm {
        if let Some(ratio) = sensitivity_closed_form(dev, reference.peak_phase_dev, duration) {
            return Sensitivity {
                ratio,
                method,
                short_record,
            };
        }
    }
    Sensitivity {
        ratio: sensitivity_quadrature(dev, reference, duration),
        method: SensitivityMethod::Quadrature,
        short_record,
    }
}

fn sensitivity_quadrature(dev: &Deviation, c: &PerturbationComponent, duration: f64) -> f64 {
    if duration <= 0.0 {
        return 1.0;
    }
    let w1 = c.angular_freq();
    let w2 = w1 + dev.d_omega;
    let phi2 = c.peak_phase_dev + dev.d_peak_phase_dev;
    let fastest = w1.abs().max(w2.abs()) / TAU;
    let n = ((duration * fastest * SAMPLES_PER_PERIOD).ceil() as usize).max(1000);
    let h = duration / n as f64;
    let integrand = |t: f64| {
        (c.peak_phase_dev * (w1 * t + c.phase).cos() - phi2 * (w2 * t + c.phase + dev.d_phase).cos()).cos()
    };
    let mut sum = 0.5 * (integrand(0.0) + integrand(duration));
    for i in 1..n {
        sum += integrand(i as f64 * h);
    }
    (sum * h / duration).abs()
}

/// Small-deviation approximations, defined when exactly one of the three
/// deviations is nonzero:
/// `exp(-½(π/8 |Δω| T φ₁)²)`, `|J₀(Δφ)|` or `|J₀(Δϕ φ₁)|`.
pub fn sensitivity_closed_form(dev: &Deviation, peak_phase_dev: f64, duration: f64) -> Option<f64> {
    match dev.nonzero_count() {
        0 => Some(1.0),
        1 if dev.d_omega != 0.0 => {
            let x = PI / 8.0 * dev.d_omega.abs() * duration * peak_phase_dev;
            Some((-0.5 * x * x).exp())
        }
        1 if dev.d_peak_phase_dev != 0.0 => Some(bessel_j(0, dev.d_peak_phase_dev).abs()),
        1 => Some(bessel_j(0, dev.d_phase * peak_phase_dev).abs()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::approx_amplitude;

    fn comp(f: f64, dev: f64) -> PerturbationComponent {
        PerturbationComponent::new(f, dev, 0.0).unwrap()
    }

    // Trapezoid average of A(τ) over the first bin [0, Δτ].
    fn bin_average(c: &[PerturbationComponent], dtau: f64) -> f64 {
        let n = 20_000;
        let h = dtau / n as f64;
        let a = |tau: f64| approx_amplitude(tau, 1.0, c, 40);
        let mut s = 0.5 * (a(0.0) + a(dtau));
        for i in 1..n {
            s += a(i as f64 * h);
        }
        (s * h / dtau) / a(0.0)
    }

    #[test]
    fn binning_limits() {
        let c = [comp(540.0, 0.75 * PI)];
        assert!((binning_attenuation(&c, 1e-12, 20) - 1.0).abs() < 1e-12);
        assert_eq!(binning_attenuation(&[comp(540.0, 0.0)], 1e-3, 20), 1.0);
    }

    #[test]
    fn binning_matches_trapezoid_oracle() {
        for &(phi, frac) in &[(0.4, 0.2), (0.75, 0.08), (0.1, 0.15), (1.0, 0.25)] {
            let c = [comp(100.0, phi * PI)];
            let dtau = frac / 100.0;
            let got = binning_attenuation(&c, dtau, 40);
            let want = bin_average(&c, dtau).abs().sqrt();
            assert!((got - want).abs() < 1e-6, "φ={phi}π: {got} vs {want}");
        }
    }

    #[test]
    fn binning_monotone_over_quarter_period() {
        for &phi in &[0.1, 0.25, 0.4, 0.6, 0.75, 0.9, 1.0] {
            let c = [comp(540.0, phi * PI)];
            let period = 1.0 / 540.0;
            let mut prev = 1.0;
            for i in 1..=250 {
                let v = binning_attenuation(&c, 0.25 * period * i as f64 / 250.0, 30);
                assert!(v <= prev + 1e-12, "φ={phi}π step {i}");
                prev = v;
            }
        }
    }

    #[test]
    fn sensitivity_exact_parameters() {
        let c = PerturbationComponent::new(540.0, 0.66 * PI, 0.59 * PI).unwrap();
        let s = reconstruction_sensitivity(&Deviation::default(), &c, 19.2, SensitivityMethod::Quadrature);
        assert!((s.ratio - 1.0).abs() < 1e-12);
        assert!(!s.short_record);
        let s = reconstruction_sensitivity(&Deviation::default(), &c, 0.05, SensitivityMethod::Quadrature);
        assert!(s.short_record);
    }

    #[test]
    fn sensitivity_frequency_offset_point() {
        let c = comp(540.0, 0.66 * PI);
        let d = Deviation {
            d_omega: TAU * 0.005,
            ..Default::default()
        };
        let q = reconstruction_sensitivity(&d, &c, 19.2, SensitivityMethod::Quadrature).ratio;
        assert!((q - 0.88).abs() <= 0.01, "{q}");
        let g = sensitivity_closed_form(&d, c.peak_phase_dev, 19.2).unwrap();
        assert!((q - g).abs() <= 0.01);
    }

    #[test]
    fn sensitivity_amplitude_offset_is_bessel() {
        let c = comp(540.0, 0.66 * PI);
        let d = Deviation {
            d_peak_phase_dev: 0.5,
            ..Default::default()
        };
        let q = reconstruction_sensitivity(&d, &c, 20.0, SensitivityMethod::Quadrature).ratio;
        assert!((q - 0.938_47).abs() < 1e-3, "{q}");
        let cf = reconstruction_sensitivity(&d, &c, 20.0, SensitivityMethod::ClosedForm);
        assert_eq!(cf.method, SensitivityMethod::ClosedForm);
        assert!((cf.ratio - q).abs() < 1e-3);
    }

    #[test]
    fn sensitivity_phase_offset_small() {
        let c = comp(540.0, 0.66 * PI);
        for &dp in &[0.05, 0.1, 0.2] {
            let d = Deviation {
                d_phase: dp,
                ..Default::default()
            };
            let q = reconstruction_sensitivity(&d, &c, 20.0, SensitivityMethod::Quadrature).ratio;
            let cf = sensitivity_closed_form(&d, c.peak_phase_dev, 20.0).unwrap();
            assert!((q - cf).abs() < 0.01, "{dp}: {q} vs {cf}");
        }
    }

    #[test]
    fn gaussian_tracks_quadrature_for_strong_perturbations() {
        let t = 19.2;
        for &phi in &[0.5, 0.66, 1.0, 1.5, 2.0] {
            let c = comp(540.0, phi * PI);
            for &x in &[0.1, 0.25, 0.4, 0.5] {
                let d = Deviation {
                    d_omega: x / (PI / 8.0 * t * c.peak_phase_dev),
                    ..Default::default()
                };
                let q = reconstruction_sensitivity(&d, &c, t, SensitivityMethod::Quadrature).ratio;
                let g = sensitivity_closed_form(&d, c.peak_phase_dev, t).unwrap();
                assert!((q - g).abs() <= 0.01, "φ={phi}π x={x}: {q} vs {g}");
            }
        }
    }

    #[test]
    fn mixed_deviation_falls_back_to_quadrature() {
        let c = comp(540.0, 0.66 * PI);
        let d = Deviation {
            d_omega: 0.01,
            d_peak_phase_dev: 0.1,
            d_phase: 0.0,
        };
        assert!(sensitivity_closed_form(&d, c.peak_phase_dev, 20.0).is_none());
        let s = reconstruction_sensitivity(&d, &c, 20.0, SensitivityMethod::ClosedForm);
        assert_eq!(s.method, SensitivityMethod::Quadrature);
    }
}
