//! Response spectra: the pipeline repeated on fresh simulations while an
//! excitation frequency is stepped through a list.

use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{run_pipeline, PipelineConfig};
use crate::error::{Error, Result};
use crate::model::PerturbationComponent;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resonance {
    /// Hz.
    pub freq: f64,
    /// Added peak phase deviation at the resonance, rad.
    pub gain: f64,
    /// Half width at half maximum, Hz.
    pub width: f64,
}

/// Peak phase deviation produced by an excitation at a given frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransferFunction {
    Zero,
    Flat { peak_phase_dev: f64 },
    /// Baseline plus Lorentzian resonances.
    Resonant { baseline: f64, resonances: Vec<Resonance> },
}

impl TransferFunction {
    pub fn peak_phase_dev(&self, freq: f64) -> f64 {
        match self {
            TransferFunction::Zero => 0.0,
            TransferFunction::Flat { peak_phase_dev } => *peak_phase_dev,
            TransferFunction::Resonant { baseline, resonances } => {
                baseline
                    + resonances
                        .iter()
                        .map(|r| r.gain / (1.0 + ((freq - r.freq) / r.width).powi(2)))
                        .sum::<f64>()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Needs a simulate section; its components are replaced per row.
    pub template: PipelineConfig,
    /// Hz.
    pub excitations: Vec<f64>,
    pub transfer: TransferFunction,
    /// Perturbations present in every row regardless of the excitation.
    #[serde(default)]
    pub fixed_lines: Vec<PerturbationComponent>,
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        Ok(toml::from_str(s)?)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read sweep config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// Hz.
    pub excitation: f64,
    /// rad.
    pub applied_dev: f64,
    pub k_pert: Option<f64>,
    pub k_g2: Option<f64>,
    pub identified: Vec<f64>,
    pub identified_devs: Vec<f64>,
    pub error: Option<String>,
}

/// One pipeline run per excitation, seeded `seed + row`. Row failures are
/// recorded and the sweep continues.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.excitations.is_empty() {
        return Err(Error::Config("excitation list is empty".into()));
    }
    let Some(sim) = &cfg.template.simulate else {
        return Err(Error::Config("sweep template needs a simulate section".into()));
    };
    let mut rows = Vec::with_capacity(cfg.excitations.len());
    for (i, &f0) in cfg.excitations.iter().enumerate() {
        let dev = cfg.transfer.peak_phase_dev(f0);
        let mut row = SweepRow {
            excitation: f0,
            applied_dev: dev,
            k_pert: None,
            k_g2: None,
            identified: Vec::new(),
            identified_devs: Vec::new(),
            error: None,
        };
        let mut comps = cfg.fixed_lines.clone();
        if dev != 0.0 {
            match PerturbationComponent::new(f0, dev, 0.0) {
                Ok(c) => comps.push(c),
                Err(e) => {
                    row.error = Some(e.to_string());
                    rows.push(row);
                    continue;
                }
            }
        }
        let mut run_cfg = cfg.template.clone();
        run_cfg.output.dir = None;
        run_cfg.simulate = Some(super::SimulateSection {
            components: comps,
            seed: sim.seed.wrapping_add(i as u64),
            ..sim.clone()
        });
        match run_pipeline(&run_cfg) {
            Ok(out) => {
                let r = out.report;
                row.k_pert = r.contrasts.k_pert;
                row.k_g2 = r.contrasts.k_g2;
                if let Some(id) = &r.identification {
                    row.identified = id.freqs();
                    row.identified_devs = id.components.iter().map(|c| c.peak_phase_dev).collect();
                }
                if let Some(e) = r.errors.first() {
                    row.error = Some(format!("{}: {}", e.stage, e.message));
                }
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Columns `excitation_hz,applied_dev_rad,k_pert,k_g2,identified_hz,identified_dev_rad,error`;
/// lists are `;`-separated.
pub fn write_sweep_table<W: Write>(rows: &[SweepRow], mut w: W) -> Result<()> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    writeln!(w, "excitation_hz,applied_dev_rad,k_pert,k_g2,identified_hz,identified_dev_rad,error")?;
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(['"', '\n'], " ");
        writeln!(
            w,
            "{},{},{},{},{},{},\"{}\"",
            r.excitation,
            r.applied_dev,
            opt(r.k_pert),
            opt(r.k_g2),
            list(&r.identified),
            list(&r.identified_devs),
            err
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_shapes() {
        assert_eq!(TransferFunction::Zero.peak_phase_dev(100.0), 0.0);
        let r = TransferFunction::Resonant {
            baseline: 0.1,
            resonances: vec![Resonance {
                freq: 200.0,
                gain: 1.0,
                width: 5.0,
            }],
        };
        assert!((r.peak_phase_dev(200.0) - 1.1).abs() < 1e-12);
        assert!((r.peak_phase_dev(205.0) - 0.6).abs() < 1e-12);
        let parsed: TransferFunction = toml::from_str("kind = \"flat\"\npeak_phase_dev = 0.5").unwrap();
        assert_eq!(parsed, TransferFunction::Flat { peak_phase_dev: 0.5 });
    }
}
