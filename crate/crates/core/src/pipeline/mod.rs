//! End-to-end analysis: events → correlation grid → contrasts → spectrum →
//! identification → reconstruction, driven by one configuration.

mod report;
mod sweep;

pub use report::{to_json_string, write_json};
pub use sweep::{sweep, write_sweep_table, Resonance, SweepConfig, SweepRow, TransferFunction};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::correlate::{fit_integrated, fit_zero_lag, pair_histogram, CorrelationGrid, FitOptions, FringeFit};
use crate::error::{Error, Result};
use crate::events::EventList;
use crate::identify::{fit_peak_phase_deviations, search, IdentificationResult, SearchConfig};
use crate::model::{binning_attenuation, FringeModel, PerturbationComponent};
use crate::reconstruct::{optimize, reconstruct_events, OptimizeWindows, ReconstructionResult};
use crate::simulate::{generate_events, SimConfig};
use crate::spectrum::{detect_peaks, temporal_spectrum_with, AmplitudeSpectrum, PeakList, Resolution, SpectrumOptions};

/// Environment variable naming the default configuration file.
pub const CONFIG_ENV: &str = "DEPHASE_CONFIG";

/// Bessel order cap for the binning correction.
const ATTENUATION_ORDER_CAP: u32 = 12;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub contrast: f64,
    /// mm.
    pub period: f64,
    #[serde(default = "one")]
    pub mean_intensity: f64,
    #[serde(default)]
    pub spatial_phase: f64,
    /// Events per second.
    pub rate: f64,
    /// s.
    pub duration: f64,
    /// mm; ten periods when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub components: Vec<PerturbationComponent>,
}

impl SimulateSection {
    pub fn sim_config(&self) -> Result<SimConfig> {
        let fringe = FringeModel::new(self.contrast, self.period, self.mean_intensity, self.spatial_phase)?;
        for c in &self.components {
            c.validate()?;
        }
        let mut cfg = SimConfig::new(fringe, self.components.clone(), self.rate, self.duration, self.seed);
        if let Some(w) = self.window {
            cfg.window = w;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub events: PathBuf,
    /// Record length, s.
    pub duration: f64,
    /// Detector window, mm.
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrelateSection {
    /// mm.
    pub du: f64,
    /// s.
    pub dtau: f64,
    /// s.
    pub tau_max: f64,
    /// Histogram bins of the integrated fit.
    pub integrated_bins: usize,
}

impl Default for CorrelateSection {
    fn default() -> Self {
        CorrelateSection {
            du: 0.09,
            dtau: 50e-6,
            tau_max: 10.0,
            integrated_bins: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    /// Hz.
    pub df: f64,
    /// Hz.
    pub f_max: f64,
    pub sigma_mult: f64,
    pub min_exposure: f64,
    /// Peaks below this frequency (Hz) are not passed to identification.
    pub f_min: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            df: 0.1,
            f_max: 2000.0,
            sigma_mult: 7.0,
            min_exposure: 0.05,
            f_min: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSection {
    pub enabled: bool,
    /// Derived from the spectral grid spacing when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub windows: Option<OptimizeWindows>,
}

impl Default for ReconstructSection {
    fn default() -> Self {
        ReconstructSection {
            enabled: true,
            windows: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for data artifacts; nothing is written when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// τ bins of the correlation grid written to `g2.csv` (the zero-lag row
    /// only by default).
    pub grid_tau_bins: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<InputSection>,
    pub correlate: CorrelateSection,
    pub spectrum: SpectrumSection,
    pub identify: SearchConfig,
    pub reconstruct: ReconstructSection,
    pub output: OutputSection,
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let cfg = Self::read_unvalidated(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse without validation, for callers that adjust the result first.
    pub fn read_unvalidated(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Ok(toml::from_str(&text)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.simulate, &self.input) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either a simulate or an input section, not both".into()))
            }
            (None, None) => return Err(Error::Config("need a simulate or an input section".into())),
            _ => {}
        }
        if let Some(s) = &self.simulate {
            s.sim_config()?;
        }
        if let Some(i) = &self.input {
            if !(i.duration > 0.0 && i.window > 0.0) {
                return Err(Error::Config("input duration and window must be > 0".into()));
            }
        }
        let c = &self.correlate;
        if !(c.du > 0.0 && c.dtau > 0.0 && c.tau_max >= c.dtau) {
            return Err(Error::Config(format!(
                "need du > 0 and 0 < dtau <= tau_max, got du={} dtau={} tau_max={}",
                c.du, c.dtau, c.tau_max
            )));
        }
        if c.integrated_bins < 16 {
            return Err(Error::Config("integrated_bins must be at least 16".into()));
        }
        let s = &self.spectrum;
        if !(s.df > 0.0 && s.f_max >= s.df && s.sigma_mult > 0.0 && s.min_exposure >= 0.0 && s.f_min >= 0.0) {
            return Err(Error::Config(
                "need 0 < df <= f_max, sigma_mult > 0, min_exposure >= 0, f_min >= 0".into(),
            ));
        }
        if s.f_max > 0.5 / c.dtau {
            return Err(Error::Config(format!(
                "f_max {} Hz exceeds the Nyquist frequency {} Hz of dtau",
                s.f_max,
                0.5 / c.dtau
            )));
        }
        self.identify.validate()?;
        if let Some(w) = &self.reconstruct.windows {
            w.validate()?;
        }
        Ok(())
    }

    pub fn windows(&self) -> OptimizeWindows {
        self.reconstruct
            .windows
            .clone()
            .unwrap_or_else(|| OptimizeWindows::for_resolution(self.spectrum.df))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub version: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub n_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub df: f64,
    pub f_max: f64,
    pub n_rows_averaged: usize,
    pub rows_u: Vec<f64>,
    pub resolution: Resolution,
}

impl From<&AmplitudeSpectrum> for SpectrumSummary {
    fn from(s: &AmplitudeSpectrum) -> Self {
        SpectrumSummary {
            df: s.df,
            f_max: s.f_max,
            n_rows_averaged: s.n_rows_averaged,
            rows_u: s.rows_u.clone(),
            resolution: s.resolution,
        }
    }
}

/// The three contrasts the analysis is about.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ContrastSummary {
    /// Time-integrated contrast of the raw events.
    pub k_pert: Option<f64>,
    /// From the zero-lag correlation row, corrected for τ binning when the
    /// perturbation is known.
    pub k_g2: Option<f64>,
    /// After reconstruction.
    pub k_rec: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageFailure {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema: String,
    pub provenance: Provenance,
    pub config: PipelineConfig,
    pub contrasts: ContrastSummary,
    pub integrated_fit: Option<FringeFit>,
    pub zero_lag_fit: Option<FringeFit>,
    pub binning_attenuation: Option<f64>,
    pub spectrum: Option<SpectrumSummary>,
    pub peaks: Option<PeakList>,
    pub identification: Option<IdentificationResult>,
    /// Why identification and reconstruction did not run, when they did not.
    pub skipped: Option<String>,
    pub reconstruction: Option<ReconstructionResult>,
    pub errors: Vec<StageFailure>,
    /// Seconds per stage; the only part that varies between identical runs.
    pub timings: BTreeMap<String, f64>,
}

impl AnalysisReport {
    pub fn succeeded(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Data produced along the way, for writing to disk.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub events: Option<EventList>,
    pub grid: Option<CorrelationGrid>,
    pub spectrum: Option<AmplitudeSpectrum>,
    pub reconstructed: Option<EventList>,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub report: AnalysisReport,
    pub artifacts: Artifacts,
}

impl PipelineOutput {
    /// Write `events.csv`, `g2.csv`, `spectrum.csv`, `reconstructed.csv` (those
    /// that exist) and `report.json` into `dir`.
    pub fn write(&self, dir: &Path, grid_tau_bins: usize) -> Result<()> {
        fs::create_dir_all(dir)?;
        let a = &self.artifacts;
        if let Some(ev) = &a.events {
            ev.write_csv_path(&dir.join("events.csv"))?;
        }
        if let Some(g) = &a.grid {
            let f = std::io::BufWriter::new(fs::File::create(dir.join("g2.csv"))?);
            g.write_columns_upto(f, grid_tau_bins.max(1))?;
        }
        if let Some(s) = &a.spectrum {
            s.write_columns(std::io::BufWriter::new(fs::File::create(dir.join("spectrum.csv"))?))?;
        }
        if let Some(r) = &a.reconstructed {
            r.write_csv_path(&dir.join("reconstructed.csv"))?;
        }
        write_json(&self.report, &dir.join("report.json"))
    }
}

struct Run {
    report: AnalysisReport,
    artifacts: Artifacts,
}

impl Run {
    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Option<T> {
        let start = Instant::now();
        let out = f(self);
        self.report
            .timings
            .insert(stage.to_string(), start.elapsed().as_secs_f64());
        match out {
            Ok(v) => Some(v),
            Err(e) => {
                self.report.errors.push(StageFailure {
                    stage: stage.to_string(),
                    message: e.to_string(),
                });
                None
            }
        }
    }
}

/// Last stage of a truncated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    /// Simulate or read the events.
    Input,
    /// Pair histogram plus the integrated and zero-lag fits.
    Correlate,
    /// Spectrum and peak list.
    Spectrum,
    Identify,
    Reconstruct,
}

/// Run every stage in order. Configuration errors are returned; a failing
/// stage is recorded in the report and ends the run with the results so far.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    run_pipeline_until(config, Stage::Reconstruct)
}

/// As [`run_pipeline`], stopping after `last`.
pub fn run_pipeline_until(config: &PipelineConfig, last: Stage) -> Result<PipelineOutput> {
    config.validate()?;
    let report = AnalysisReport {
        schema: "dephase-report/1".into(),
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: config.sha256()?,
            seed: config.simulate.as_ref().map(|s| s.seed),
            n_events: 0,
        },
        config: config.clone(),
        contrasts: ContrastSummary::default(),
        integrated_fit: None,
        zero_lag_fit: None,
        binning_attenuation: None,
        spectrum: None,
        peaks: None,
        identification: None,
        skipped: None,
        reconstruction: None,
        errors: Vec::new(),
        timings: BTreeMap::new(),
    };
    let mut run = Run {
        report,
        artifacts: Artifacts::default(),
    };
    stages(config, last, &mut run);
    Ok(PipelineOutput {
        report: run.report,
        artifacts: run.artifacts,
    })
}

fn stages(config: &PipelineConfig, last: Stage, run: &mut Run) -> Option<()> {
    let events = run.timed("input", |_| match (&config.simulate, &config.input) {
        (Some(s), _) => generate_events(&s.sim_config()?),
        (None, Some(i)) => EventList::read_csv_path(&i.events, i.duration, i.window),
        (None, None) => Err(Error::Config("no event source".into())),
    })?;
    run.report.provenance.n_events = events.len();
    if last == Stage::Input {
        keep_events(config, run, events);
        return Some(());
    }

    let c = &config.correlate;
    let grid = run.timed("correlate", |_| pair_histogram(&events, c.du, c.dtau, c.tau_max))?;

    let integrated = run.timed("integrated_fit", |_| {
        fit_integrated(&events, c.integrated_bins, &FitOptions::default())
    })?;
    run.report.integrated_fit = Some(integrated);
    run.report.contrasts.k_pert = Some(integrated.contrast);

    let zero_lag = run.timed("zero_lag_fit", |_| fit_zero_lag(&grid, &FitOptions::default()))?;
    run.report.zero_lag_fit = Some(zero_lag);
    run.report.contrasts.k_g2 = Some(zero_lag.contrast);

    if last == Stage::Correlate {
        if config.output.dir.is_some() {
            run.artifacts.grid = Some(grid);
        }
        keep_events(config, run, events);
        return Some(());
    }

    let s = &config.spectrum;
    let spec = run.timed("spectrum", |_| {
        let mut opts = SpectrumOptions::new(s.df, s.f_max);
        opts.min_exposure = s.min_exposure;
        temporal_spectrum_with(&grid, zero_lag.period, &opts)
    });
    if config.output.dir.is_some() {
        run.artifacts.grid = Some(grid);
    } else {
        drop(grid);
    }
    let spec = spec?;
    run.report.spectrum = Some(SpectrumSummary::from(&spec));
    let mut peaks = detect_peaks(&spec, s.sigma_mult);
    peaks.peaks.retain(|p| p.freq >= s.f_min);
    run.report.peaks = Some(peaks.clone());
    if config.output.dir.is_some() {
        run.artifacts.spectrum = Some(spec.clone());
    }
    let spec = &spec;
    if last == Stage::Spectrum {
        keep_events(config, run, events);
        return Some(());
    }

    let finish_unperturbed = |run: &mut Run, reason: &str| {
        run.report.skipped = Some(reason.to_string());
        run.report.contrasts.k_rec = Some(integrated.contrast);
    };
    if peaks.is_empty() {
        finish_unperturbed(run, "no spectral peaks above threshold");
        keep_events(config, run, events);
        return Some(());
    }

    let ident = run.timed("identify", |_| {
        let mut ident = search(&peaks, spec, zero_lag.contrast, zero_lag.period, &config.identify)?;
        // With the perturbation known, undo the τ-binning loss of the zero-lag
        // contrast and refit the deviations; repeat once as the loss depends
        // on them.
        for _ in 0..2 {
            let att = binning_attenuation(&ident.components, c.dtau, ATTENUATION_ORDER_CAP);
            let corrected = zero_lag.corrected(att).contrast;
            let freqs = ident.freqs();
            let refit = fit_peak_phase_deviations(spec, &freqs, corrected, zero_lag.period, &config.identify.fit)?;
            ident = IdentificationResult {
                components: refit.components,
                fit_residual: refit.fit_residual,
                contrast_used: refit.contrast_used,
                poor_fit: refit.poor_fit,
                ..ident
            };
        }
        Ok(ident)
    });
    let Some(ident) = ident else {
        keep_events(config, run, events);
        return None;
    };
    let att = binning_attenuation(&ident.components, c.dtau, ATTENUATION_ORDER_CAP);
    run.report.binning_attenuation = Some(att);
    run.report.contrasts.k_g2 = Some(zero_lag.corrected(att).contrast);
    run.report.identification = Some(ident.clone());

    if last == Stage::Identify {
        keep_events(config, run, events);
        return Some(());
    }
    if !config.reconstruct.enabled {
        run.report.skipped = Some("reconstruction disabled".into());
        keep_events(config, run, events);
        return Some(());
    }
    let windows = config.windows();
    let rec = run.timed("reconstruct", |_| optimize(&events, &ident, &windows));
    if let Some(r) = &rec {
        run.report.contrasts.k_rec = Some(r.contrast);
        if config.output.dir.is_some() {
            run.artifacts.reconstructed = reconstruct_events(&events, ident.period_used, &r.components).ok();
        }
    }
    run.report.reconstruction = rec;
    keep_events(config, run, events);
    Some(())
}

// Simulated events are kept for writing; read events already exist on disk.
fn keep_events(config: &PipelineConfig, run: &mut Run, events: EventList) {
    if config.simulate.is_some() && config.output.dir.is_some() {
        run.artifacts.events = Some(events);
    }
}

/// Run the pipeline up to `last` and, if configured, write its artifacts.
pub fn run_and_write(config: &PipelineConfig, last: Stage) -> Result<AnalysisReport> {
    let out = run_pipeline_until(config, last)?;
    if let Some(dir) = &config.output.dir {
        out.write(dir, config.output.grid_tau_bins)?;
    }
    Ok(out.report)
}
