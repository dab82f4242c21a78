use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dephase::events::EventList;
use dephase::model::PerturbationComponent;
use dephase::pipeline::{
    run_and_write, sweep, to_json_string, write_sweep_table, AnalysisReport, InputSection, PipelineConfig,
    SimulateSection, Stage, SweepConfig, CONFIG_ENV,
};
use dephase::reconstruct::{reconstruct_events, reconstructed_contrast};

/// Correlation analysis of time-tagged interference events under harmonic
/// dephasing.
#[derive(Parser)]
#[command(name = "dephase", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate events and write them to `<out-dir>/events.csv`.
    Simulate(Common),
    /// Pair histogram with the integrated and zero-lag contrast fits.
    Correlate(Common),
    /// Amplitude spectrum of the correlation grid and its peaks.
    Spectrum(Common),
    /// Identify perturbation frequencies and their peak phase deviations.
    Identify(Common),
    /// Undo given perturbations, or run the full analysis when none are given.
    Reconstruct(ReconstructArgs),
    /// Full analysis with report.
    Pipeline(Common),
    /// Response table over excitation frequencies.
    Sweep(SweepArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML configuration file.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Event CSV to analyse instead of simulating.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Directory for artifacts and report.json.
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Record length, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Detector window, mm.
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    contrast: Option<f64>,
    /// Fringe period, mm.
    #[arg(long)]
    period: Option<f64>,
    /// Mean event rate, Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Simulated perturbation `freq_hz,peak_dev_rad,phase_rad`; repeatable.
    #[arg(long = "component", value_parser = parse_component)]
    components: Vec<PerturbationComponent>,

    /// mm.
    #[arg(long)]
    du: Option<f64>,
    /// s.
    #[arg(long)]
    dtau: Option<f64>,
    /// s.
    #[arg(long)]
    tau_max: Option<f64>,
    /// Hz.
    #[arg(long)]
    df: Option<f64>,
    /// Hz.
    #[arg(long)]
    f_max: Option<f64>,
    /// Hz.
    #[arg(long)]
    f_min: Option<f64>,
    #[arg(long)]
    sigma_mult: Option<f64>,
    /// Percent.
    #[arg(long)]
    accept: Option<f64>,
    /// Percent.
    #[arg(long)]
    reject: Option<f64>,
    #[arg(long)]
    max_n: Option<usize>,
    /// τ bins written to g2.csv.
    #[arg(long)]
    grid_tau_bins: Option<usize>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    common: Common,
    /// Perturbation to undo, `freq_hz,peak_dev_rad,phase_rad`; repeatable.
    #[arg(long = "apply", value_parser = parse_component)]
    apply: Vec<PerturbationComponent>,
    /// Histogram bins for the contrast fit after reconstruction.
    #[arg(long, default_value_t = 200)]
    bins: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// CSV table; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_component(s: &str) -> std::result::Result<PerturbationComponent, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<std::result::Result<_, _>>()?;
    let [f, d, p] = v[..] else {
        return Err(format!("expected freq,dev,phase, got {s:?}"));
    };
    PerturbationComponent::new(f, d, p).map_err(|e| e.to_string())
}

impl Common {
    fn simulation_requested(&self) -> bool {
        self.contrast.is_some() || self.period.is_some() || self.rate.is_some() || !self.components.is_empty()
    }

    /// Config file (if any) with the flags applied on top.
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::read_unvalidated(p)?,
            None => PipelineConfig::default(),
        };

        if let Some(events) = &self.events {
            let old = cfg.input.take();
            let duration = self.duration.or(old.as_ref().map(|i| i.duration));
            let window = self.window.or(old.as_ref().map(|i| i.window));
            let (Some(duration), Some(window)) = (duration, window) else {
                bail!("--events needs --duration and --window (or an input section)");
            };
            cfg.simulate = None;
            cfg.input = Some(InputSection {
                events: events.clone(),
                duration,
                window,
            });
        } else if let Some(i) = cfg.input.as_mut() {
            if let Some(d) = self.duration {
                i.duration = d;
            }
            if let Some(w) = self.window {
                i.window = w;
            }
        } else {
            if cfg.simulate.is_none() && self.simulation_requested() {
                let (Some(contrast), Some(period), Some(rate), Some(duration)) =
                    (self.contrast, self.period, self.rate, self.duration)
                else {
                    bail!("simulating needs --contrast, --period, --rate and --duration");
                };
                cfg.simulate = Some(SimulateSection {
                    contrast,
                    period,
                    mean_intensity: 1.0,
                    spatial_phase: 0.0,
                    rate,
                    duration,
                    window: None,
                    seed: self.seed.unwrap_or(1),
                    components: Vec::new(),
                });
            }
            if let Some(s) = cfg.simulate.as_mut() {
                set(&mut s.contrast, self.contrast);
                set(&mut s.period, self.period);
                set(&mut s.rate, self.rate);
                set(&mut s.duration, self.duration);
                set(&mut s.seed, self.seed);
                if self.window.is_some() {
                    s.window = self.window;
                }
                if !self.components.is_empty() {
                    s.components = self.components.clone();
                }
            }
        }

        set(&mut cfg.correlate.du, self.du);
        set(&mut cfg.correlate.dtau, self.dtau);
        set(&mut cfg.correlate.tau_max, self.tau_max);
        set(&mut cfg.spectrum.df, self.df);
        set(&mut cfg.spectrum.f_max, self.f_max);
        set(&mut cfg.spectrum.f_min, self.f_min);
        set(&mut cfg.spectrum.sigma_mult, self.sigma_mult);
        set(&mut cfg.identify.accept_threshold, self.accept);
        set(&mut cfg.identify.reject_threshold, self.reject);
        set(&mut cfg.identify.max_n, self.max_n);
        set(&mut cfg.output.grid_tau_bins, self.grid_tau_bins);
        if self.out_dir.is_some() {
            cfg.output.dir = self.out_dir.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T: Copy>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(to_json_string(v)?.as_bytes())?;
    Ok(())
}

/// Run up to `last`, print `section` of the report, fail on stage errors.
fn run_stage(common: &Common, last: Stage, section: impl Fn(&AnalysisReport) -> serde_json::Value) -> Result<()> {
    let cfg = common.resolve()?;
    if last == Stage::Input && cfg.output.dir.is_none() {
        bail!("simulate needs --out-dir (or output.dir in the config)");
    }
    let report = run_and_write(&cfg, last)?;
    print_json(&section(&report))?;
    if let Some(e) = report.errors.first() {
        bail!("stage {} failed: {}", e.stage, e.message);
    }
    Ok(())
}

fn reconstruct_given(args: &ReconstructArgs) -> Result<()> {
    let cfg = args.common.resolve()?;
    let Some(input) = &cfg.input else {
        bail!("--apply needs an event file (--events or an input section)");
    };
    let Some(period) = args.common.period else {
        bail!("--apply needs --period");
    };
    let events = EventList::read_csv_path(&input.events, input.duration, input.window)?;
    let fit = reconstructed_contrast(&events, period, &args.apply, args.bins)?;
    if let Some(dir) = &cfg.output.dir {
        fs::create_dir_all(dir)?;
        reconstruct_events(&events, period, &args.apply)?.write_csv_path(&dir.join("reconstructed.csv"))?;
    }
    print_json(&fit)
}

fn run_sweep(args: &SweepArgs) -> Result<()> {
    let cfg = SweepConfig::from_path(&args.config)?;
    let rows = sweep(&cfg)?;
    match &args.out {
        Some(p) => write_table(&rows, p),
        None => Ok(write_sweep_table(&rows, std::io::stdout().lock())?),
    }
}

fn write_table(rows: &[dephase::pipeline::SweepRow], path: &Path) -> Result<()> {
    let f = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_sweep_table(rows, std::io::BufWriter::new(f))?;
    Ok(())
}

fn value<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(c) => run_stage(c, Stage::Input, |r| value(&r.provenance)),
        Command::Correlate(c) => run_stage(c, Stage::Correlate, |r| {
            serde_json::json!({
                "contrasts": value(&r.contrasts),
                "integrated_fit": value(&r.integrated_fit),
                "zero_lag_fit": value(&r.zero_lag_fit),
            })
        }),
        Command::Spectrum(c) => run_stage(c, Stage::Spectrum, |r| {
            serde_json::json!({ "spectrum": value(&r.spectrum), "peaks": value(&r.peaks) })
        }),
        Command::Identify(c) => run_stage(c, Stage::Identify, |r| {
            serde_json::json!({
                "skipped": value(&r.skipped),
                "identification": value(&r.identification),
                "contrasts": value(&r.contrasts),
            })
        }),
        Command::Reconstruct(a) if !a.apply.is_empty() => reconstruct_given(a),
        Command::Reconstruct(a) => run_stage(&a.common, Stage::Reconstruct, value),
        Command::Pipeline(c) => run_stage(c, Stage::Reconstruct, value),
        Command::Sweep(a) => run_sweep(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
