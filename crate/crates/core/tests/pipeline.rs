use dephase::model::PerturbationComponent;
use dephase::pipeline::{
    run_pipeline, sweep, to_json_string, InputSection, PipelineConfig, SimulateSection, SweepConfig, TransferFunction,
};

fn small(components: Vec<PerturbationComponent>, seed: u64) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.simulate = Some(SimulateSection {
        contrast: 0.6,
        period: 2.6,
        mean_intensity: 1.0,
        spatial_phase: 0.2,
        rate: 3000.0,
        duration: 10.0,
        window: None,
        seed,
        components,
    });
    cfg.correlate.tau_max = 1.0;
    cfg.spectrum.df = 1.0;
    cfg.spectrum.f_max = 500.0;
    cfg
}

fn without_timings(json: &str) -> &str {
    &json[..json.find("\"timings\"").unwrap()]
}

#[test]
fn unperturbed_run_skips_identification() {
    let r = run_pipeline(&small(vec![], 1)).unwrap().report;
    assert!(r.errors.is_empty(), "{:?}", r.errors);
    assert!(r.peaks.as_ref().unwrap().is_empty());
    assert!(r.identification.is_none());
    assert!(r.skipped.is_some());
    assert_eq!(r.contrasts.k_rec, r.contrasts.k_pert);
    assert!((r.contrasts.k_pert.unwrap() - 0.6).abs() < 0.03);
}

#[test]
fn missing_input_is_a_stage_error() {
    let mut cfg = PipelineConfig::default();
    cfg.input = Some(InputSection {
        events: "/nonexistent/events.csv".into(),
        duration: 1.0,
        window: 26.0,
    });
    let r = run_pipeline(&cfg).unwrap().report;
    assert!(!r.succeeded());
    assert_eq!(r.errors[0].stage, "input");
    assert!(r.integrated_fit.is_none());
    assert!(run_pipeline(&PipelineConfig::default()).is_err());
}

#[test]
fn embedded_config_reproduces_report() {
    let comps = vec![PerturbationComponent::new(45.0, 1.6, 0.7).unwrap()];
    let first = run_pipeline(&small(comps, 2)).unwrap().report;
    assert!(first.succeeded(), "{:?}", first.errors);
    let json = to_json_string(&first).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    let cfg: PipelineConfig = serde_json::from_value(parsed["config"].clone()).unwrap();
    let second = to_json_string(&run_pipeline(&cfg).unwrap().report).unwrap();
    assert_eq!(without_timings(&json), without_timings(&second));
}

#[test]
fn sweep_with_zero_transfer_keeps_full_contrast() {
    let mut template = small(vec![], 3);
    template.reconstruct.enabled = false;
    let cfg = SweepConfig {
        template,
        excitations: vec![40.0, 90.0, 170.0],
        transfer: TransferFunction::Zero,
        fixed_lines: vec![],
    };
    for row in sweep(&cfg).unwrap() {
        assert!(row.error.is_none(), "{row:?}");
        for k in [row.k_pert.unwrap(), row.k_g2.unwrap()] {
            assert!((k - 0.6).abs() < 0.06, "{row:?}");
        }
        assert!(row.identified.is_empty());
    }
}

#[test]
fn sweep_finds_fixed_line_in_every_row() {
    let mut template = small(vec![], 4);
    template.reconstruct.enabled = false;
    let cfg = SweepConfig {
        template,
        excitations: vec![60.0, 95.0, 230.0],
        transfer: TransferFunction::Flat { peak_phase_dev: 1.0 },
        fixed_lines: vec![PerturbationComponent::new(150.0, 1.2, 0.0).unwrap()],
    };
    let rows = sweep(&cfg).unwrap();
    for row in &rows {
        assert!(row.identified.iter().any(|f| (f - 150.0).abs() <= 1.0), "{row:?}");
        assert!(row.identified.iter().any(|f| (f - row.excitation).abs() <= 1.0), "{row:?}");
    }
    assert!(sweep(&SweepConfig { excitations: vec![], ..cfg }).is_err());
}
