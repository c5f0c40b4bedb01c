use std::path::Path;
use std::process::Command;

use chipgate::conductor::config::{Length, MagneticField, TuneSection};
use chipgate::conductor::*;
use chipgate::trapfinder::BiasComponent;

/// Paper chip with grids and run lengths cut down to keep tests quick.
fn small() -> RunConfig {
    let mut cfg = RunConfig::paper();
    cfg.spectrum.grid_n = 256;
    cfg.dynamics.grid_n = 64;
    cfg.dynamics.n_steps = Some(400);
    cfg.dynamics.record_every = 10;
    cfg.dynamics.tau_window = [config::Time(0.0), config::Time(1.0)];
    cfg.scheme.trials = 50;
    cfg
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn serial_and_concurrent_runs_write_identical_artifacts() {
    let cfg = small();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let stages = [Stage::Gate, Stage::Raman, Stage::Scheme];
    let ma = run_pipeline(&cfg, &stages, a.path(), &RunOptions { concurrent: false, plots: true }).unwrap();
    let mb = run_pipeline(&cfg, &stages, b.path(), &RunOptions { concurrent: true, plots: true }).unwrap();
    assert!(ma.complete, "{:?}", ma.stages);
    assert_eq!(ma, mb);
    assert_eq!(read(a.path(), "manifest.json"), read(b.path(), "manifest.json"));
    let names: Vec<&str> = ma.files.iter().map(|f| f.name.as_str()).collect();
    for want in ["trap_report.json", "eigenstates.csv", "gate_timeseries.csv", "raman_report.json", "scheme_report.json", "summary.json", "fidelity.svg"] {
        assert!(names.contains(&want), "missing {want}");
    }
}

#[test]
fn manifest_hashes_match_the_files() {
    use sha2::{Digest, Sha256};
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&small(), &[Stage::Trap, Stage::Scheme], dir.path(), &RunOptions::default()).unwrap();
    for f in &m.files {
        let bytes = std::fs::read(dir.path().join(&f.name)).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(hex, f.sha256, "{}", f.name);
        assert_eq!(bytes.len(), f.bytes);
    }
    // no temporaries left behind
    let stray = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp")).count();
    assert_eq!(stray, 0);
}

#[test]
fn csv_outputs_carry_headers_and_full_precision() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&small(), &[Stage::Gate], dir.path(), &RunOptions { concurrent: true, plots: false }).unwrap();
    let eig = read(dir.path(), "eigenstates.csv");
    assert_eq!(eig.lines().next().unwrap(), "x,V,psi0,psi1,psi2,psi3,gL,gR,eL,eR");
    assert_eq!(eig.lines().count(), 257);
    let gate = read(dir.path(), "gate_timeseries.csv");
    assert_eq!(gate.lines().next().unwrap(), "t,F_gg,F_ge,F_ee,phi,P_phi_ge,P_phi_ee,E_gg,E_ge,E_ee");
    assert_eq!(gate.lines().count(), 42);
    let row: Vec<&str> = gate.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), 10);
    for cell in row {
        let mantissa = cell.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.len(), 18, "{cell}");
    }
    assert!(!dir.path().join("fidelity.svg").exists());
}

#[test]
fn scheme_alone_needs_no_trap() {
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&small(), &[Stage::Scheme], dir.path(), &RunOptions::default()).unwrap();
    assert_eq!(m.stages.len(), 1);
    assert!(m.complete);
    assert!(!dir.path().join("trap_report.json").exists());
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "scheme_report.json")).unwrap();
    assert_eq!(report.as_array().unwrap().len(), 2);
}

#[test]
fn failed_stage_skips_dependents_but_keeps_the_rest() {
    let mut cfg = small();
    cfg.trap.tune = Some(TuneSection { target_field: MagneticField(30e-4), component: BiasComponent::X });
    let dir = tempfile::tempdir().unwrap();
    let m = run_pipeline(&cfg, &[Stage::Raman, Stage::Scheme], dir.path(), &RunOptions::default()).unwrap();
    assert!(!m.complete);
    let status: Vec<(Stage, StageStatus)> = m.stages.iter().map(|r| (r.stage, r.status)).collect();
    assert_eq!(
        status,
        vec![
            (Stage::Trap, StageStatus::Failed),
            (Stage::Spectrum, StageStatus::Skipped),
            (Stage::Raman, StageStatus::Skipped),
            (Stage::Scheme, StageStatus::Ok),
        ]
    );
    assert!(m.stages[0].error.as_ref().unwrap().contains("sign change"));
    assert!(dir.path().join("scheme_report.json").exists());
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn sweep_rows_keep_order_and_record_failures() {
    let mut cfg = small();
    cfg.sweep = Some(SweepSpec {
        parameter: "chip.bias[0]".into(),
        values: vec![serde_json::json!("-9.6 G"), serde_json::json!("not a field"), serde_json::json!(-9.91e-4), serde_json::json!("-10.2 G")],
        stage: Stage::Trap,
    });
    let spec = cfg.sweep.clone().unwrap();
    let serial = sweep(&cfg, &spec, false).unwrap();
    let parallel = sweep(&cfg, &spec, true).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial.iter().map(|r| r.index).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert!(!serial[1].ok && serial[1].error.as_ref().unwrap().contains("chip.bias[0]"));
    assert!(serial[0].ok && serial[2].ok && serial[3].ok);
    // the minimum field follows the bias monotonically
    let b: Vec<f64> = [0, 2, 3].iter().map(|&k| serial[k].metrics["b_min_gauss"]).collect();
    assert!((b[0] < b[1]) == (b[1] < b[2]));

    let dir = tempfile::tempdir().unwrap();
    let (m, _) = run_sweep(&cfg, dir.path(), &RunOptions::default()).unwrap();
    assert!(!m.complete);
    let csv = read(dir.path(), "sweep.csv");
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.lines().next().unwrap().starts_with("index,value,ok,"));
}

#[test]
fn unknown_sweep_path_is_rejected_up_front() {
    let cfg = small();
    let spec = SweepSpec { parameter: "chip.nonexistent".into(), values: vec![serde_json::json!(1)], stage: Stage::Trap };
    assert!(matches!(sweep(&cfg, &spec, false), Err(PipelineError::Sweep(_))));
}

#[test]
fn config_file_round_trips() {
    let cfg = small();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    std::fs::write(&path, cfg.to_json()).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
    let mut bad = cfg.clone();
    bad.trap.hessian_step = Length(-1.0);
    std::fs::write(&path, bad.to_json()).unwrap();
    let err = RunConfig::load(&path).unwrap_err().to_string();
    assert!(err.contains("trap.hessian_step"), "{err}");
}

#[test]
fn cli_runs_a_stage_and_reports_config_errors() {
    let exe = env!("CARGO_BIN_EXE_chipgate");
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, small().to_json()).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(exe)
        .args(["scheme", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-plots"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("scheme_report.json").exists() && out.join("manifest.json").exists());

    let out2 = dir.path().join("out2");
    let status = Command::new(exe)
        .args(["gate", "--config", cfg_path.to_str().unwrap(), "--out", out2.to_str().unwrap()])
        .args(["--grid-n", "64", "--dt", "0.5 us", "--steps", "100", "--serial"])
        .status()
        .unwrap();
    assert!(status.success());
    let summary: serde_json::Value = serde_json::from_str(&read(&out2, "summary.json")).unwrap();
    assert_eq!(summary["gate"]["n_steps"], 100);
    assert_eq!(summary["gate"]["dt"], 0.5e-6);

    std::fs::write(&cfg_path, r#"{"chip": {"wire_separation_a": "1.5 parsecs"}}"#).unwrap();
    let o = Command::new(exe).args(["trap", "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("chip.wire_separation_a") && msg.contains("parsecs"), "{msg}");
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    assert_eq!(RunConfig::load(&dir.join("paper.json")).unwrap(), RunConfig::paper());
    let cal = RunConfig::load(&dir.join("calibration.json")).unwrap();
    let spec = cal.sweep.unwrap();
    assert_eq!(spec.stage, Stage::Gate);
    assert_eq!(spec.values.len(), 4);
}
