use std::fs;

use w2sg_core::experiments::{run, write_manifest, write_outputs, ExperimentConfig, Kind, RunOutput, Values};
use w2sg_core::training::GradientSource;

fn tiny(kind: Kind) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(kind);
    cfg.d = 20;
    cfg.n_pre = 400;
    cfg.n_pop = 500;
    cfg.t = 6;
    cfg.seeds = vec![1, 2];
    cfg
}

#[test]
fn default_configs_validate_and_round_trip() {
    for kind in [
        Kind::Exp1,
        Kind::Exp2,
        Kind::SweepLambda,
        Kind::SweepRho,
        Kind::SweepGamma,
        Kind::SweepLr,
        Kind::LandscapeDynamics,
    ] {
        let cfg = ExperimentConfig::default_for(kind);
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(cfg, back, "{kind:?}");
    }
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert_eq!(n, 7);
}

#[test]
fn unknown_keys_are_rejected() {
    let mut text = ExperimentConfig::default_for(Kind::Exp1).to_toml_string().unwrap();
    text.push_str("bogus = 1\n");
    assert!(ExperimentConfig::from_toml_str(&text).is_err());
}

#[test]
fn sweep_runs_are_deterministic() {
    let cfg = tiny(Kind::SweepGamma);
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
    let RunOutput::Sweep(s) = a else { panic!("expected a sweep") };
    assert_eq!(s.rows.len(), cfg.swept_values().unwrap().len() * 2);
    // the γ = 1 end has a zero baseline and can never be crossed
    let top = s.rows.iter().filter(|r| (r.sweep_value - 0.95).abs() < 1e-12).count();
    assert_eq!(top, 2);
}

#[test]
fn gamma_one_has_zero_baseline() {
    let mut cfg = tiny(Kind::SweepGamma);
    cfg.gamma = Values::Many(vec![0.5, 1.0]);
    let RunOutput::Sweep(s) = run(&cfg).unwrap() else { panic!() };
    for r in s.rows.iter().filter(|r| r.sweep_value == 1.0) {
        assert_eq!(r.weak_baseline, 0.0);
        assert!(!r.crossed);
    }
    for r in s.rows.iter().filter(|r| r.sweep_value == 0.5) {
        assert_eq!(r.weak_baseline, 1.0);
    }
}

#[test]
fn exp2_starts_on_the_sphere_identity() {
    let mut cfg = tiny(Kind::Exp2);
    cfg.d = 200;
    cfg.tau_list = vec![0.9];
    let RunOutput::Trajectories(runs) = run(&cfg).unwrap() else { panic!() };
    for r in &runs {
        let first = &r.trajectory.records[0];
        assert_eq!(first.step, 0);
        assert!((first.distance - 0.2f64.sqrt()).abs() < 1e-10);
    }
}

#[test]
fn outputs_have_documented_headers() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(Kind::LandscapeDynamics);
    cfg.lambda = Values::One(15.0);
    cfg.n_pop = 2000;
    cfg.dynamics_max_steps = 3;
    write_manifest(&cfg, dir.path()).unwrap();
    let out = write_outputs(&cfg, &run(&cfg).unwrap(), dir.path()).unwrap();
    assert!(!out.files.is_empty());
    let summary = fs::read_to_string(dir.path().join("dynamics_summary.csv")).unwrap();
    assert!(summary.starts_with("lambda,seed,converged,steps,tau,angle_deg,phi,phi_se,pull,mu0,mu\n"));

    let mut cfg = tiny(Kind::Exp2);
    cfg.tau_list = vec![0.4];
    cfg.gradient = GradientSource::Exact;
    let out = write_outputs(&cfg, &run(&cfg).unwrap(), dir.path()).unwrap();
    let traj = out.files.iter().find(|f| f.to_string_lossy().contains("exp2_tau")).unwrap();
    let text = fs::read_to_string(traj).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# "));
    assert_eq!(lines.next().unwrap(), "step,distance,correlation,weak_distance");
    let summary = fs::read_to_string(dir.path().join("exp2_summary.csv")).unwrap();
    assert!(summary.starts_with("tau0,seed,crossed,min_distance,final_distance,weak_baseline,diverged\n"));
}
