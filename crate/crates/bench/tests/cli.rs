use std::fs;
use std::path::Path;
use std::process::Command;

use gpe_bench::runs::initial_state;
use gpe_bench::{cmd_converge, cmd_groundstate, cmd_run, cmd_stability, Context, RunConfig};
use gpe_core::problems::load_state;
use gpe_core::Mesh64;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gpe-bench"))
}

fn soliton(scheme: &str, steps: usize, t: f64) -> RunConfig {
    RunConfig {
        problem: "single_soliton".into(),
        scheme: scheme.into(),
        elements: Some(vec![1024]),
        n_steps: Some(steps),
        final_time: Some(t),
        repeats: 1,
        ..Default::default()
    }
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].to_string()).collect()
}

#[test]
fn run_writes_monotone_trace() {
    let dir = tempfile::tempdir().unwrap();
    let rep = cmd_run(&soliton("IM", 16, 0.25), &Context::new(dir.path())).unwrap();
    assert!(rep.ok());
    let t: Vec<f64> = column(&dir.path().join("observables.csv"), "t").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(t.len(), 17);
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    let err: Vec<String> = column(&dir.path().join("observables.csv"), "err_h1");
    assert!(err.iter().all(|e| e.parse::<f64>().unwrap() > 0.0));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(json["config"]["n_steps"], 16);
    assert_eq!(json["config"]["tau"], 1.0 / 64.0);
    assert_eq!(json["runs"][0]["method"], "IM");
}

#[test]
fn zero_steps_give_one_row() {
    let dir = tempfile::tempdir().unwrap();
    cmd_run(&soliton("CN", 0, 0.0), &Context::new(dir.path())).unwrap();
    assert_eq!(column(&dir.path().join("observables.csv"), "t"), vec!["0.0"]);
}

#[test]
fn outputs_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        cmd_run(&soliton("RE", 8, 0.125), &Context::new(d.path())).unwrap();
    }
    for col in ["t", "mass", "energy", "pseudo_energy", "err_l2", "err_h1", "err_l1rho"] {
        assert_eq!(column(&a.path().join("observables.csv"), col), column(&b.path().join("observables.csv"), col));
    }
}

#[test]
fn harmonic_ground_state_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml_str(
        r#"
        problem = "lattice1d"
        scheme = "RE"
        domain = [-12.0, 12.0]
        elements = [2400]
        n_steps = 0
        final_time = 0.0
        repeats = 1
        [groundstate]
        potential = "harmonic"
        beta = 0.0
        tau = 0.5
        tol = 1e-10
        "#,
    )
    .unwrap();
    let ctx = Context::new(dir.path());
    let rep = cmd_groundstate(&cfg, &ctx).unwrap();
    let g = rep.ground_state.unwrap();
    assert!((g.eigenvalue - 0.5).abs() < 0.005, "{}", g.eigenvalue);
    assert!((g.mass - 1.0).abs() < 1e-12);

    // the cached state is picked up without recomputation
    let spec = cfg.spec().unwrap();
    let mesh: Mesh64 = spec.mesh_with([2400, 0]).unwrap();
    let (u, source) = initial_state(&cfg, &spec, &mesh, &ctx).unwrap();
    assert!(source.ends_with(".state"), "{source}");
    let saved = load_state(&dir.path().join("ground_state.state"), &mesh).unwrap();
    assert!(u.iter().zip(&saved).all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));

    // an explicit state file evolves without recomputation
    let run_dir = dir.path().join("run");
    let mut cfg2 = cfg.clone();
    cfg2.initial_state = Some(dir.path().join("ground_state.state"));
    cfg2.final_time = Some(0.1);
    cfg2.n_steps = Some(10);
    let rep = cmd_run(&cfg2, &Context::new(&run_dir)).unwrap();
    assert!(rep.ok());
    assert!((rep.runs[0].final_mass - 1.0).abs() < 1e-10);
}

#[test]
fn fine_reference_sweep_is_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = soliton("CN", 0, 0.5);
    cfg.n_steps = None;
    cfg.schemes = vec!["CN".into(), "LCN".into()];
    cfg.converge.steps = vec![8, 16, 32];
    cfg.converge.reference = "fine".into();
    cfg.converge.reference_steps = Some(512);
    let ctx = Context { workers: 4, ..Context::new(dir.path()) };
    let rep = cmd_converge(&cfg, &ctx).unwrap();
    assert_eq!(rep.eoc.len(), 6);
    for r in rep.eoc.iter().filter(|r| r.tau < 0.0625) {
        let p = r.eoc_l2.unwrap();
        assert!((1.7..2.4).contains(&p), "{} {}: {p}", r.method, r.tau);
    }
    assert!(dir.path().join("eoc.csv").exists());
}

#[test]
fn infinite_threshold_never_crosses() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = soliton("RE", 0, 0.5);
    cfg.n_steps = None;
    cfg.schemes = vec!["RE".into(), "SP2".into()];
    cfg.stability.steps = vec![16, 32];
    cfg.stability.energy_threshold = f64::INFINITY;
    cfg.stability.sp2_points = 1024;
    let rep = cmd_stability(&cfg, &Context::new(dir.path())).unwrap();
    assert_eq!(rep.stability.len(), 4);
    assert!(rep.stability.iter().all(|r| r.crossing == "none" && r.steps_taken == r.n_steps));
    assert!(column(&dir.path().join("stability.csv"), "crossing").iter().all(|c| c == "none"));
}

#[test]
fn cli_runs_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "problem = \"single_soliton\"\nscheme = \"CN\"\nrepeats = 1\n").unwrap();
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--scheme", "LCN", "--steps", "8", "--final-time", "0.25", "--elements", "512", "--out"])
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("LCN tau=0.03125 steps=8/8"));
    assert_eq!(column(&dir.path().join("o/summary.csv"), "nx"), vec!["512"]);
}

#[test]
fn cli_reports_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "problem = \"single_soliton\"\n\nschem = \"CN\"\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("schem") && err.contains("line 3"), "{err}");

    let out = bin().args(["run", "--problem", "single_soliton", "--scheme", "RK4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`scheme`"));

    let out = bin().args(["run", "--problem", "two_soliton", "--tau", "0.3"]).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("not a multiple"));
}

#[test]
fn solver_failure_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f.toml");
    fs::write(&cfg, "problem = \"two_soliton\"\nscheme = \"IM\"\nrepeats = 1\nn_steps = 2\nfinal_time = 2.0\nelements = [1024]\n[newton]\nmax_iter = 1\n")
        .unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(json["failed_runs"], 1);
}
