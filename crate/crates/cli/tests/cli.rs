use std::path::Path;
use std::process::{Command, Output};

fn freeze(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeze")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn dry_run_prints_the_defaults() {
    let o = freeze(&["--dry-run", "echo"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let spec = freeze_core::parse_and_validate(&text).unwrap();
    assert_eq!(spec.model.j, 200);
    assert_eq!(spec.echo.delta, 1e-3);
    assert_eq!(spec.seed, 1);
    assert_eq!(spec.name, "echo");
}

#[test]
fn odd_spin_is_rejected_with_a_parity_message() {
    let o = freeze(&["--dry-run", "predict", "--j", "201"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("model.j = 201 is odd") && err.contains("parity"), "{err}");
}

#[test]
fn several_errors_are_reported_together() {
    let o = freeze(&["--dry-run", "echo", "--j", "7", "--delta", "inf"]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("model.j") && err.contains("echo.delta"), "{err}");
}

#[test]
fn echo_writes_series_metadata_and_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = freeze(&["--out", out, "echo", "--j", "20", "--n-max", "500", "--delta", "0.02"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run = dir.path().join("echo");
    let csv = read(run.join("series.csv"));
    assert!(csv.starts_with("n,F,re_f,im_f\n"));
    let rows = freeze_core::io::series_from_csv(&csv).unwrap();
    assert_eq!(rows[0].n, 0);
    assert_eq!(rows.last().unwrap().n, 500);
    let meta: serde_json::Value = serde_json::from_str(&read(run.join("meta.json"))).unwrap();
    assert_eq!(meta["schema_version"], 1);
    assert_eq!(meta["seed"], 1);
    let pred: serde_json::Value = serde_json::from_str(&read(run.join("predictions.json"))).unwrap();
    assert!(pred["f_plat_cis"].as_f64().unwrap() > 0.0);
    assert!(std::fs::read_dir(&run).unwrap().all(|e| !e.unwrap().file_name().to_string_lossy().contains(".tmp")));
}

#[test]
fn identical_runs_write_identical_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for name in ["a", "b"] {
        let o = freeze(&["--out", out, "--name", name, "--seed", "9", "echo", "--j", "16", "--state", "ris", "--n-max", "2000"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(read(dir.path().join("a/series.csv")), read(dir.path().join("b/series.csv")));
}

#[test]
fn sweeps_do_not_depend_on_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut names = Vec::new();
    for workers in ["1", "3"] {
        let out = dir.path().join(format!("w{workers}"));
        let o = freeze(&[
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
            "sweep",
            "--j",
            "12",
            "--n-max",
            "300",
            "--deltas",
            "0.01,0.05",
            "--states",
            "cis,ris",
            "--seeds",
            "1,2",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut listed: Vec<String> =
            std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
        listed.sort();
        names.push(listed);
    }
    assert_eq!(names[0], names[1]);
    assert_eq!(names[0].len(), 6, "{:?}", names[0]);
    for run in &names[0] {
        let a = read(dir.path().join("w1").join(run).join("series.csv"));
        let b = read(dir.path().join("w3").join(run).join("series.csv"));
        assert_eq!(a, b, "{run}");
    }
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 42\n[model]\nj = 24\n[echo]\ndelta = 0.005\n").unwrap();
    let o = freeze(&["--config", cfg.to_str().unwrap(), "--seed", "3", "--dry-run", "echo", "--j", "30", "--alpha", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = freeze_core::parse_and_validate(&stdout(&o)).unwrap();
    assert_eq!((spec.seed, spec.model.j, spec.echo.delta), (42, 24, 0.005));
    assert_eq!(spec.model.alpha, 12.0);

    std::fs::write(&cfg, "[model]\nspin = 4\n").unwrap();
    let o = freeze(&["--config", cfg.to_str().unwrap(), "--dry-run", "echo"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("spin"), "{}", stderr(&o));
}

#[test]
fn predict_and_sigma_write_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = freeze(&["--out", out, "predict", "--j", "1000", "--delta", "0.001"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let pred: serde_json::Value = serde_json::from_str(&read(dir.path().join("predict/predictions.json"))).unwrap();
    assert!((pred["t2"].as_f64().unwrap() - 46_676.0).abs() < 5.0);
    assert_eq!(pred["decay_regime"], "gaussian");

    let o = freeze(&["--out", out, "sigma", "--n-cut", "10", "--ensemble", "2000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(dir.path().join("sigma/sigma.csv")).starts_with("n,variance\n"));
}

#[test]
fn classical_run_is_flagged_classical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = freeze(&["--out", out, "classical", "--j", "100", "--delta", "0.01", "--n-max", "5", "--trajectories", "5000"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = freeze_core::io::series_from_csv(&read(dir.path().join("classical-echo/series.csv"))).unwrap();
    assert_eq!(rows.len(), 6);
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path().join("classical-echo/meta.json"))).unwrap();
    assert_eq!(meta["series"]["classical"], true);
}

#[test]
fn figure_bundle_at_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = freeze(&["--out", out, "--scale", "0.1", "--workers", "2", "figure", "fig3a"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bundle: serde_json::Value = serde_json::from_str(&read(dir.path().join("fig3a.json"))).unwrap();
    let runs = bundle["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    for run in runs {
        let name = run["name"].as_str().unwrap();
        assert!(dir.path().join(name).join("series.csv").exists(), "{name}");
    }
}
