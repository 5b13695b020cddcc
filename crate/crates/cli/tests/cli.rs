use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_growthlab"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("spawn growthlab")
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn is_empty(dir: &Path) -> bool {
    std::fs::read_dir(dir)
        .map(|mut d| d.next().is_none())
        .unwrap_or(true)
}

#[test]
fn catalog_lists_the_core_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["catalog"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("power"));
    assert!(text.contains("halfpower"));
    assert!(text.contains("maxsq2d"));
}

#[test]
fn diagnose_square_recovers_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["diagnose", "--fn", "power", "--p", "2", "--delta", "1"],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc = json(tmp.path(), "diagnostics.json");
    let r = &doc["report"];
    assert!((r["growth"]["gamma_hat"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert!((r["tilt"]["kappa_hat"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert!((r["loja"]["mu_hat"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    assert_eq!(doc["passed"], true);
    let csv = std::fs::read_to_string(tmp.path().join("diagnostics.csv")).unwrap();
    assert!(csv.starts_with("# growthlab diagnose\n# config: {"));
}

#[test]
fn diagnose_halfpower_warns_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(tmp.path(), &["diagnose", "--fn", "halfpower", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DegenerateEstimate"));
    let doc = json(tmp.path(), "diagnostics.json");
    assert_eq!(doc["report"]["growth"]["gamma_hat"].as_f64(), Some(0.0));
    assert!((doc["restricted_growth"]["gamma_hat"].as_f64().unwrap() - 1.0).abs() < 0.05);
}

#[test]
fn audit_failure_exits_with_two_and_keeps_reports() {
    let tmp = tempfile::tempdir().unwrap();
    // without slack the sampled growth relation misses by the grid resolution
    let out = run(tmp.path(), &["diagnose", "--fn", "quadcubic", "--tau", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(tmp.path(), "diagnostics.json")["passed"], false);
}

#[test]
fn usage_errors_exit_with_one_and_write_nothing() {
    let cases: [&[&str]; 6] = [
        &["diagnose", "--fn", "nope"],
        &["prox", "--epsilon", "1.5"],
        &["prox", "--iterations", "0"],
        &["prox", "--fn", "maxsq2d", "--p", "2"],
        &["tracking", "--n", "3"],
        &["tracking", "--alpha", "2", "--beta", "1"],
    ];
    for args in cases {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        let out = run(&dir, args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(is_empty(&dir), "{args:?} wrote files");
    }
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_growthlab"))
        .arg("--out")
        .arg(tmp.path())
        .args(["diagnose"])
        .env("GROWTHLAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn prox_on_square_passes_the_rate_audit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["prox", "--fn", "power", "--epsilon", "0.5", "--x0", "1"],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc = json(tmp.path(), "prox.json");
    assert_eq!(doc["audit"]["passed"], true);
    let traj = doc["trajectory"].as_array().unwrap();
    assert_eq!(traj.len(), 11);
    for (k, step) in traj.iter().enumerate() {
        assert!((step["x"][0].as_f64().unwrap() - 0.2f64.powi(k as i32)).abs() < 1e-6);
    }
    let csv = std::fs::read_to_string(tmp.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 12);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(
        &cfg,
        "fn = \"quadbox\"\nbound = 0.5\ndelta = 2.0\ngrid = 401\n",
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(
        &out_dir,
        &[
            "--config",
            cfg.to_str().unwrap(),
            "diagnose",
            "--delta",
            "1.5",
        ],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let c = &json(&out_dir, "diagnostics.json")["config"];
    assert_eq!(c["fn"], "quadbox");
    assert_eq!(c["params"]["bound"], 0.5);
    assert_eq!(c["delta"], 1.5);
    assert_eq!(c["grid"], 401);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "n = 16\nunknown_key = 1\n").unwrap();
    let out = run(
        &tmp.path().join("out"),
        &["--config", cfg.to_str().unwrap(), "tracking"],
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tracking_writes_fields_sweep_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(
        tmp.path(),
        &["tracking", "--n", "12", "--etas-per-norm", "3"],
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest = json(tmp.path(), "manifest.json");
    assert_eq!(manifest["config"]["n"], 12);
    assert_eq!(manifest["checks"]["sign_violations"], 0);
    let control = std::fs::read_to_string(tmp.path().join("control.txt")).unwrap();
    let field = growthlab_core::tracking::Field2D::from_text(&control).unwrap();
    assert_eq!(field.grid().n(), 12);
    assert!(field.values().iter().all(|&u| (0.0..=12.0).contains(&u)));
    let sweep = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().filter(|l| !l.starts_with('#')).count(), 1 + 9);
}
