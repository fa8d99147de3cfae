use std::fs;
use std::path::Path;
use std::process::Command;

fn revradon(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_revradon")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: serde_json::Value) -> String {
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&body).unwrap()).unwrap();
    path.display().to_string()
}

fn base(dir: &Path) -> serde_json::Value {
    serde_json::json!({
        "schema_version": 1,
        "family": {"family": "spheroid", "c": 2.0},
        "grid": {"n": 17, "half_width_xy": 1.0, "half_width_z": 5.0, "s_min": 0.2, "s_max": 2.2},
        "noise": {"gamma": 2.0, "seed": 9},
        "output_dir": dir.join("out"),
    })
}

#[test]
fn simulate_then_reconstruct() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), base(d.path()));
    let out = revradon(&["simulate", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sino = d.path().join("out/sinogram.f64");
    let truth = d.path().join("out/phantom.f64");
    let first = fs::read(&sino).unwrap();
    assert_eq!(first.len(), 17 * 32 * 17 * 8);
    let side: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/sinogram.json")).unwrap()).unwrap();
    assert_eq!(side["array"]["shape"], serde_json::json!([17, 32, 17]));
    assert_eq!(side["config"]["noise"]["seed"], 9);

    let again = revradon(&["simulate", "--config", &cfg]);
    assert!(again.status.success());
    assert_eq!(fs::read(&sino).unwrap(), first);

    let rec = revradon(&[
        "reconstruct",
        "--config",
        &cfg,
        "--sinogram",
        sino.to_str().unwrap(),
        "--truth",
        truth.to_str().unwrap(),
    ]);
    assert!(rec.status.success(), "{}", String::from_utf8_lossy(&rec.stderr));
    assert!(String::from_utf8_lossy(&rec.stdout).contains("relative error"));
    let vol = fs::read(d.path().join("out/volume.f64")).unwrap();
    assert_eq!(vol.len(), 17 * 17 * 17 * 8);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/reconstruction.json")).unwrap()).unwrap();
    assert!(report["rel_error"].as_f64().unwrap() < 1.0);
}

#[test]
fn missing_sinogram_exits_with_io_code_and_writes_nothing() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), base(d.path()));
    let out = revradon(&["reconstruct", "--config", &cfg, "--sinogram", "/nonexistent/s.f64"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(!d.path().join("out").exists());
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let d = tempfile::tempdir().unwrap();
    let mut body = base(d.path());
    body["noise"]["gamma"] = serde_json::json!(-1.0);
    let cfg = write_config(d.path(), body);
    assert_eq!(revradon(&["simulate", "--config", &cfg]).status.code(), Some(2));
    let bad_family = write_config(
        d.path(),
        serde_json::json!({"schema_version": 1, "family": {"family": "torus"}, "output_dir": "x"}),
    );
    assert_eq!(revradon(&["simulate", "--config", &bad_family]).status.code(), Some(4));
}

#[test]
fn check_bolker_reports_pass_and_fail() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write_config(d.path(), base(d.path()));
    let out = revradon(&["check-bolker", "--config", &cfg]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/bolker.json")).unwrap()).unwrap();
    assert!(report["verdicts"].as_array().unwrap().iter().all(|v| v["passed"] == true));

    // h = (s - 1)^2 (1 - x^2): h_s vanishes on s = 1
    let (s, x): (Vec<f64>, Vec<f64>) = (
        (0..21).map(|i| 0.5 + 0.05 * i as f64).collect(),
        (0..21).map(|j| -1.0 + 0.1 * j as f64).collect(),
    );
    let h: Vec<Vec<f64>> = s.iter().map(|si| x.iter().map(|xj| (si - 1.0).powi(2) * (1.0 - xj * xj)).collect()).collect();
    let mut body = base(d.path());
    body["bolker"] = serde_json::json!({"profile": {"family": "tabulated", "s": s, "x": x, "h": h}, "x_resolution": 65});
    let cfg = write_config(d.path(), body);
    assert!(revradon(&["check-bolker", "--config", &cfg]).status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("out/bolker.json")).unwrap()).unwrap();
    let hs = report["verdicts"].as_array().unwrap().iter().find(|v| v["condition"] == "nonvanishing_hs").unwrap();
    assert_eq!(hs["passed"], false);
}

#[test]
fn condnum_and_artifact_csv_headers() {
    let d = tempfile::tempdir().unwrap();
    let mut body = base(d.path());
    body["artifacts"] = serde_json::json!({"point": [0.3, 0.0, 0.0], "theta_samples": 64});
    let cfg = write_config(d.path(), body);
    assert!(revradon(&["condnum", "--config", &cfg]).status.success());
    for fam in ["sphere", "spheroid", "lemon"] {
        let text = fs::read_to_string(d.path().join(format!("out/cond_{fam}.csv"))).unwrap();
        assert!(text.starts_with("xi,cond\n"));
    }
    assert!(revradon(&["predict-artifacts", "--config", &cfg]).status.success());
    let text = fs::read_to_string(d.path().join("out/artifacts.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "theta,x1,x2,x3");
    // closed curve: first and last samples coincide in space
    let first: Vec<f64> = rows[1].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    let last: Vec<f64> = rows[rows.len() - 1].split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    for (a, b) in first.iter().zip(&last) {
        assert!((a - b).abs() < 1e-12);
    }
}
