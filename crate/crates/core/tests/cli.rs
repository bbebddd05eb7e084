use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn streetgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streetgeo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path, extra: &[&str]) {
    let out_dir = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--out-dir", out_dir];
    args.extend_from_slice(extra);
    let out = streetgeo(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn fuse(dir: &Path, extra: &[&str]) -> Output {
    let (f, d) = (path(dir, "frames.jsonl"), path(dir, "detections.jsonl"));
    let mut args = vec!["fuse", "--frames", &f, "--detections", &d];
    args.extend_from_slice(extra);
    streetgeo(&args)
}

#[test]
fn simulate_fuse_eval_noise_free() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--seed", "7", "--noise-free"]);
    let fused = fuse(dir.path(), &[]);
    assert!(fused.status.success());

    let truth = path(dir.path(), "truth.jsonl");
    let mut eval = Command::new(env!("CARGO_BIN_EXE_streetgeo"))
        .args(["eval", "--truth", &truth, "--tp-radius", "6"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    eval.stdin.take().unwrap().write_all(&fused.stdout).unwrap();
    let out = eval.wait_with_output().unwrap();
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("true positive radius: 6.000 m\n"), "{table}");
    let all = table.lines().find(|l| l.starts_with("all")).unwrap();
    let cols: Vec<&str> = all.split_whitespace().collect();
    assert_eq!(&cols[3..6], &["1.000", "1.000", "1.000"], "{all}");
}

#[test]
fn geojson_export_is_a_feature_collection() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--seed", "2", "--objects", "4", "--noise-free"]);
    let out_file = path(dir.path(), "objects.geojson");
    let fused = fuse(dir.path(), &["--format", "geojson", "--out", &out_file]);
    assert!(fused.status.success());
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_file).unwrap()).unwrap();
    assert_eq!(value["type"], "FeatureCollection");
    let features = value["features"].as_array().unwrap();
    assert_eq!(features.len(), 4);
    let props = &features[0]["properties"];
    for key in ["class", "height_mean", "height_median", "height_std", "view_count"] {
        assert!(props.get(key).is_some(), "missing {key}");
    }
    let coords = features[0]["geometry"]["coordinates"].as_array().unwrap();
    assert!(coords[0].as_f64().unwrap() < 0.0 && coords[1].as_f64().unwrap() > 50.0);
}

#[test]
fn usage_errors_exit_one() {
    let out = streetgeo(&["fuse"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(streetgeo(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(streetgeo(&["fuse", "--bogus"]).status.code(), Some(1));
    assert_eq!(streetgeo(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_files_exit_two_and_bad_config_exits_one() {
    let out = streetgeo(&["fuse", "--frames", "/nonexistent/f", "--detections", "/nonexistent/d"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--objects", "2", "--noise-free"]);
    assert_eq!(fuse(dir.path(), &["--alpha", "1.5"]).status.code(), Some(1));

    let config = path(dir.path(), "run.toml");
    std::fs::write(&config, "alpha = 0.9\nbeta = 0.9\n").unwrap();
    let out = fuse(dir.path(), &["--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceeds 1"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--objects", "2", "--noise-free"]);
    let config = path(dir.path(), "run.toml");
    std::fs::write(&config, "alpha = 0.0\n").unwrap();
    // α = 0 detects nothing; the flag restores detection.
    let none = fuse(dir.path(), &["--config", &config]);
    assert!(none.status.success() && none.stdout.is_empty());
    let some = fuse(dir.path(), &["--config", &config, "--alpha", "0.3"]);
    assert_eq!(String::from_utf8(some.stdout).unwrap().lines().count(), 2);
}

#[test]
fn dangling_reference_is_named() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--objects", "2", "--noise-free"]);
    let dets = path(dir.path(), "detections.jsonl");
    let mut text = std::fs::read_to_string(&dets).unwrap();
    text.push_str("{\"image_id\":\"ghost\",\"class\":\"drain\",\"pixel_x\":1.0,\"pixel_y\":1.0}\n");
    std::fs::write(&dets, text).unwrap();
    let out = fuse(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ghost"));
}

#[test]
fn calibrate_and_tune() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--seed", "3", "--noise-free", "--camera-height", "2.5"]);
    let (f, d, t) = (path(dir.path(), "frames.jsonl"), path(dir.path(), "detections.jsonl"), path(dir.path(), "truth.jsonl"));
    let out = streetgeo(&["calibrate", "--frames", &f, "--detections", &d, "--class", "drain"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("camera height (mean) 2.500 m"));

    let cfg = path(dir.path(), "best.toml");
    let out = streetgeo(&[
        "tune", "--frames", &f, "--detections", &d, "--truth", &t,
        "--alpha-grid", "0.2,0.3", "--beta-grid", "0.05", "--lambda-grid", "0.05",
        "--linkage-cutoff-grid", "2", "--split", "lon", "--out-config", &cfg,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("evaluated 2 combinations"));
    assert!(text.contains("protocol: validation/test split"));
    assert!(std::fs::read_to_string(&cfg).unwrap().contains("alpha = "));
}
