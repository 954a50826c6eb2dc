//! End-to-end CLI checks driving the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_duotact"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("duotact_cli_{name}_{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

/// Coarse config so tests stay fast.
fn fast_config(dir: &Path) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{"mesh_density": 41, "grid_width": 32, "grid_height": 32}"#,
    )
    .unwrap();
    path
}

#[test]
fn generate_then_reconstruct_then_pipeline() {
    let dir = tmpdir("flow");
    let config = fast_config(&dir);
    let data = dir.join("data");

    let status = bin()
        .args(["generate", "--out"])
        .arg(&data)
        .args(["--per-category", "1", "--seed", "9", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(data.join("manifest.json").exists());
    assert!(data.join("baseline.csv").exists());
    assert!(data.join("contact_0000.csv").exists());
    assert!(data.join("gt_0000.pgm").exists());

    // Cache the sensitivity matrix, then reconstruct from the frames.
    let jac = dir.join("jacobian.bin");
    let status = bin()
        .args(["jacobian", "--out"])
        .arg(&jac)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(jac.exists());

    let pgm = dir.join("recon.pgm");
    let csv = dir.join("recon.csv");
    let status = bin()
        .args(["reconstruct", "--baseline"])
        .arg(data.join("baseline.csv"))
        .arg("--contact")
        .arg(data.join("contact_0000.csv"))
        .arg("--jacobian")
        .arg(&jac)
        .arg("--out-pgm")
        .arg(&pgm)
        .arg("--out-csv")
        .arg(&csv)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(fs::read_to_string(&pgm).unwrap().starts_with("P2"));
    assert!(csv.exists());

    // The manifest records the true pressure; feed it to the pipeline.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(data.join("manifest.json")).unwrap()).unwrap();
    let pressure = manifest["samples"][0]["pressure"].as_f64().unwrap();
    let out = dir.join("estimates.json");
    let status = bin()
        .args(["pipeline", "--baseline"])
        .arg(data.join("baseline.csv"))
        .arg("--contact")
        .arg(data.join("contact_0000.csv"))
        .args(["--pressure", &pressure.to_string()])
        .arg("--jacobian")
        .arg(&jac)
        .arg("--out")
        .arg(&out)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(result["total_force_n"].is_number());
    assert!(result["estimates"].is_array());

    fs::remove_dir_all(dir).ok();
}

#[test]
fn suite_writes_report_and_images() {
    let dir = tmpdir("suite");
    let config = fast_config(&dir);
    let out = dir.join("suite_out");
    let status = bin()
        .args(["suite", "--name", "multi", "--seed", "3", "--out"])
        .arg(&out)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "multi");
    assert_eq!(report["cases"].as_array().unwrap().len(), 3);
    assert!(out.join("three_a.pgm").exists());
    assert!(out.join("four.pgm").exists());
    fs::remove_dir_all(dir).ok();
}

#[test]
fn calibrate_air_emits_fit() {
    let output = bin()
        .args(["calibrate-air", "--points", "245", "--seed", "7"])
        .output()
        .unwrap();
    assert!(output.status.success());
    let result: serde_json::Value =
        serde_json::from_str(&String::from_utf8_lossy(&output.stdout)).unwrap();
    let p1 = result["p1"].as_f64().unwrap();
    assert!((p1 - 0.192).abs() / 0.192 < 0.05);
    assert!(result["r"].as_f64().unwrap() > 0.9);
    assert!(result["force_rmse_n"].is_number());
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tmpdir("badconfig");
    let bad = dir.join("bad.json");
    fs::write(&bad, r#"{"mesh_density": 0}"#).unwrap();
    let status = bin()
        .args(["jacobian", "--out"])
        .arg(dir.join("j.bin"))
        .arg("--config")
        .arg(&bad)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    // Unknown suite name is also a configuration error.
    let status = bin()
        .args(["suite", "--name", "nonsense", "--out"])
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    fs::remove_dir_all(dir).ok();
}

#[test]
fn stale_jacobian_cache_is_rejected() {
    let dir = tmpdir("stale");
    let config = fast_config(&dir);
    let jac = dir.join("jacobian.bin");
    let status = bin()
        .args(["jacobian", "--out"])
        .arg(&jac)
        .arg("--config")
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());

    // A different grid invalidates the cache key.
    let other = dir.join("other.json");
    fs::write(
        &other,
        r#"{"mesh_density": 41, "grid_width": 16, "grid_height": 16}"#,
    )
    .unwrap();
    let data = dir.join("data");
    let status = bin()
        .args(["generate", "--out"])
        .arg(&data)
        .args(["--per-category", "1", "--seed", "1", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    let status = bin()
        .args(["reconstruct", "--baseline"])
        .arg(data.join("baseline.csv"))
        .arg("--contact")
        .arg(data.join("contact_0000.csv"))
        .arg("--jacobian")
        .arg(&jac)
        .arg("--out-pgm")
        .arg(dir.join("r.pgm"))
        .arg("--config")
        .arg(&other)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    fs::remove_dir_all(dir).ok();
}
