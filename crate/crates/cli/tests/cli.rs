use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn matgrid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matgrid")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("matgrid-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

/// Numeric CSV body (header dropped).
fn table(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

#[test]
fn spectrum_has_requested_rows_and_spde_reciprocal_falls_below_near_nyquist() {
    let o = matgrid(&["spectrum", "--n-freq", "37"]);
    assert!(o.status.success());
    let rows = table(&stdout(&o));
    assert_eq!(rows.len(), 37);
    let last = rows.last().unwrap();
    assert!((last[0] - 0.5).abs() < 1e-12);
    assert!(last[4] < last[3], "spde recip {} vs true recip {}", last[4], last[3]);
}

#[test]
fn exponential_spectra_agree_at_small_scale() {
    let o = matgrid(&["spectrum", "--nu", "0.5", "--alpha", "0.01", "--n-freq", "50"]);
    assert!(o.status.success());
    for r in table(&stdout(&o)) {
        assert!((r[2] / r[1] - 1.0).abs() < 0.01, "{r:?}");
    }
}

#[test]
fn inverse_op_second_offset_changes_sign_at_exponential_smoothness() {
    let o = matgrid(&[
        "inverse-op", "--nu", "0.45,0.5,0.55", "--offsets", "2", "--grid", "4096",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: Vec<f64> = table(&stdout(&o)).iter().map(|r| r[4]).collect();
    assert_eq!(r.len(), 3);
    assert!(r[0] * r[2] < 0.0, "{r:?}");
    assert!(r[1].abs() < 1e-10);
}

#[test]
fn inverse_op_matrix_method_runs_in_two_dimensions() {
    let o = matgrid(&["inverse-op", "--dim", "2", "--nu", "1", "--method", "matrix", "--grid", "15x15", "--offsets", "1:2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = table(&stdout(&o));
    assert_eq!(rows.len(), 1);
    assert!(rows[0][4].abs() > 1e-4);
}

#[test]
fn stencil_is_symmetric() {
    let o = matgrid(&["stencil", "--dim", "1", "--nu", "1.5", "--alpha", "0.3"]);
    assert!(o.status.success());
    let rows = table(&stdout(&o));
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let mirror = rows.iter().find(|m| m[0] == -r[0]).unwrap();
        assert_eq!(mirror[2], r[2]);
    }
}

#[test]
fn ratio_grid_covers_every_frequency() {
    let o = matgrid(&["ratio-grid", "--grid", "8x8"]);
    assert!(o.status.success());
    let rows = table(&stdout(&o));
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| r[2] > 0.0));
}

#[test]
fn verify_theorems_passes_and_reports_constants() {
    let dir = scratch("verify");
    let out = dir.join("report.jsonl");
    let o = matgrid(&["verify-theorems", "--quick", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<serde_json::Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let full = lines.iter().find(|l| l["name"] == "full_2d").unwrap();
    assert!((full["computed"].as_f64().unwrap() - 258.602).abs() < 1e-3);
    assert_eq!(lines.iter().filter(|l| l["record"] == "expansion").count(), 14);
    assert!(dir.join("report.jsonl.manifest.json").exists());
}

#[test]
fn verify_theorems_breach_exits_four_and_keeps_report() {
    let dir = scratch("breach");
    let out = dir.join("report.jsonl");
    let o = matgrid(&["verify-theorems", "--quick", "--tol", "1e-12", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(fs::read_to_string(&out).unwrap().lines().count() > 0);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(matgrid(&["spectrum", "--bogus"]).status.code(), Some(2));
    assert_eq!(matgrid(&["ratio-grid", "--grid", "8x"]).status.code(), Some(2));
    assert_eq!(matgrid(&["spectrum", "--nu", "2"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_matgrid"))
        .args(["stencil"])
        .env("MATGRID_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_three() {
    // Grid far too small for the coefficient decay at this inverse range.
    let o = matgrid(&["inverse-op", "--nu", "1", "--alpha", "0.01", "--grid", "32"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn simulate_is_deterministic_and_manifest_tracks_outputs() {
    let dir = scratch("simulate");
    let run = |name: &str, seed: &str| {
        let out = dir.join(name);
        let o = matgrid(&["simulate", "--grid", "6x5", "--seed", seed, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a.csv", "3");
    let b = run("b.csv", "3");
    let c = run("c.csv", "4");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());

    let ma = manifest(&dir.join("a.csv.manifest.json"));
    let mb = manifest(&dir.join("b.csv.manifest.json"));
    let mc = manifest(&dir.join("c.csv.manifest.json"));
    let sha: String = Sha256::digest(fs::read(&a).unwrap()).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(ma["outputs"][0]["sha256"], sha.as_str());
    assert_eq!(ma["digest"], mb["digest"]);
    assert_ne!(ma["digest"], mc["digest"]);
    assert_eq!(ma["command"], "simulate");
    assert_eq!(ma["seed"], 3);
    assert_eq!(ma["params"]["grid"], "6x5");
    assert_eq!(table(&fs::read_to_string(&a).unwrap()).len(), 30);
}

#[test]
fn fit_reads_simulated_field() {
    let dir = scratch("fit");
    let field = dir.join("field.csv");
    assert!(matgrid(&["simulate", "--grid", "8x8", "--alpha", "0.5", "--out", field.to_str().unwrap()]).status.success());
    for model in ["true_matern", "spde"] {
        let o = matgrid(&["fit", "--input", field.to_str().unwrap(), "--grid", "8x8", "--model", model]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert_eq!(r["model"], model);
        assert!(r["micro"].as_f64().unwrap() > 0.0);
    }
    let o = matgrid(&["fit", "--input", field.to_str().unwrap(), "--grid", "8x9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn small_sim_study_writes_all_outputs() {
    let dir = scratch("study");
    let out = dir.join("study");
    let args = [
        "sim-study", "--grid", "6x6", "--reps", "4", "--tau2", "0,0.1", "--embed", "24x24", "--seed", "9",
        "--out", out.to_str().unwrap(),
    ];
    let o = matgrid(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fits = fs::read_to_string(out.join("fits.csv")).unwrap();
    assert_eq!(fits.lines().count(), 1 + 2 * 3 * 4);
    let quantiles = fs::read_to_string(out.join("quantiles.csv")).unwrap();
    let q: Vec<Vec<&str>> = quantiles.lines().skip(1).map(|l| l.split(',').collect()).collect();
    for w in q.windows(2) {
        if w[0][..2] == w[1][..2] {
            assert!(w[0][4].parse::<f64>().unwrap() <= w[1][4].parse::<f64>().unwrap());
        }
    }
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summaries"].as_array().unwrap().len(), 6);
    let m1 = manifest(&out.join("manifest.json"));
    assert_eq!(m1["outputs"].as_array().unwrap().len(), 3);

    assert!(matgrid(&args).status.success());
    assert_eq!(manifest(&out.join("manifest.json"))["digest"], m1["digest"]);
}
