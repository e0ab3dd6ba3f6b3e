use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use expradon::io::{read_grid, read_sinogram};
use expradon::{forward_point, Phantom, Ray, SmoothedPhantom};

fn ert(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ert"))
        .args(args)
        .current_dir(dir)
        .env_remove("ERT_THREADS")
        .output()
        .expect("run ert")
}

fn write_phantom(dir: &Path, name: &str, phantom: &Phantom) {
    fs::write(dir.join(name), phantom.to_json()).unwrap();
}

#[test]
fn sinogram_of_empty_phantom_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    write_phantom(dir.path(), "p.json", &Phantom::empty());
    let out = ert(dir.path(), &["sinogram", "--phantom", "p.json", "--mu", "1", "--ntheta", "8", "--ns", "16", "--out", "g.sino"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let g = read_sinogram(&dir.path().join("g.sino")).unwrap();
    assert!(g.values().iter().all(|&v| v == 0.0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("8x16"));
}

#[test]
fn sinogram_rows_match_forward_point() {
    let dir = tempfile::tempdir().unwrap();
    let disk = Phantom::disk([0.2, -0.1], 0.5, 1.5).unwrap();
    write_phantom(dir.path(), "p.json", &disk);
    let out = ert(dir.path(), &["sinogram", "--phantom", "p.json", "--mu", "1", "--ntheta", "12", "--ns", "33", "--out", "g.sino"]);
    assert!(out.status.success());
    let g = read_sinogram(&dir.path().join("g.sino")).unwrap();
    for j in [0, 5, 11] {
        for k in [0, 10, 16, 30] {
            let want = forward_point(&disk, Ray::new(g.phi(j), g.s(k)).unwrap(), 1.0);
            assert!((g.get(j, k) - want).abs() <= 1e-12);
        }
    }
}

#[test]
fn sinogram_without_out_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    write_phantom(dir.path(), "p.json", &Phantom::empty());
    let out = ert(dir.path(), &["sinogram", "--phantom", "p.json", "--mu", "1", "--ntheta", "8", "--ns", "16"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));
}

#[test]
fn bad_phantom_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.json"), r#"{"components":[{"kind":"disk","center":[0.9,0],"radius":0.5,"amplitude":1}]}"#)
        .unwrap();
    let out = ert(dir.path(), &["sinogram", "--phantom", "p.json", "--mu", "1", "--ntheta", "8", "--ns", "16", "--out", "g"]);
    assert_eq!(out.status.code(), Some(2));
    let out = ert(dir.path(), &["sinogram", "--phantom", "missing.json", "--mu", "1", "--ntheta", "8", "--ns", "16", "--out", "g"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fbp_of_zero_sinogram_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("z.sino"), "ERTSINO v1 2 3 0.5\n0 0 0\n0 0 0\n").unwrap();
    let out = ert(dir.path(), &["fbp", "--sinogram", "z.sino", "--rho", "0.1", "--nside", "8", "--out", "r.grid"]);
    assert!(out.status.success());
    assert!(read_grid(&dir.path().join("r.grid")).unwrap().values().iter().all(|&v| v == 0.0));
}

#[test]
fn fbp_rejects_nonpositive_rho() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("z.sino"), "ERTSINO v1 1 1 0\n0\n").unwrap();
    for rho in ["0", "-0.1"] {
        let out = ert(dir.path(), &["fbp", "--sinogram", "z.sino", "--rho", rho, "--out", "r.grid"]);
        assert_eq!(out.status.code(), Some(2), "rho {rho}");
    }
}

#[test]
fn fbp_round_trip_recovers_bump_peak() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ert(d, &["phantom", "--bump", "0,0,1,1", "--out", "p.json"]);
    assert!(out.status.success());
    let out = ert(d, &["sinogram", "--phantom", "p.json", "--mu", "0.8", "--ntheta", "360", "--ns", "512", "--out", "g.sino"]);
    assert!(out.status.success());
    // odd grid so that the center pixel sits at the origin
    let out = ert(d, &["fbp", "--sinogram", "g.sino", "--rho", "0.05", "--nside", "33", "--out", "r.grid", "--binary"]);
    assert!(out.status.success());
    let grid = read_grid(&d.join("r.grid")).unwrap();
    let peak = grid.get(16, 16);
    assert!((peak - 1.0).abs() < 0.02, "peak {peak}");
}

#[test]
fn estimate_rejects_empty_sample() {
    let dir = tempfile::tempdir().unwrap();
    write_phantom(dir.path(), "p.json", &Phantom::bump([0.0, 0.0], 1.0, 1.0).unwrap());
    let out = ert(dir.path(), &["estimate", "--phantom", "p.json", "--n", "0", "--mu", "0.5", "--out", "e.grid"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn noiseless_estimate_approaches_smoothed_phantom() {
    let dir = tempfile::tempdir().unwrap();
    let bump = Phantom::bump([0.0, 0.0], 1.0, 1.0).unwrap();
    write_phantom(dir.path(), "p.json", &bump);
    let rho = 0.25;
    let args = [
        "estimate", "--phantom", "p.json", "--n", "1000000", "--mu", "0.5", "--noise", "none", "--rho", "0.25",
        "--nside", "12", "--seed", "3", "--out", "e.grid",
    ];
    let out = ert(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let grid = read_grid(&dir.path().join("e.grid")).unwrap();
    let oracle = SmoothedPhantom::new(&bump, rho).unwrap().image(12).unwrap();
    let peak = oracle.max_abs();
    let worst = grid.values().iter().zip(oracle.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 0.05 * peak, "worst {worst}, peak {peak}");
    let first = fs::read(dir.path().join("e.grid")).unwrap();
    assert!(ert(dir.path(), &args).status.success());
    assert_eq!(fs::read(dir.path().join("e.grid")).unwrap(), first);
}

#[test]
fn zero_risk_study_declines_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("study.json"),
        r#"{"phantom":{"components":[]},"mu":0.5,"noise":{"kind":"none","sigma":0},"beta":2,
            "n_values":[100,200,400],"trials":3,"criterion":"mse"}"#,
    )
    .unwrap();
    let out = ert(dir.path(), &["risk", "--config", "study.json", "--out", "risk.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonpositive"));
    let table = fs::read_to_string(dir.path().join("risk.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
    assert!(!dir.path().join("risk.fit.json").exists());
}

#[test]
fn risk_then_rate_fit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("study.json"),
        r#"{"phantom":{"components":[{"kind":"bump","center":[0,0],"scale":1,"amplitude":1}]},
            "mu":0.5,"beta":2,"n_values":[1000,2000],"trials":4,"criterion":"mise","n_side":8}"#,
    )
    .unwrap();
    let out = ert(dir.path(), &["risk", "--config", "study.json", "--n-values", "100,1000,10000", "--out", "r.csv", "--fit-out", "fit.json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert!((fit["theory_slope"].as_f64().unwrap() + 4.0 / 7.0).abs() < 1e-12);
    let out = ert(dir.path(), &["rate-fit", "--table", "r.csv", "--theory-slope", "-0.5"]);
    assert!(out.status.success());
    let refit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(refit["slope"], fit["slope"]);
    assert_eq!(refit["theory_slope"].as_f64(), Some(-0.5));
}

#[test]
fn phantom_command_rasterizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = ert(dir.path(), &["phantom", "--disk", "-0.2,0,0.3,2", "--out", "p.json", "--grid", "p.grid", "--nside", "16"]);
    assert!(out.status.success());
    let p = Phantom::from_json(&fs::read_to_string(dir.path().join("p.json")).unwrap()).unwrap();
    assert_eq!(p.components().len(), 1);
    let grid = read_grid(&dir.path().join("p.grid")).unwrap();
    assert_eq!(grid.min_max(), (0.0, 2.0));
    let out = ert(dir.path(), &["phantom", "--disk", "0.9,0,0.3,1", "--out", "q.json"]);
    assert_eq!(out.status.code(), Some(2));
}
