//! File-format behavior: round trips, format errors with useful positions,
//! raw-sample ingestion, and the report writer.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::fs;
use std::path::Path;
use std::process::Command;
use wassreg_cli::io;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wassreg"))
}

fn write(path: &Path, content: &str) {
    fs::write(path, content).unwrap();
}

#[test]
fn quantile_matrix_roundtrips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let status = bin()
        .args([
            "simulate",
            "--output",
            a.to_str().unwrap(),
            "--n",
            "3",
            "--p",
            "1",
            "--coeffs",
            "0.3,0,0.2,0",
            "--grid-size",
            "21",
            "--seed",
            "5",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let loaded = io::load_dataset(&a, io::InputFormat::QuantileMatrix, 21).unwrap();
    assert_eq!(loaded.data.n(), 3);
    let b = dir.path().join("b.csv");
    io::save_dataset(&b, &loaded.data, &loaded.predictor_names).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "save/load changed bytes");
}

#[test]
fn shuffled_grid_columns_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    write(&path, "x:a,q:0.0,q:0.7,q:0.3,q:1.0\n0.1,0,1,2,3\n");
    let err = io::load_dataset(&path, io::InputFormat::QuantileMatrix, 21).unwrap_err();
    assert!(err.to_string().contains("out of order"), "{err}");
}

#[test]
fn missing_grid_endpoints_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    write(&path, "x:a,q:0.1,q:0.5,q:1.0\n0.1,0,1,2\n");
    let err = io::load_dataset(&path, io::InputFormat::QuantileMatrix, 21).unwrap_err();
    assert!(err.to_string().contains("endpoints"), "{err}");
}

#[test]
fn non_monotone_row_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    write(
        &path,
        "x:a,q:0.0,q:0.5,q:1.0\n0.1,0,1,2\n0.2,0,2,1\n0.3,0,1,2\n0.4,1,2,3\n",
    );
    let err = io::load_dataset(&path, io::InputFormat::QuantileMatrix, 21).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("row 2"), "{msg}");
    assert!(msg.contains("decrease"), "{msg}");
}

#[test]
fn raw_samples_build_validated_curves() {
    // 50 ids with 300 draws each from shifted uniforms
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut body = String::from("id,x:dose,value\n");
    for id in 0..50 {
        let x = id as f64 / 50.0 - 0.5;
        for _ in 0..300 {
            let v: f64 = rng.random::<f64>() + x;
            body.push_str(&format!("s{id},{x},{v}\n"));
        }
    }
    write(&path, &body);
    assert_eq!(io::detect_format(&path).unwrap(), io::InputFormat::RawSamples);
    let loaded = io::load_dataset(&path, io::InputFormat::RawSamples, 201).unwrap();
    assert_eq!(loaded.data.n(), 50);
    assert_eq!(loaded.predictor_names, vec!["dose".to_string()]);
    assert!(loaded.data.has_quantile_densities());
    // estimated curve for a Uniform(x, x+1) response stays close to x + t
    let q = loaded.data.quantile(0);
    let x0 = loaded.data.predictors()[(0, 0)];
    for &t in &[0.2, 0.5, 0.8] {
        assert!((q.eval(t) - (x0 + t)).abs() < 0.1, "t={t}: {}", q.eval(t));
    }
}

#[test]
fn sample_too_small_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("raw.csv");
    let mut body = String::from("id,x:dose,value\n");
    for k in 0..10 {
        body.push_str(&format!("only,0.1,{}\n", k as f64));
    }
    write(&path, &body);
    let err = io::load_dataset(&path, io::InputFormat::RawSamples, 51).unwrap_err();
    assert!(err.to_string().contains("at least 20"), "{err}");
}

#[test]
fn report_roundtrips_through_writer() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let report = dir.path().join("r.json");
    assert!(bin()
        .args([
            "simulate", "--output", data.to_str().unwrap(), "--n", "40", "--p", "2",
            "--coeffs", "0.2,0.2,0.2,0.2", "--grid-size", "101", "--seed", "3",
        ])
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args([
            "test-global", "--input", data.to_str().unwrap(), "--output",
            report.to_str().unwrap(), "--seed", "11",
        ])
        .status()
        .unwrap()
        .success());
    let text = fs::read_to_string(&report).unwrap();
    let parsed: wassreg::TestReport = serde_json::from_str(&text).unwrap();
    assert_eq!(io::report_to_json(&parsed), text, "reload+rewrite changed the report");
}

#[test]
fn band_csv_rows_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert!(bin()
        .args([
            "simulate", "--output", data.to_str().unwrap(), "--n", "60", "--p", "1",
            "--coeffs", "2,0,1,0", "--grid-size", "201", "--seed", "9",
        ])
        .status()
        .unwrap()
        .success());
    assert!(bin()
        .args([
            "band", "--input", data.to_str().unwrap(), "--output", dir.path().to_str().unwrap(),
            "--kind", "density", "--at", "0.1", "--reps", "500", "--seed", "2",
        ])
        .status()
        .unwrap()
        .success());
    let csv = fs::read_to_string(dir.path().join("band_density_0.csv")).unwrap();
    let abscissa: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|line| line.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(abscissa.len() > 100);
    assert!(abscissa.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn table1_header_matches_row_column_structure() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin()
        .args([
            "reproduce", "table1", "--output", dir.path().to_str().unwrap(),
            "--seed", "3", "--reps", "2", "--n", "100",
        ])
        .status()
        .unwrap()
        .success());
    let csv = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "x,winf_linear_n100,winf_nonlinear_n100,density_linear_n100,density_nonlinear_n100"
    );
    // eleven x rows from -0.30 to 0.30
    assert_eq!(csv.lines().count(), 12);
    let first_x: f64 = csv.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    assert!((first_x + 0.30).abs() < 1e-12);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    // 2: input problems
    let code = bin()
        .args(["test-global", "--input", "/nonexistent.csv", "--output", "/tmp/x.json", "--seed", "1"])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(2));

    // 4: partial bootstrap without a fixed-support declaration
    let data = dir.path().join("d.csv");
    assert!(bin()
        .args([
            "simulate", "--output", data.to_str().unwrap(), "--n", "40", "--p", "2",
            "--coeffs", "0.2,0.2,0.2,0.2", "--grid-size", "51", "--seed", "3",
        ])
        .status()
        .unwrap()
        .success());
    let code = bin()
        .args([
            "test-partial", "--input", data.to_str().unwrap(), "--output",
            dir.path().join("r.json").to_str().unwrap(), "--partition", "x2",
            "--method", "bootstrap", "--seed", "4",
        ])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(4));

    // 3: degenerate band (identical curves, zero residuals, no fixed support)
    let degen = dir.path().join("degen.csv");
    let mut body = String::from("x:a,q:0.0,q:0.25,q:0.5,q:0.75,q:1.0\n");
    for &x in &[-0.5, -0.25, 0.25, 0.5] {
        body.push_str(&format!("{x},0,0.25,0.5,0.75,1\n"));
    }
    write(&degen, &body);
    let code = bin()
        .args([
            "band", "--input", degen.to_str().unwrap(), "--output", dir.path().to_str().unwrap(),
            "--kind", "winf", "--at", "0.1", "--reps", "200", "--seed", "5",
        ])
        .status()
        .unwrap()
        .code();
    assert_eq!(code, Some(3));
}
