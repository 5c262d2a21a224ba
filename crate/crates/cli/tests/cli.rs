use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fpfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpfit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = fpfit(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A short trajectory and its density, enough for plumbing checks.
fn prepared() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["simulate", "--n-samples", "200000", "--seed", "3"],
    );
    ok(dir.path(), &["build-pdf", "--bins", "20"]);
    dir
}

#[test]
fn pipeline_runs_with_defaults() {
    let dir = prepared();
    let d = dir.path();
    for f in ["series.fts", "series.fts.json", "pdf.csv", "pdf.csv.json"] {
        assert!(d.join(f).is_file(), "{f} missing");
    }

    ok(d, &["fitness", "--fields"]);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("fitness.json")).unwrap()).unwrap();
    assert!(report["fitness"].as_f64().unwrap() > 0.0);

    let stdout = ok(d, &["fit", "--reference", "k=1,c=0.5"]);
    assert!(stdout.contains("q* = "), "{stdout}");
    assert!(stdout.contains("error vs reference"), "{stdout}");
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["q_star"].as_array().unwrap().len(), 3);
    assert!(fit["percent_errors"].is_array());

    ok(d, &["map", "--a", "k:0.5:1.5:5", "--b", "c:0.25:0.75:4"]);
    let map = fs::read_to_string(d.join("map.csv")).unwrap();
    assert_eq!(map.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);

    ok(
        d,
        &[
            "sweep", "--sweep", "nu", "--solve", "c", "--range", "0.2:1:5",
        ],
    );
    let sweep = fs::read_to_string(d.join("sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "nu,c_hat,E,converged");
    assert_eq!(sweep.lines().count(), 6);
}

#[test]
fn config_file_drives_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        "seed = 5\n[simulate]\nn_samples = 50000\noutput = \"a.fts\"\n\
         [pdf]\nbins = 12\noutput = \"a.csv\"\n[fit]\nfree = [\"c\"]\ninit = { c = 0.8 }\n",
    )
    .unwrap();
    ok(d, &["-c", "run.toml", "simulate"]);
    ok(d, &["-c", "run.toml", "build-pdf"]);
    ok(d, &["-c", "run.toml", "fit"]);
    let fit: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["free_mask"], serde_json::json!([false, true, false]));
}

#[test]
fn reruns_are_byte_identical() {
    let a = prepared();
    let b = prepared();
    for f in ["series.fts", "series.fts.json", "pdf.csv", "pdf.csv.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn zero_samples_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = fpfit(dir.path(), &["simulate", "--n-samples", "0"]);
    assert!(!out.status.success());
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_input_fails_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = fpfit(dir.path(), &["build-pdf", "--input", "nope.fts"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("nope.fts"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

    let out = fpfit(dir.path(), &["fit", "--pdf", "nope.csv"]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn coarse_grid_warns_then_fitness_refuses() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["simulate", "--n-samples", "1000"]);
    let out = fpfit(d, &["build-pdf", "--bins", "2"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("S = 2"), "{}", stderr(&out));
    let out = fpfit(d, &["fitness"]);
    assert!(!out.status.success());
    assert!(!d.join("fitness.json").exists());
}

#[test]
fn unknown_free_parameter_lists_valid_names() {
    let dir = prepared();
    let out = fpfit(dir.path(), &["fit", "--free", "k,sigma"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("sigma") && err.contains("k, c, nu"), "{err}");
}

#[test]
fn single_point_map() {
    let dir = prepared();
    ok(
        dir.path(),
        &[
            "map",
            "--a",
            "k:1:2:9",
            "--b",
            "c:0.5:1:9",
            "--resolution",
            "1",
        ],
    );
    let map = fs::read_to_string(dir.path().join("map.csv")).unwrap();
    let rows: Vec<&str> = map.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1,"), "{map}");
}

#[test]
fn existing_outputs_need_force() {
    let dir = prepared();
    let d = dir.path();
    let before = fs::read(d.join("pdf.csv")).unwrap();
    let out = fpfit(d, &["build-pdf", "--bins", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(fs::read(d.join("pdf.csv")).unwrap(), before);
    ok(d, &["build-pdf", "--bins", "10", "--force"]);
    assert_ne!(fs::read(d.join("pdf.csv")).unwrap(), before);
}

#[test]
fn bad_model_and_config_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = fpfit(d, &["simulate", "--model", "lorenz"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(d.join("bad.toml"), "sed = 1\n").unwrap();
    let out = fpfit(d, &["-c", "bad.toml", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad.toml"));
}

#[test]
fn binary_density_round_trips_through_fitness() {
    let dir = prepared();
    let d = dir.path();
    ok(d, &["build-pdf", "--bins", "20", "--out", "pdf.fgf"]);
    ok(d, &["fitness", "--pdf", "pdf.csv", "--out", "a.json"]);
    ok(d, &["fitness", "--pdf", "pdf.fgf", "--out", "b.json"]);
    let e = |f: &str| -> f64 {
        let v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join(f)).unwrap()).unwrap();
        v["fitness"].as_f64().unwrap()
    };
    assert_eq!(e("a.json"), e("b.json"));
}
