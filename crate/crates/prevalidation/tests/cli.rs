//! The `pvtool` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use prevalidation::cli::{EXIT_IO, EXIT_VALIDATION};

fn pvtool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pvtool"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// y = x_1 + noise, one clinical predictor, 40 rows.
fn write_data(dir: &Path) -> String {
    let mut s = String::from("y,z_clin,x_1,x_2,x_3\n");
    for i in 0..40 {
        let u = |k: u32| ((i * 7919 + k as usize * 104_729) % 1000) as f64 / 500.0 - 1.0;
        let x1 = u(1);
        let y = x1 + 0.5 * u(2);
        s.push_str(&format!("{y},{},{x1},{},{}\n", y + u(3), u(4), u(5)));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, s).unwrap();
    path.display().to_string()
}

#[test]
fn analyze_reports_every_row_and_one_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = pvtool(&[
        "analyze", "--data", &data, "--spec", "ols", "--folds", "10", "--format", "json",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["tool"], "pvtool");
    assert_eq!(v["config"]["seed"], 1);
    assert_eq!(v["result"]["provenance"].as_array().unwrap().len(), 40);
    assert_eq!(v["result"]["fit"]["columns"].as_array().unwrap().len(), 3);
    assert_eq!(v["result"]["z_names"][0], "z_clin");
}

#[test]
fn out_dir_names_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let out = dir.path().join("reports");
    let run = |workers: &str| {
        let o = pvtool(&[
            "permtest",
            "--data",
            &data,
            "--spec",
            "ols",
            "--folds",
            "5",
            "--B",
            "20",
            "--repeats",
            "2",
            "--seed",
            "4",
            "--workers",
            workers,
            "--format",
            "csv",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o).lines().map(String::from).collect::<Vec<_>>()
    };
    let a = run("1");
    let contents: Vec<String> = a
        .iter()
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect();
    let b = run("2");
    assert_eq!(a, b);
    assert_eq!(a.len(), 2);
    assert!(a[0].contains("permtest-") && a[1].ends_with("-repeats.csv"));
    for (p, c) in b.iter().zip(&contents) {
        assert_eq!(&std::fs::read_to_string(p).unwrap(), c);
    }
    assert!(contents[0].starts_with("# pvtool "));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let code = |args: &[&str]| pvtool(args).status.code().unwrap();
    assert_eq!(
        code(&["analyze", "--data", &data, "--spec", "ols", "--bogus"]),
        EXIT_VALIDATION
    );
    assert_eq!(
        code(&["analyze", "--data", &data, "--spec", "lasso_l:9"]),
        EXIT_VALIDATION
    );
    assert_eq!(
        code(&["analyze", "--data", &data, "--spec", "ols", "--folds", "0"]),
        EXIT_VALIDATION
    );
    assert_eq!(
        code(&["analyze", "--data", "/nonexistent/x.csv", "--spec", "ols"]),
        EXIT_IO
    );
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,x_1\n1,2\n3,oops\n").unwrap();
    let o = pvtool(&["analyze", "--data", bad.to_str().unwrap(), "--spec", "ols"]);
    assert_eq!(o.status.code(), Some(EXIT_VALIDATION));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("x_1"), "{err}");
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn cv_error_lists_each_rule_and_fold_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let o = pvtool(&[
        "cv-error",
        "--data",
        &data,
        "--spec",
        "ols",
        "--spec",
        "lasso_l:2",
        "--folds",
        "5,n",
        "--repeats",
        "2",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let body: Vec<String> = stdout(&o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(body[0], "rule,K,repeats,mean_error,sd_error");
    assert_eq!(body.len(), 5);
    assert!(body[4].starts_with("lasso_l:2,n,2,"));
}

#[test]
fn simulate_and_asymptotics_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("g.toml");
    std::fs::write(&grid, "seed = 3\nreps = 50\n[[cell]]\nscenario = \"linear_linear\"\nn = 12\np = 3\nfold_grid = [3, \"n\"]\n").unwrap();
    let o = pvtool(&[
        "simulate",
        "--grid",
        grid.to_str().unwrap(),
        "--reps",
        "30",
        "--format",
        "csv",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    assert!(s.contains("\"reps\":30"), "flag must override the file");
    assert_eq!(
        s.lines().filter(|l| l.starts_with("linear_linear")).count(),
        2
    );

    let out = dir.path().join("asym");
    let o = pvtool(&[
        "asymptotics",
        "--n",
        "200",
        "--p",
        "3",
        "--reps",
        "200",
        "--draws",
        "2000",
        "--leverage-draws",
        "20",
        "--samples",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let paths: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(paths.len(), 5);
    let report = std::fs::read_to_string(&paths[0]).unwrap();
    assert!(report.contains("ks_empirical_vs_null_law"));
    assert_eq!(
        std::fs::read_to_string(&paths[1]).unwrap().lines().count(),
        201
    );
}
