use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mimfd::fem::read_field_csv;
use mimfd_cli::RunConfig;

const EXAMPLE1: &str = "alpha = 0.5\nq = 1\nt_final = 1.5\nsteps = 20\nnx = 20\nny = 20\n";

fn mimfd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mimfd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn csv_column(path: &Path, name: &str) -> Vec<String> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(col).unwrap().to_string()).collect()
}

#[test]
fn forward_writes_frames_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "ex1.conf", EXAMPLE1);
    let out = tmp.path().join("fw");
    let res = mimfd(&["forward", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    for n in [0, 20] {
        assert!(out.join(format!("frame_{n:04}.csv")).exists());
    }
    assert!(!out.join("frame_0021.csv").exists());
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    for line in ["alpha=0.5", "t_final=1.5", "steps=20", "nx=20", "ny=20"] {
        assert!(manifest.lines().any(|l| l == line), "{line} missing");
    }
    let back: RunConfig = manifest.parse().unwrap();
    let mut expect = RunConfig::example1();
    expect.out = Some(out.clone());
    assert_eq!(back, expect);
}

#[test]
fn zero_data_gives_zero_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zero.conf",
        "alpha = 0.3\nq = 2\nt_final = 1\nsteps = 5\nnx = 6\nny = 6\nrho = zero\ninitial = zero\n",
    );
    let out = tmp.path().join("z");
    assert_eq!(code(&mimfd(&["forward", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    for n in 0..=5 {
        let f = read_field_csv(out.join(format!("frame_{n:04}.csv"))).unwrap();
        assert!(f.field.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn config_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", &EXAMPLE1.replace("steps = 20\n", ""));
    let res = mimfd(&["forward", "--config", cfg.to_str().unwrap(), "--out", "unused"]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stderr).contains("steps"));

    let unknown = write_config(tmp.path(), "unknown.conf", &format!("{EXAMPLE1}colour = red\n"));
    assert_eq!(code(&mimfd(&["invert", "--config", unknown.to_str().unwrap()])), 1);

    let good = write_config(tmp.path(), "ok.conf", EXAMPLE1);
    // no output directory anywhere
    assert_eq!(code(&mimfd(&["forward", "--config", good.to_str().unwrap()])), 1);
    assert_eq!(code(&mimfd(&["verify", "nonsense"])), 1);
    assert_eq!(code(&mimfd(&["tables", "2", "--seeds", "0", "--out", tmp.path().to_str().unwrap()])), 1);
    assert_eq!(code(&mimfd(&["tables", "4", "--out", tmp.path().to_str().unwrap()])), 1);
    assert_eq!(code(&mimfd(&["frobnicate"])), 1);
}

#[test]
fn io_errors_exit_three() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.conf");
    assert_eq!(code(&mimfd(&["forward", "--config", missing.to_str().unwrap(), "--out", "x"])), 3);
    let cfg = write_config(
        tmp.path(),
        "data.conf",
        &format!("{EXAMPLE1}data = {}\n", tmp.path().join("no_frames").display()),
    );
    let out = tmp.path().join("inv");
    assert_eq!(code(&mimfd(&["invert", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 3);
}

#[test]
fn table_row_config_writes_summary_with_error_and_loss() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "row1.conf", &format!("{EXAMPLE1}noise = 1\nframe = 0.1,0.9\n"));
    let out = tmp.path().join("inv");
    let res = mimfd(&["invert", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3"]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    let error: f64 = csv_column(&out.join("summary.csv"), "Error")[0].parse().unwrap();
    let loss: f64 = csv_column(&out.join("summary.csv"), "Loss")[0].parse().unwrap();
    assert!(error > 0.0 && error < 1.0);
    assert!(loss > 0.0);
    let history = fs::read_to_string(out.join("history.csv")).unwrap();
    assert!(history.starts_with("iteration,cost,grad_norm,step\n"));
    let manifest: RunConfig = fs::read_to_string(out.join("manifest.txt")).unwrap().parse().unwrap();
    assert_eq!(manifest.seed, 3);
    assert_eq!(manifest.noise, 1.0);
    for f in ["g_rec.csv", "g_true.csv"] {
        assert_eq!(read_field_csv(out.join(f)).unwrap().field.len(), 441);
    }
}

#[test]
fn noise_free_sanity_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "clean.conf",
        &format!("{EXAMPLE1}frame = 0.5,0.5\nbeta = 1e-8\ndirection = fletcher-reeves\n"),
    );
    let out = tmp.path().join("inv");
    assert_eq!(code(&mimfd(&["invert", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let error: f64 = csv_column(&out.join("summary.csv"), "Error")[0].parse().unwrap();
    assert!(error <= 1e-2, "{error}");
}

#[test]
fn infinite_tolerance_writes_initial_guess() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "inf.conf", &format!("{EXAMPLE1}grad_tol = inf\ninitial_guess = one\n"));
    let out = tmp.path().join("inv");
    assert_eq!(code(&mimfd(&["invert", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let g = read_field_csv(out.join("g_rec.csv")).unwrap();
    assert!(g.field.iter().all(|v| *v == 1.0));
    assert_eq!(fs::read_to_string(out.join("history.csv")).unwrap().lines().count(), 2);
}

#[test]
fn line_search_failure_exits_four_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "ls.conf",
        &format!("{EXAMPLE1}step_start = fixed\narmijo_step = 1e9\narmijo_max_backtracks = 0\n"),
    );
    let out = tmp.path().join("inv");
    let res = mimfd(&["invert", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&res), 4, "{}", String::from_utf8_lossy(&res.stderr));
    assert_eq!(csv_column(&out.join("summary.csv"), "stop")[0], "line-search-failed");
}

#[test]
fn inverting_written_frames_matches_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    let small = "alpha = 0.5\nq = 1\nt_final = 1.5\nsteps = 8\nnx = 8\nny = 8\nframe = 0.25,0.75\nmax_iters = 10\n";
    let cfg = write_config(tmp.path(), "small.conf", small);
    let frames = tmp.path().join("frames");
    assert_eq!(code(&mimfd(&["forward", "--config", cfg.to_str().unwrap(), "--out", frames.to_str().unwrap()])), 0);
    let loaded = write_config(tmp.path(), "loaded.conf", &format!("{small}data = {}\n", frames.display()));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&mimfd(&["invert", "--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&mimfd(&["invert", "--config", loaded.to_str().unwrap(), "--out", b.to_str().unwrap()])), 0);
    assert_eq!(fs::read(a.join("g_rec.csv")).unwrap(), fs::read(b.join("g_rec.csv")).unwrap());

    let mismatched = write_config(
        tmp.path(),
        "mismatch.conf",
        &format!("{}data = {}\n", small.replace("nx = 8", "nx = 10"), frames.display()),
    );
    assert_eq!(code(&mimfd(&["invert", "--config", mismatched.to_str().unwrap(), "--out", b.to_str().unwrap()])), 1);
}

#[test]
fn verify_suites_pass() {
    for suite in ["duhamel", "convergence", "gradient"] {
        let res = mimfd(&["verify", suite]);
        let stdout = String::from_utf8_lossy(&res.stdout);
        assert_eq!(code(&res), 0, "{suite}: {stdout}");
        assert!(stdout.contains("PASS") && !stdout.contains("FAIL"));
    }
}

#[test]
fn tables_are_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (dir, jobs) in dirs.iter().zip(["1", "1", "3"]) {
        let res = mimfd(&["tables", "2", "--seeds", "2", "--seed", "17", "--jobs", jobs, "--out", dir.to_str().unwrap()]);
        assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stderr));
    }
    for name in ["table2.csv", "table2_detail.csv"] {
        let first = fs::read(dirs[0].join(name)).unwrap();
        for d in &dirs[1..] {
            assert_eq!(first, fs::read(d.join(name)).unwrap(), "{name}");
        }
    }
    let alphas = csv_column(&dirs[0].join("table2.csv"), "alpha");
    assert_eq!(alphas, ["0.3", "0.6", "0.9"]);
}
