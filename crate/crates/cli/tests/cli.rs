use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtv::io::{load_image, read_csv, save_image};
use mtv::synth::axis_aligned_image;

fn mtv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtv"))
        .args(args)
        .env_remove("MTV_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn synthetic(dir: &Path, name: &str, side: usize, seed: u64) -> PathBuf {
    let p = dir.join(name);
    save_image(&axis_aligned_image(side, side, 3, seed).unwrap(), &p).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_flags_exit_one_and_help_exits_zero() {
    assert_eq!(code(&mtv(&["denoise", "--lambda", "abc"])), 1);
    assert_eq!(code(&mtv(&["frobnicate"])), 1);
    assert_eq!(code(&mtv(&[])), 1);
    assert_eq!(code(&mtv(&["--help"])), 0);
}

#[test]
fn denoise_zero_lambda_returns_clamped_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.pgm", 16, 1);
    let output = dir.path().join("out.pgm");
    let out = mtv(&["denoise", "--input", s(&input), "--output", s(&output), "--lambda", "0"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(&input).unwrap(), fs::read(&output).unwrap());
    let rows = read_csv(output.with_extension("csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].lambda, 0.0);
}

#[test]
fn denoise_noisy_input_and_tv_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.png", 32, 2);
    for theta in ["0", "0.5"] {
        let output = dir.path().join(format!("out{theta}.png"));
        let out = mtv(&[
            "denoise", "--input", s(&input), "--output", s(&output), "--lambda", "0.08", "--theta", theta, "--sigma",
            "0.098", "--seed", "3",
        ]);
        assert_eq!(code(&out), 0);
        let row = &read_csv(output.with_extension("csv")).unwrap()[0];
        assert_eq!(row.theta, theta.parse::<f64>().unwrap());
        // Denoising beats the noise floor (~20 dB at this sigma).
        assert!(row.psnr_db > 24.0, "{}", row.psnr_db);
        assert_eq!(load_image(&output).unwrap().dim(), (32, 32));
    }
}

#[test]
fn denoise_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.pgm", 16, 3);
    let run = |name: &str| {
        let output = dir.path().join(name);
        let out = mtv(&["denoise", "--input", s(&input), "--output", s(&output), "--sigma", "0.1", "--seed", "9"]);
        assert_eq!(code(&out), 0);
        let mut row = read_csv(output.with_extension("csv")).unwrap().remove(0);
        row.runtime_ms = 0.0;
        (fs::read(&output).unwrap(), row)
    };
    let (img_a, row_a) = run("a.pgm");
    let (img_b, row_b) = run("b.pgm");
    assert_eq!(img_a, img_b);
    assert_eq!(row_a, row_b);
}

#[test]
fn denoise_non_convergence_exits_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.pgm", 32, 4);
    let output = dir.path().join("out.pgm");
    let out = mtv(&["denoise", "--input", s(&input), "--output", s(&output), "--sigma", "0.1", "--max-iter", "2"]);
    assert_eq!(code(&out), 2);
    assert!(output.exists());
}

#[test]
fn denoise_missing_input_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = mtv(&["denoise", "--input", s(&dir.path().join("nope.pgm")), "--output", s(&dir.path().join("o.pgm"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn verify_passes_across_seeds() {
    for seed in 0..10 {
        let out = mtv(&["verify", "--seed", &seed.to_string(), "--instances", "10"]);
        assert_eq!(code(&out), 0, "seed {seed}:\n{}", stdout(&out));
    }
    let out = mtv(&["verify"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("0 failed"));
}

#[test]
fn verify_injected_fault_fails() {
    let out = mtv(&["verify", "--inject-fault", "--instances", "3"]);
    assert_ne!(code(&out), 0);
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn sweep_table_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.pgm", 16, 5);
    let csv = dir.path().join("s.csv");
    let out = mtv(&["sweep", "--input", s(&input), "--output", s(&csv), "--theta-grid", "0.5", "--lambda-grid", "0.1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_csv(&csv).unwrap().len(), 1);

    let out = mtv(&[
        "sweep", "--input", s(&input), "--output", s(&csv), "--theta-grid", "0,0.5,1", "--lambda-grid", "0.05,0.1",
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(read_csv(&csv).unwrap().len(), 6);

    let out = mtv(&["sweep", "--input", s(&input), "--output", s(&csv), "--theta-grid", ""]);
    assert_eq!(code(&out), 1);
}

#[test]
fn sweep_prefers_mixed_derivative_on_axis_aligned_image() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.pgm", 64, 6);
    let csv = dir.path().join("s.csv");
    let out = mtv(&[
        "sweep", "--input", s(&input), "--output", s(&csv), "--sigma", "0.0980392156862745", "--theta-grid",
        "0,0.25,0.5,0.75,1", "--lambda-grid", "0.04,0.06,0.08,0.1,0.12",
    ]);
    assert_eq!(code(&out), 0);
    let rows = read_csv(&csv).unwrap();
    let best = rows.iter().max_by(|a, b| a.psnr_db.total_cmp(&b.psnr_db)).unwrap();
    assert!(best.theta > 0.0 && best.theta <= 1.0, "theta* = {}", best.theta);
}

fn refine_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn refine_single_level_and_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.pgm", 40, 7);
    let csv = dir.path().join("r.csv");

    let out = mtv(&["refine", "--input", s(&input), "--output", s(&csv), "--levels", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(refine_csv(&csv).len(), 1);

    let out = mtv(&["refine", "--input", s(&input), "--output", s(&csv), "--levels", "5,6,7"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = refine_csv(&csv);
    assert_eq!(rows.len(), 3);
    let objs: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let spread = objs.iter().cloned().fold(f64::MIN, f64::max) - objs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 1e-8, "{spread}");
    assert!(rows.iter().all(|r| r[2] <= 1e-6 && r[3] <= 1e-6));
}

#[test]
fn refine_rejects_too_coarse_level() {
    let dir = tempfile::tempdir().unwrap();
    let input = synthetic(dir.path(), "in.pgm", 32, 8);
    let csv = dir.path().join("r.csv");
    let out = mtv(&["refine", "--input", s(&input), "--output", s(&csv), "--levels", "4,5"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn bench_rows_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    fs::create_dir(&data).unwrap();
    let csv = dir.path().join("b.csv");
    let out = mtv(&["bench", "--data-dir", s(&data), "--output", s(&csv)]);
    assert_eq!(code(&out), 1);

    synthetic(&data, "one.pgm", 16, 9);
    let out = mtv(&["bench", "--data-dir", s(&data), "--output", s(&csv), "--sigma", "0.05,0.1", "--theta", "0.5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&csv).unwrap();
    assert_eq!(rows.len(), 4);
    for method in ["tv", "mtv"] {
        assert_eq!(rows.iter().filter(|r| r.method == method).count(), 2);
    }

    let missing = dir.path().join("missing");
    assert_eq!(code(&mtv(&["bench", "--data-dir", s(&missing), "--output", s(&csv)])), 1);
}

#[test]
fn bench_reads_data_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    synthetic(dir.path(), "one.pgm", 16, 10);
    let csv = dir.path().join("b.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_mtv"))
        .args(["bench", "--output", s(&csv), "--sigma", "0.1", "--theta", "0.3", "--mode", "per-sigma"])
        .env("MTV_DATA_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_csv(&csv).unwrap().len(), 2);
}

#[test]
fn bench_synthetic_corpus_ordering() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..3 {
        synthetic(dir.path(), &format!("s{i}.pgm"), 32, 20 + i);
    }
    let csv = dir.path().join("b.csv");
    let out = mtv(&[
        "bench", "--data-dir", s(dir.path()), "--output", s(&csv), "--sigma", "0.0588235294117647,0.0980392156862745",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&csv).unwrap();
    let mean = |method: &str, sigma: f64| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == method && (r.sigma - sigma).abs() < 1e-12)
            .map(|r| r.psnr_db)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let theta_mean = |sigma: f64| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == "mtv" && (r.sigma - sigma).abs() < 1e-12)
            .map(|r| r.theta)
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    for sigma in [15.0 / 255.0, 25.0 / 255.0] {
        assert!(mean("mtv", sigma) >= mean("tv", sigma));
    }
    assert!((theta_mean(15.0 / 255.0) - theta_mean(25.0 / 255.0)).abs() < 0.2);
}
