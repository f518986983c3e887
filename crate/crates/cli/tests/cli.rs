use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use ttstream_core::generators::random_tt;
use ttstream_core::io::{read_tt, write_tt, write_tucker};
use ttstream_core::tt::{TtCore, TtTensor};
use ttstream_core::tucker::random_tucker;
use ttstream_core::DenseTensor;

fn ttstream() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ttstream"));
    // keep the caller's environment from leaking into flag resolution
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("TTSTREAM_")) {
        c.env_remove(k);
    }
    c
}

fn run(args: &[&str]) -> (Output, Value) {
    let out = ttstream().args(args).output().expect("binary runs");
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out, v)
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).display().to_string()
}

fn rel(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let d: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).powi(2)).sum();
    d.sqrt() / b.frobenius_norm()
}

#[test]
fn decompose_hilbert_example_passes() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "h.ttf");
    let (o, v) = run(&[
        "decompose", "--method", "pstt2-onepass", "--tensor", "hilbert", "--dims", "60,60,60", "--ranks", "20,20",
        "--oversample", "5", "--partition", "6,1,6", "--workers", "4", "--seed", "7", "--verify", "full", "--tol",
        "1e-9", "--output", &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(v["schema"], 1);
    assert_eq!(v["method"], "pstt2-onepass");
    assert_eq!(v["error_mode"], "full");
    assert!(v["relative_error"].as_f64().unwrap() <= 1e-9);
    assert_eq!(v["eval_count"], 60 * 60 * 60);
    assert_eq!(v["per_worker_peak_scalars"].as_array().unwrap().len(), 4);
    assert!(v["message_count"].as_u64().unwrap() > 0);
    assert_eq!(read_tt(Path::new(&out)).unwrap().dims(), vec![60, 60, 60]);
}

#[test]
fn worker_count_does_not_change_output_bytes() {
    let dir = TempDir::new().unwrap();
    for method in ["pstt", "pstt2", "pstt2-onepass", "sstt"] {
        let files: Vec<String> = [1, 8]
            .iter()
            .map(|w| {
                let out = path(&dir, &format!("{method}-{w}.ttf"));
                let (o, _) = run(&[
                    "decompose", "--method", method, "--tensor", "gaussian-bumps", "--dims", "24,20,22", "--ranks",
                    "8,8", "--partition", "4,2,4", "--workers", &w.to_string(), "--seed", "3", "--bumps", "20",
                    "--verify", "none", "--output", &out,
                ]);
                assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
                out
            })
            .collect();
        assert_eq!(fs::read(&files[0]).unwrap(), fs::read(&files[1]).unwrap(), "{method}");
    }
}

#[test]
fn sampled_verification_on_large_tensor() {
    let (o, v) = run(&[
        "decompose", "--method", "sstt", "--tensor", "hilbert", "--dims", "300,300,200", "--ranks", "12,12",
        "--partition", "4,1,4", "--workers", "4", "--verify", "sample:100000", "--tol", "1e-6",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(v["error_mode"], "sample");
    assert_eq!(v["samples"], 100000);
    assert!(v["relative_error"].as_f64().unwrap() <= 1e-6);
    assert!(v["std_error"].as_f64().unwrap() >= 0.0);
}

#[test]
fn failed_verification_exits_with_three() {
    let (o, v) = run(&[
        "decompose", "--method", "pstt", "--tensor", "hilbert", "--dims", "30,30,30", "--ranks", "2,2", "--verify",
        "full", "--tol", "1e-12",
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(v["verified"], false);
}

#[test]
fn dense_file_input_and_every_method() {
    let dir = TempDir::new().unwrap();
    let x = random_tt(&[8, 9, 7, 6], &[3, 4, 2], 11).unwrap().full().unwrap();
    let input = path(&dir, "x.dtf");
    ttstream_core::io::write_dense(Path::new(&input), &x).unwrap();
    for method in ["ttsvd", "parallel-ttsvd", "pstt", "pstt-onepass", "pstt2", "pstt2-onepass", "sstt"] {
        let (o, v) = run(&[
            "decompose", "--method", method, "--tensor", "dense", "--input", &input, "--ranks", "3,4,2", "--workers",
            "2", "--verify", "full", "--tol", "1e-9",
        ]);
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(v["dims"], serde_json::json!([8, 9, 7, 6]));
    }
}

#[test]
fn convert_round_trip_within_twice_tol() {
    let dir = TempDir::new().unwrap();
    let t = random_tucker(&[9, 8, 10], &[5, 4, 6], 2).unwrap();
    let (tk, tt, tk2, tt2) = (path(&dir, "a.tkf"), path(&dir, "a.ttf"), path(&dir, "b.tkf"), path(&dir, "b.ttf"));
    write_tucker(Path::new(&tk), &t).unwrap();
    let tol = 1e-6;
    let (o, v) = run(&["convert", "--direction", "tucker2tt", "--input", &tk, "--output", &tt, "--tol", "1e-6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let first = read_tt(Path::new(&tt)).unwrap();
    assert!(rel(&first.full().unwrap(), &t.full().unwrap()) <= tol);
    assert!(v["relative_error"].as_f64().unwrap() <= tol);

    for basis in ["svd", "cpqr"] {
        let (o, v) = run(&[
            "convert", "--direction", "tt2tucker", "--input", &tt, "--output", &tk2, "--tol", "1e-6", "--basis", basis,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(v["span_mismatch"].as_array().unwrap().len(), 3);
        assert_eq!(v["warnings"], serde_json::json!([]));
        let (o, _) = run(&["convert", "--direction", "tucker2tt", "--input", &tk2, "--output", &tt2, "--tol", "1e-6"]);
        assert!(o.status.success());
        let back = read_tt(Path::new(&tt2)).unwrap();
        assert!(rel(&back.full().unwrap(), &first.full().unwrap()) <= 2.0 * tol, "{basis}");
    }
}

#[test]
fn convert_keeps_rank_one() {
    let dir = TempDir::new().unwrap();
    let t = random_tucker(&[6, 5, 7], &[1, 1, 1], 9).unwrap();
    let (tk, tt, tk2) = (path(&dir, "a.tkf"), path(&dir, "a.ttf"), path(&dir, "b.tkf"));
    write_tucker(Path::new(&tk), &t).unwrap();
    let (_, v) = run(&["convert", "--direction", "tucker2tt", "--input", &tk, "--output", &tt, "--tol", "1e-10"]);
    assert_eq!(v["core_sizes"], serde_json::json!([1, 1, 1, 1]));
    let (_, v) = run(&["convert", "--direction", "tt2tucker", "--input", &tt, "--output", &tk2, "--tol", "1e-10"]);
    assert_eq!(v["tucker_ranks"], serde_json::json!([1, 1, 1]));
}

#[test]
fn convert_rejects_wrong_format() {
    let dir = TempDir::new().unwrap();
    let tt = path(&dir, "a.ttf");
    write_tt(Path::new(&tt), &random_tt(&[4, 4, 4], &[2, 2], 1).unwrap()).unwrap();
    let (o, _) = run(&["convert", "--direction", "tucker2tt", "--input", &tt, "--output", &path(&dir, "x"), "--tol", "1e-3"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["command"], "convert");
    assert_eq!(err["error"]["kind"], "format");
}

#[test]
fn sylvester_demo_meets_residual() {
    let dir = TempDir::new().unwrap();
    let problem = path(&dir, "p.json");
    fs::write(&problem, r#"{"demo": {"n": 50, "seed": 1}, "eps": 1e-10}"#).unwrap();
    let out = path(&dir, "x.ttf");
    let (o, v) = run(&["solve-sylvester", "--problem", &problem, "--output", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
    assert!(v["direct_relative_error"].as_f64().unwrap() <= 1e-8);
    assert!(v["ell"].as_u64().unwrap() > 0);
    assert_eq!(read_tt(Path::new(&out)).unwrap().dims(), vec![50, 50, 50]);
}

#[test]
fn sylvester_eps_sweep_is_monotone() {
    let dir = TempDir::new().unwrap();
    let problem = path(&dir, "p.json");
    fs::write(&problem, r#"{"demo": {"n": 40}}"#).unwrap();
    let residuals: Vec<f64> = ["1e-4", "1e-6", "1e-8"]
        .iter()
        .map(|eps| {
            let (o, v) = run(&["solve-sylvester", "--problem", &problem, "--eps", eps]);
            assert!(o.status.success());
            v["residual"].as_f64().unwrap()
        })
        .collect();
    assert!(residuals.windows(2).all(|w| w[1] <= w[0]), "{residuals:?}");
}

#[test]
fn sylvester_zero_rhs_gives_zero_solution() {
    let dir = TempDir::new().unwrap();
    let n = 6;
    let cores = (0..3).map(|_| TtCore::zeros(1, n, 1)).collect();
    write_tt(&dir.path().join("f.ttf"), &TtTensor::new(cores).unwrap()).unwrap();
    let eig: Vec<f64> = (1..=n).map(|k| k as f64).collect();
    let problem = serde_json::json!({
        "a": {"eigenvalues": eig}, "b": {"eigenvalues": eig}, "c": {"eigenvalues": eig},
        "rhs": "f.ttf", "eps": 1e-8,
    });
    let file = path(&dir, "p.json");
    fs::write(&file, problem.to_string()).unwrap();
    let out = path(&dir, "x.ttf");
    let (o, _) = run(&["solve-sylvester", "--problem", &file, "--output", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x = read_tt(Path::new(&out)).unwrap().full().unwrap();
    assert!(x.values().iter().all(|&v| v == 0.0));
}

#[test]
fn sylvester_rejects_overlapping_spectra() {
    let dir = TempDir::new().unwrap();
    write_tt(&dir.path().join("f.ttf"), &random_tt(&[3, 3, 3], &[1, 1], 0).unwrap()).unwrap();
    let problem = serde_json::json!({
        "a": {"eigenvalues": [1.0, 2.0, 3.0]}, "b": {"eigenvalues": [-2.0, 1.0, 2.0]}, "c": {"eigenvalues": [1.0, 2.0, 3.0]},
        "rhs": "f.ttf",
    });
    let file = path(&dir, "p.json");
    fs::write(&file, problem.to_string()).unwrap();
    let (o, _) = run(&["solve-sylvester", "--problem", &file]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["command"], "solve-sylvester");
}

#[test]
fn info_reads_headers() {
    let dir = TempDir::new().unwrap();
    let tt = path(&dir, "a.ttf");
    write_tt(Path::new(&tt), &random_tt(&[4, 5, 6], &[2, 3], 1).unwrap()).unwrap();
    let (o, v) = run(&["info", &tt]);
    assert!(o.status.success());
    assert_eq!(v["format"], "TTF1");
    assert_eq!(v["core_sizes"], serde_json::json!([1, 2, 3, 1]));
}

#[test]
fn bad_input_reports_machine_readable_error() {
    let (o, _) = run(&["decompose", "--method", "nope", "--tensor", "hilbert", "--dims", "3,3"]);
    assert_eq!(o.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["schema"], 1);
    assert_eq!(err["error"]["kind"], "invalid_argument");

    let (o, _) = run(&["info", "/nonexistent/file.ttf"]);
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");
}

#[test]
fn flags_beat_environment_which_beats_defaults() {
    let args = ["decompose", "--method", "pstt", "--tensor", "hilbert", "--dims", "10,10,10", "--ranks", "3,3"];
    let seed = |env: Option<&str>, flag: Option<&str>| {
        let mut c = ttstream();
        c.args(args);
        if let Some(s) = env {
            c.env("TTSTREAM_SEED", s);
        }
        if let Some(s) = flag {
            c.args(["--seed", s]);
        }
        let v: Value = serde_json::from_slice(&c.output().unwrap().stdout).unwrap();
        v["seed"].as_u64().unwrap()
    };
    assert_eq!(seed(None, None), 0);
    assert_eq!(seed(Some("5"), None), 5);
    assert_eq!(seed(Some("5"), Some("9")), 9);
}

#[test]
fn report_file_round_trips_bit_exactly() {
    let dir = TempDir::new().unwrap();
    let report = path(&dir, "r.json");
    let o = ttstream()
        .args(["--report", &report, "decompose", "--method", "sstt", "--tensor", "hilbert", "--dims", "20,20,20"])
        .args(["--ranks", "6,6", "--verify", "full"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&report).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&v).unwrap() + "\n", text);
    let err = v["relative_error"].as_f64().unwrap();
    let again: f64 = serde_json::from_str(&serde_json::to_string(&err).unwrap()).unwrap();
    assert_eq!(err.to_bits(), again.to_bits());
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]));
}
