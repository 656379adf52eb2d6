use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn qbs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbs")).args(args).output().expect("binary runs")
}

fn corpus(rel: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/corpus").join(rel).display().to_string()
}

fn tmp() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Posterior mean and standard deviations of (slope, intercept) for the
/// five-point data set under independent N(0, 3²) priors and noise sd 0.5.
fn regression_oracle() -> ([f64; 2], [f64; 2]) {
    let data = [(1.0, 2.5), (2.0, 3.8), (3.0, 4.5), (4.0, 6.2), (5.0, 8.0)];
    let (noise, prior) = (0.25, 9.0);
    let (mut a, mut b, mut d, mut u, mut v) = (1.0 / prior, 0.0, 1.0 / prior, 0.0, 0.0);
    for (x, y) in data {
        a += x * x / noise;
        b += x / noise;
        d += 1.0 / noise;
        u += x * y / noise;
        v += y / noise;
    }
    let det = a * d - b * b;
    let cov = [[d / det, -b / det], [-b / det, a / det]];
    let mean = [cov[0][0] * u + cov[0][1] * v, cov[1][0] * u + cov[1][1] * v];
    (mean, [cov[0][0].sqrt(), cov[1][1].sqrt()])
}

fn read_lines_csv(path: &Path) -> (Vec<f64>, Vec<f64>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(r.headers().unwrap(), vec!["line_id", "s", "b"]);
    let mut s = Vec::new();
    let mut b = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.unwrap();
        assert_eq!(rec[0].parse::<usize>().unwrap(), i);
        s.push(rec[1].parse().unwrap());
        b.push(rec[2].parse().unwrap());
    }
    (s, b)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[test]
fn run_output_validates_against_schema() {
    let dir = tmp();
    let out = dir.path().join("out.json");
    let status = qbs(&["run", &corpus("ok/linear_regression.qppl"), "--samples", "500", "--seed", "3", "--output", path_str(&out)]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));

    let schema: Value =
        serde_json::from_str(&fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schema/run-output.schema.json")).unwrap())
            .unwrap();
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert!(compiled.is_valid(&doc));
    assert_eq!(doc["query"], "Bayesian-linear-regression");
    assert_eq!(doc["inference"], "lw");
    assert_eq!(doc["seed"], 3);
    let samples = doc["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 500);
    let keys: Vec<&String> = samples[0]["predicts"].as_object().unwrap().keys().collect();
    assert_eq!(keys, ["f.b", "f.s"]);

    let chain = dir.path().join("chain.json");
    let status = qbs(&[
        "run", &corpus("ok/coin.qppl"), "--inference", "lmh", "--samples", "300", "--burnin", "100", "--output", path_str(&chain),
    ]);
    assert!(status.status.success());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&chain).unwrap()).unwrap();
    assert!(compiled.is_valid(&doc));
    assert_eq!(doc["samples"].as_array().unwrap().len(), 200);
    assert!(doc["ess"].is_null());
}

#[test]
fn bundled_regression_produces_full_finite_output() {
    let dir = tmp();
    let out = dir.path().join("fig.json");
    let status = qbs(&[
        "run", &corpus("ok/linear_regression.qppl"), "--inference", "lw", "--samples", "200000", "--seed", "1", "--output",
        path_str(&out),
    ]);
    assert!(status.status.success());
    let doc: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let samples = doc["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 200_000);
    assert!(samples.iter().all(|s| s["log_weight"].as_f64().is_some_and(f64::is_finite)));
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tmp();
    for (fmt, inference) in [("json", "lw"), ("csv", "lw"), ("json", "lmh")] {
        let files: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("{fmt}-{inference}-{i}"))).collect();
        for (i, f) in files.iter().enumerate() {
            let threads = if i == 0 { "1" } else { "4" };
            let status = Command::new(env!("CARGO_BIN_EXE_qbs"))
                .env("QBS_THREADS", threads)
                .args([
                    "run", &corpus("ok/linear_regression.qppl"), "--inference", inference, "--samples", "3000", "--burnin", "100",
                    "--seed", "42", "--format", fmt, "--output", path_str(f),
                ])
                .status()
                .unwrap();
            assert!(status.success());
        }
        assert_eq!(fs::read(&files[0]).unwrap(), fs::read(&files[1]).unwrap(), "{fmt} {inference}");
    }
    let a = qbs(&["regress", "--n-lines", "50", "--mode", "posterior", "--pool", "5000", "--seed", "8"]);
    let b = qbs(&["regress", "--n-lines", "50", "--mode", "posterior", "--pool", "5000", "--seed", "8"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn csv_has_sorted_labels_then_weight() {
    let out = qbs(&["run", &corpus("ok/coin.qppl"), "--samples", "4", "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("next,p,log_weight"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn parse_errors_exit_2_with_position() {
    let out = qbs(&["run", &corpus("broken/unclosed.qppl")]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("unclosed.qppl:4:"), "{err}");
    assert!(err.contains("unbalanced"), "{err}");
}

#[test]
fn normalization_errors_exit_3() {
    let dir = tmp();
    let zero = dir.path().join("zero.qppl");
    fs::write(&zero, "(defquery z (let [x (sample (normal 0 1))] (observe (bernoulli 1.0) 0) (predict :x x)))").unwrap();
    let out = qbs(&["run", path_str(&zero), "--samples", "50"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero"));

    let inf = dir.path().join("inf.qppl");
    fs::write(&inf, "(defquery i (observe (normal 0 1e-310) 0))").unwrap();
    let out = qbs(&["run", path_str(&inf), "--samples", "5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infinite"));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = tmp();
    let f = dir.path().join("bad.qppl");
    fs::write(&f, "(defquery bad (let [x 2] (x 1)))").unwrap();
    assert_eq!(qbs(&["run", path_str(&f)]).status.code(), Some(3));
}

#[test]
fn laws_report_every_suite() {
    let out = qbs(&["laws"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
    assert!(text.contains("de-finetti"));

    let out = qbs(&["laws", "--cases", "0"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("0 cases"));
}

#[test]
fn prior_lines_match_prior_moments() {
    let dir = tmp();
    let out = dir.path().join("prior.csv");
    assert!(qbs(&["regress", "--n-lines", "1000", "--seed", "5", "--output", path_str(&out)]).status.success());
    let (s, b) = read_lines_csv(&out);
    assert_eq!(s.len(), 1000);
    let n = 1000f64;
    for xs in [&s, &b] {
        let (m, sd) = mean_sd(xs);
        assert!(m.abs() < 3.0 * 3.0 / n.sqrt(), "mean {m}");
        // standard error of a normal sample's sd is about sd / sqrt(2(n-1))
        assert!((sd - 3.0).abs() < 3.0 * 3.0 / (2.0 * (n - 1.0)).sqrt(), "sd {sd}");
    }
}

#[test]
fn posterior_lines_match_oracle() {
    let dir = tmp();
    let out = dir.path().join("post.csv");
    let seed = "11";
    let status = qbs(&["regress", "--n-lines", "1000", "--mode", "posterior", "--pool", "200000", "--seed", seed, "--output", path_str(&out)]);
    assert!(status.status.success());
    let (s, b) = read_lines_csv(&out);

    // the resampling pool is the likelihood-weighting run with the same seed
    let pool = dir.path().join("pool.json");
    qbs(&["run", &corpus("ok/linear_regression.qppl"), "--samples", "200000", "--seed", seed, "--output", path_str(&pool)]);
    let ess = serde_json::from_str::<Value>(&fs::read_to_string(&pool).unwrap()).unwrap()["ess"].as_f64().unwrap();

    let (mean, sd) = regression_oracle();
    for (i, xs) in [&s, &b].into_iter().enumerate() {
        let (m, _) = mean_sd(xs);
        let se = sd[i] * (1.0 / xs.len() as f64 + 1.0 / ess).sqrt();
        assert!((m - mean[i]).abs() < 3.0 * se, "coordinate {i}: {m} vs {} (se {se})", mean[i]);
    }
}
