use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mvgamma"));
    c.env_remove("MVGAMMA_THREADS");
    c
}

/// Runs the binary and returns (exit code, parsed report).
fn run(args: &[&str]) -> (i32, Value) {
    let out = bin().args(args).output().expect("spawn");
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (out.status.code().unwrap(), v)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap()
}

/// `P(|Z1| ≤ z, |Z2| ≤ z)` by a midpoint rule over the conditional normal.
fn bvn_rectangle(z: f64, rho: f64) -> f64 {
    // erf by a high-order series is plenty for |x| ≤ 8
    fn erf(x: f64) -> f64 {
        let mut sum = 0.0f64;
        let mut term = x;
        let mut k = 0.0;
        while term.abs() > 1e-17 * sum.abs().max(1e-300) || k < 3.0 {
            sum += term / (2.0 * k + 1.0);
            k += 1.0;
            term *= -x * x / k;
            if k > 400.0 {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }
    let cdf = |t: f64| 0.5 * (1.0 + erf(t / 2f64.sqrt()));
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let sd = (1.0 - rho * rho).sqrt();
    // composite midpoint rule with many panels; the integrand is smooth on [-z, z]
    let m = 20_000;
    let h = 2.0 * z / m as f64;
    (0..m)
        .map(|i| {
            let w = -z + (i as f64 + 0.5) * h;
            pdf(w) * (cdf((z - rho * w) / sd) - cdf((-z - rho * w) / sd)) * h
        })
        .sum()
}

#[test]
fn validate_identity_and_block_family() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "i3.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let (code, v) = run(&["validate", s(&p)]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["valid"], true);
    assert_eq!(f(&v["results"]["min_eigenvalue"]), 1.0);
    let (code, v) = run(&["validate", "--family", "block4", "--tau", "1"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["valid"], true);
}

#[test]
fn validation_errors_name_the_location() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "a.csv", "1,0.5\n0.5001,1\n");
    let (code, v) = run(&["validate", s(&p)]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "asymmetric");
    assert_eq!((v["error"]["row"].as_u64(), v["error"]["col"].as_u64()), (Some(1), Some(2)));
    assert_eq!(v["results"]["symmetric"], false);

    let p = write(d.path(), "b.csv", "1,0.5\n0.5,zz\n");
    let (code, v) = run(&["validate", s(&p)]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "parse");
    assert_eq!((v["error"]["line"].as_u64(), v["error"]["col"].as_u64()), (Some(2), Some(2)));

    let p = write(d.path(), "c.json", r#"{"n": 2, "entries": [1, 0.5, 0.5]}"#);
    assert_eq!(run(&["validate", s(&p)]).0, 2);

    let (code, v) = run(&["cdf", "/nonexistent/m.csv", "--alpha", "1", "--x", "1"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "io");
}

#[test]
fn json_and_csv_inputs_share_a_digest() {
    let d = tempfile::tempdir().unwrap();
    let a = write(d.path(), "m.csv", "1,0.3\n0.3,1\n");
    let b = write(d.path(), "m.json", r#"{"n": 2, "entries": [1, 0.3, 0.3, 1], "labels": ["u", "v"]}"#);
    let (_, va) = run(&["validate", s(&a)]);
    let (_, vb) = run(&["validate", s(&b)]);
    assert!(va["input_digest"].as_str().unwrap().starts_with("sha256:"));
    assert_eq!(va["input_digest"], vb["input_digest"]);
}

#[test]
fn cdf_of_independent_exponentials() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "i3.csv", "1,0,0\n0,1,0\n0,0,1\n");
    let (code, v) = run(&["cdf", s(&p), "--alpha", "1", "--x", "1,1,1", "--method", "series"]);
    assert_eq!(code, 0);
    let want = (1.0 - (-1f64).exp()).powi(3);
    let r = &v["results"];
    assert!((f(&r["value"]) - want).abs() < 1e-12);
    let (lo, hi) = (f(&r["bracket"][0]), f(&r["bracket"][1]));
    assert!(lo <= want + 1e-15 && want <= hi + 1e-15);
    assert!(r["max_degree"].is_u64() && r["tail_mass"].is_f64());
}

#[test]
fn bivariate_cdf_matches_normal_rectangle() {
    let d = tempfile::tempdir().unwrap();
    let p = write(d.path(), "b.csv", "1,0.5\n0.5,1\n");
    let want = bvn_rectangle(1.0, 0.5);
    for method in ["series", "series-q", "one-factorial"] {
        let (code, v) = run(&["cdf", s(&p), "--alpha", "0.5", "--x", "0.5,0.5", "--method", method]);
        assert_eq!(code, 0, "{method}");
        let got = f(&v["results"]["value"]);
        assert!((got - want).abs() < 1e-6, "{method}: {got} vs {want}");
    }
}

#[test]
fn series_and_mixture_agree_on_the_block_family() {
    let args = ["cdf", "--family", "block4", "--alpha", "1", "--x", "1.2,0.9,1.1,1.0"];
    let (code, series) = run(&[&args[..], &["--tol", "1e-8"]].concat());
    assert_eq!(code, 0);
    let (code, mc) = run(&[&args[..], &["--method", "mixture-mc", "--samples", "200000", "--seed", "11"]].concat());
    assert_eq!(code, 0);
    assert_eq!(mc["seed"], 11);
    let (a, b, se) = (f(&series["results"]["value"]), f(&mc["results"]["value"]), f(&mc["results"]["std_error"]));
    assert!(se > 0.0 && (a - b).abs() < 3.0 * se, "{a} vs {b} ± {se}");
}

#[test]
fn one_factorial_precondition_failure() {
    let (code, v) = run(&["cdf", "--family", "block4", "--alpha", "1", "--x", "1", "--method", "one-factorial"]);
    assert_eq!(code, 2);
    assert!(v["error"]["message"].as_str().unwrap().contains("one-factorial"));
}

#[test]
fn unconverged_series_exit() {
    let (code, v) = run(&["cdf", "--family", "block4", "--alpha", "0.5", "--x", "1", "--max-degree", "3", "--tol", "1e-14"]);
    assert_eq!(code, 5, "{v}");
    assert_eq!(v["results"]["converged"], false);
    assert_eq!(v["status"], "unconverged");
}

#[test]
fn x_length_mismatch_is_usage_error() {
    let (code, v) = run(&["cdf", "--family", "block4", "--alpha", "1", "--x", "1,2"]);
    assert_eq!(code, 2);
    assert_eq!(v["error"]["kind"], "usage");
}

#[test]
fn infdiv_examples() {
    let (code, v) = run(&["infdiv", "--family", "block4", "--tau", "1"]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["verdict"], true);
    let (_, v) = run(&["infdiv", "--family", "block4", "--tau", "0.5", "--criteria", "griffiths"]);
    assert_eq!(v["results"]["verdict"], false);
    let w: Vec<u64> = v["results"]["griffiths_witness_one_based"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
    assert!(w.len() >= 3 && w.iter().all(|&i| (1..=4).contains(&i)));

    let d = tempfile::tempdir().unwrap();
    let i5: String = (0..5).map(|i| (0..5).map(|j| if i == j { "1" } else { "0" }).collect::<Vec<_>>().join(",") + "\n").collect();
    let p = write(d.path(), "i5.csv", &i5);
    let (_, v) = run(&["infdiv", s(&p), "--criteria", "bapat"]);
    assert_eq!(v["results"]["verdict"], true);
    let sig: Vec<f64> = v["results"]["bapat_signature"].as_array().unwrap().iter().map(f).collect();
    assert_eq!(sig, vec![1.0; 5]);
}

#[test]
fn verify_block_theorem_passes_and_dumps_curve() {
    let d = tempfile::tempdir().unwrap();
    let dump = d.path().join("curve.dat");
    let (code, v) = run(&[
        "verify", "--theorem", "1", "--family", "block4", "--partition", "2", "--alpha", "0.5", "--x", "1",
        "--tau-grid", "0,0.25,0.5,0.75,1", "--identity-points", "0.5", "--dump-curve", s(&dump),
    ]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["results"]["status"], "pass");
    let text = std::fs::read_to_string(&dump).unwrap();
    let (head, body): (Vec<&str>, Vec<&str>) = text.lines().partition(|l| l.starts_with('#'));
    assert!(!head.is_empty());
    assert_eq!(body.len(), 5);
    let mut prev = f64::NEG_INFINITY;
    for l in body {
        let cols: Vec<f64> = l.split(' ').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
        assert!(cols[1] >= prev);
        prev = cols[1];
    }
}

#[test]
fn verify_scaling_theorem_passes() {
    let (code, v) = run(&[
        "verify", "--theorem", "2", "--family", "block4", "--alpha", "0.5", "--x", "1",
        "--tau-grid", "0,0.5,1", "--no-derivative",
    ]);
    assert_eq!(code, 0, "{v}");
    assert!(v["results"]["curves"].as_array().unwrap().iter().all(|c| c["monotone"] == true));
}

#[test]
fn verify_negative_r0_is_hypothesis_failure() {
    let d = tempfile::tempdir().unwrap();
    let r0 = write(d.path(), "r0.csv", "1,-0.1,0.2\n-0.1,1,0.2\n0.2,0.2,1\n");
    let r = write(d.path(), "r.csv", "1,0.5,0.5\n0.5,1,0.5\n0.5,0.5,1\n");
    let (code, v) = run(&[
        "verify", "--theorem", "4", s(&r), "--r0", s(&r0), "--alpha", "1", "--x", "1", "--tau-grid", "0,1", "--no-derivative",
    ]);
    assert_eq!(code, 3, "{v}");
    assert_eq!(v["status"], "hypothesis-failure");
    assert_eq!(v["results"]["status"], "hypothesis-failure");
}

#[test]
fn verify_needs_its_inputs() {
    let (code, _) = run(&["verify", "--theorem", "1", "--family", "block4", "--alpha", "1", "--x", "1"]);
    assert_eq!(code, 2);
    let (code, _) = run(&["verify", "--theorem", "4", "--family", "block4", "--alpha", "1", "--x", "1"]);
    assert_eq!(code, 2);
}

#[test]
fn approx_examples() {
    let (code, v) = run(&["approx", "--kind", "lambda", "--alpha", "0.5", "--n", "5", "--r", "0.001", "--x", "1"]);
    assert_eq!(code, 0);
    let c = &v["results"]["coefficients"];
    assert!(f(&c["c2"]).abs() < 1e-3 * f(&c["c1"]) && f(&c["c3"]).abs() < 1e-3 * f(&c["c1"]));
    assert!((f(&c["lambda"]) - f(&c["c1"])).abs() < 1e-3 * f(&c["c1"]));

    let (code, v) = run(&["approx", "--kind", "t2", "--zero-h", "--n", "4", "--r", "0.3", "--x", "1.2", "--alpha", "1"]);
    assert_eq!(code, 0);
    let t = &v["results"]["taylor"];
    assert!((f(&t["value"]) - f(&t["base"])).abs() < 1e-8);

    let (_, n) = run(&["approx", "--kind", "normal-coeffs", "--z", "1.5", "--r", "0.4", "--n", "5"]);
    let (_, l) = run(&["approx", "--kind", "lambda", "--alpha", "0.5", "--n", "5", "--r", "0.4", "--x", "1.125"]);
    for k in ["c1", "c2", "c3", "lambda"] {
        let (a, b) = (f(&n["results"]["coefficients"][k]), f(&l["results"]["coefficients"][k]));
        assert!((a - b).abs() < 1e-6, "{k}: {a} vs {b}");
    }
}

#[test]
fn approx_block_product_from_flags_and_matrix() {
    let (code, v) = run(&[
        "approx", "--kind", "block-product", "--alpha", "0.5", "--x", "4", "--n1", "2", "--n2", "2",
        "--rbar1", "0.3", "--rbar2", "0.35", "--rbar-sq", "0.1",
    ]);
    assert_eq!(code, 0);
    let a = &v["results"]["approximation"];
    assert!(f(&a["value"]) > f(&a["head"]) && f(&a["value"]) < 1.0);
    let (code, v) = run(&["approx", "--kind", "block-product", "--family", "block4", "--partition", "2", "--x", "4"]);
    assert_eq!(code, 0, "{v}");
    assert!(v["input_digest"].is_string());
    let (code, _) = run(&["approx", "--kind", "block-product", "--x", "4"]);
    assert_eq!(code, 2);
}

#[test]
fn integrand_dump_format() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("g.dat");
    let (code, _) = run(&[
        "approx", "--kind", "lambda", "--alpha", "0.5", "--n", "4", "--r", "0.3", "--x", "1", "--dump-integrand", s(&p),
        "--y-max", "20", "--points", "50",
    ]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&p).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(' ').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 50);
    assert!(rows.iter().all(|r| r.len() == 2));
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0]));
    assert!(text.starts_with('#'));
}

#[test]
fn decompose_examples() {
    let d = tempfile::tempdir().unwrap();
    let e = write(d.path(), "e.csv", "1,0.4,0.4\n0.4,1,0.4\n0.4,0.4,1\n");
    let (_, v) = run(&["decompose", s(&e)]);
    assert_eq!(v["results"]["kind"], "one-factorial");
    for a in v["results"]["one_factorial"].as_array().unwrap() {
        assert!((f(a) - 0.4f64.sqrt()).abs() < 1e-12);
    }
    let m = write(
        d.path(),
        "g.csv",
        "1,0.3,-0.2,0.1,0.25\n0.3,1,0.15,-0.1,0.2\n-0.2,0.15,1,0.3,-0.05\n0.1,-0.1,0.3,1,0.2\n0.25,0.2,-0.05,0.2,1\n",
    );
    let (code, v) = run(&["decompose", s(&m)]);
    assert_eq!(code, 0);
    assert_eq!(v["results"]["kind"], "generic");
    assert!(f(&v["results"]["reconstruction_error"]) < 1e-10);
    let i4 = write(d.path(), "i4.csv", "1,0,0,0\n0,1,0,0\n0,0,1,0\n0,0,0,1\n");
    let (_, v) = run(&["decompose", s(&i4)]);
    assert_eq!(v["results"]["kind"], "independent");
    assert_eq!(v["results"]["m"], 0);
}

#[test]
fn results_are_reproducible() {
    let args = ["cdf", "--family", "block4", "--alpha", "1", "--x", "1", "--method", "mixture-mc", "--samples", "20000", "--seed", "3"];
    let (_, a) = run(&args);
    let (_, b) = run(&args);
    assert_eq!(a["results"].to_string(), b["results"].to_string());
    let (_, c) = run(&[&args[..12], &["4"]].concat());
    assert_ne!(a["results"]["value"], c["results"]["value"]);
}

#[test]
fn output_file_and_pretty_view() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("r.json");
    let out = bin().args(["validate", "--family", "block4", "--pretty", "--output", s(&p)]).output().unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.lines().count() > 5);
    let v: Value = serde_json::from_str(&text).unwrap();
    for k in ["command", "argv", "input_digest", "versions", "results", "wall_time_s", "threads"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

#[test]
fn thread_cap_from_environment() {
    let out = bin().env("MVGAMMA_THREADS", "2").args(["validate", "--family", "block4"]).output().unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["threads"], 2);
    let out = bin().env("MVGAMMA_THREADS", "zero").args(["validate", "--family", "block4"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
