use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn nclb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nclb")).args(args).env_remove("NCLB_SEED").output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn check_names(v: &Value) -> Vec<String> {
    v["checks"].as_array().unwrap().iter().map(|c| c["check"].as_str().unwrap().to_string()).collect()
}

#[test]
fn verify_heisenberg_json() {
    let o = nclb(&["model", "verify", "heisenberg", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["overall"], "pass");
    assert_eq!(check_names(&v), ["jacobi", "frames", "lambda-rep", "lift", "reduced-first-order", "casimir"]);
    assert_eq!(v["seed"], 0xC0FFEE);
    for c in v["checks"].as_array().unwrap() {
        assert_eq!(c["status"], "pass", "{c}");
        for k in ["max_residual", "samples_used", "seed", "skipped_samples"] {
            assert!(c.get(k).is_some(), "{k}");
        }
    }
}

#[test]
fn verify_g47_table() {
    let o = nclb(&["model", "verify", "g4_7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    for name in ["rectification", "reduced-symmetry", "overall: pass"] {
        assert!(out.contains(name), "{out}");
    }
}

#[test]
fn index_prints_values() {
    let o = nclb(&["index", &fixture("g47.json")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("index = 0"), "{}", stdout(&o));
    let v = json(&nclb(&["index", &fixture("g47.json"), "--json"]));
    assert_eq!(v["checks"][0]["metrics"]["index"], 0);
    assert_eq!(v["checks"][0]["metrics"]["frobenius"], true);
    let v = json(&nclb(&["index", &fixture("h3.json"), "--trials", "8", "--json"]));
    assert_eq!(v["checks"][0]["metrics"]["index"], 1);
}

#[test]
fn coisotropic_null_center() {
    let o = nclb(&["coisotropic", &fixture("h3.json"), "--form", &fixture("h3_null_center.json"), "--ideal", "1,3", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["checks"][0]["metrics"]["verdict"], true);
    assert_eq!(v["checks"][0]["metrics"]["block_zero"], true);
    assert!(v["parameters"].get("alpha").is_none());
}

#[test]
fn coisotropic_forms_with_placeholders() {
    for g in 1..=5 {
        let form = fixture(&format!("g47_G{g}.json"));
        let o = nclb(&["coisotropic", &fixture("g47.json"), "--form", &form, "--ideal", "1,2", "--alpha", "2", "--beta", "-1/3", "--json"]);
        assert_eq!(code(&o), 0, "G{g}: {}", stderr(&o));
        assert_eq!(json(&o)["checks"][0]["metrics"]["verdict"], true, "G{g}");
    }
    let o = nclb(&["coisotropic", &fixture("g47.json"), "--form", &fixture("g47_G1.json"), "--ideal", "1,2", "--json"]);
    assert_eq!(json(&o)["parameters"]["alpha"], "1");
    let o = nclb(&["coisotropic", &fixture("g47.json"), "--form", &fixture("g47_G1.json"), "--ideal", "1,2", "--alpha", "0", "--beta", "0"]);
    assert_eq!(code(&o), 2, "degenerate form is an input error");
}

#[test]
fn reduce_reports_first_order_data() {
    let o = nclb(&["model", "reduce", "g4_7", "--J", "-1", "--E", "1/2", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    let m = &v["checks"][0]["metrics"];
    assert_eq!(m["second_order_symbolic_zero"], true);
    assert_eq!(m["Z"].as_array().unwrap().len(), 2);
    assert!(!m["V"].as_str().unwrap().contains('J'));
    assert_eq!(v["parameters"]["J"], "-1");
    let o = nclb(&["model", "reduce", "heisenberg", "--json"]);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["checks"][0]["metrics"]["V"].as_str().unwrap().contains('J'));
}

#[test]
fn residual_of_modes() {
    let o = nclb(&["model", "residual", "heisenberg", "--psi", "mode", "--mu", "1/2", "--nu", "1", "--E", "1", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(check_names(&v), ["pde-residual", "fd-crosscheck"]);
    assert!(v["checks"][0]["max_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(v["checks"][0]["samples_used"], 125);
    let o = nclb(&["model", "residual", "g4_7", "--psi", "mode", "--J", "1", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(check_names(&json(&o)), ["reduced-residual(J=1)"]);
}

/// Rows of `f` on the grid `{-1, -1 + h, ..., 1}^3`.
fn csv_grid(n: usize, f: impl Fn(f64, f64, f64) -> (f64, f64)) -> String {
    let mut s = String::from("x1,x2,x3,re,im\n");
    let node = |k: usize| -1.0 + 2.0 * k as f64 / (n - 1) as f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let (x1, x2, x3) = (node(a), node(b), node(c));
                let (re, im) = f(x1, x2, x3);
                s.push_str(&format!("{x1},{x2},{x3},{re},{im}\n"));
            }
        }
    }
    s
}

#[test]
fn residual_of_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.csv", &csv_grid(7, |x1, _, x3| (x1 * x3, x1)));
    let bad = write(dir.path(), "bad.csv", &csv_grid(7, |_, _, x3| (x3 * x3, 0.0)));
    let o = nclb(&["model", "residual", "heisenberg", "--psi", &good, "--E", "0", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["checks"][0]["samples_used"], 27);
    let o = nclb(&["model", "residual", "heisenberg", "--psi", &bad, "--E", "0"]);
    assert_eq!(code(&o), 1);
    let o = nclb(&["model", "residual", "heisenberg", "--psi", &good]);
    assert_eq!(code(&o), 2, "E is required for files");

    let expr = write(dir.path(), "psi.txt", "x1*x3 + I*x1\n");
    let o = nclb(&["model", "residual", "heisenberg", "--psi", &expr, "--E", "0", "--grid", "3:-1:1", "--json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(json(&o)["checks"][0]["max_residual"], 0.0);
    let expr = write(dir.path(), "bad.txt", "x3^2");
    assert_eq!(code(&nclb(&["model", "residual", "heisenberg", "--psi", &expr, "--E", "0"])), 1);
    let ragged = write(dir.path(), "ragged.csv", "x1,x2,x3,re,im\n0,0,0,1\n");
    let o = nclb(&["model", "residual", "heisenberg", "--psi", &ragged, "--E", "0"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

fn bump_csv(n: usize, half: f64, w: f64) -> String {
    let mut s = String::from("k,J,re,im\n");
    for a in 0..n {
        for b in 0..n {
            let k = -half + 2.0 * half * a as f64 / (n - 1) as f64;
            let j = 1.0 - half + 2.0 * half * b as f64 / (n - 1) as f64;
            let v = (-(k * k + (j - 1.0) * (j - 1.0)) / (2.0 * w * w)).exp();
            s.push_str(&format!("{k},{j},{v},0\n"));
        }
    }
    s
}

#[test]
fn reconstruct_from_sampled_data() {
    let dir = tempfile::tempdir().unwrap();
    let phi = write(dir.path(), "phi.csv", &bump_csv(19, 0.9, 0.2));
    let out = dir.path().join("psi.csv");
    let o = nclb(&[
        "model", "reconstruct", "heisenberg", "--phi", &phi, "--E", "1", "--grid", "3:-1:1", "--out",
        out.to_str().unwrap(), "--json",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(check_names(&v), ["inverse-transform", "pde-residual"]);
    assert!(v["checks"][1]["max_residual"].as_f64().unwrap() <= 1e-3);
    let written = fs::read_to_string(&out).unwrap();
    assert_eq!(written.lines().count(), 28);
    assert!(written.starts_with("x1,x2,x3,re,im"));

    let o = nclb(&["model", "reconstruct", "g4_7", "--phi", &phi, "--E", "1", "--grid", "3:-1:1"]);
    assert_eq!(code(&o), 2);
    let singular = write(dir.path(), "zero.csv", "k,J,re,im\n0,-1,1,0\n0,1,1,0\n1,-1,1,0\n1,1,1,0\n");
    let o = nclb(&["model", "reconstruct", "heisenberg", "--phi", &singular, "--E", "1", "--grid", "1:0:0"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("J = 0"), "{}", stderr(&o));
}

#[test]
fn unconverged_reconstruction_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let phi = write(dir.path(), "phi.csv", &bump_csv(3, 0.9, 0.2));
    let o = nclb(&["model", "reconstruct", "heisenberg", "--phi", &phi, "--E", "1", "--grid", "1:0:0", "--tol", "1e-300", "--json"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["overall"], "inconclusive");
    assert_eq!(v["checks"][0]["status"], "inconclusive");
}

#[test]
fn exit_code_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write(
        dir.path(),
        "broken.json",
        r#"{"dim": 3, "brackets": [{"i": 1, "j": 2, "c": {"3": "1"}}, {"i": 1, "j": 3, "c": {"1": "1"}}, {"i": 2, "j": 3, "c": {"2": "1"}}]}"#,
    );
    let malformed = write(dir.path(), "malformed.json", "{\n  \"dim\": 3,\n  \"brackets\": [\n    {\"i\": 1, \"j\": 2, \"c\": {\"3\": \"x\"}}\n  ]\n}");
    let truncated = write(dir.path(), "truncated.json", "{\n  \"dim\": 3,\n  \"brackets\": [\n");
    let h3 = fixture("h3.json");
    let form = fixture("h3_null_center.json");
    let cases: Vec<(Vec<&str>, i32)> = vec![
        (vec!["check-algebra", &h3], 0),
        (vec!["check-algebra", &broken], 1),
        (vec!["coisotropic", &h3, "--form", &form, "--ideal", "1,3"], 0),
        (vec!["coisotropic", &h3, "--form", &form, "--ideal", "2,3"], 1),
        (vec!["coisotropic", &h3, "--form", &form, "--ideal", "1,4"], 2),
        (vec!["coisotropic", &h3, "--form", &h3, "--ideal", "1"], 2),
        (vec!["check-algebra", &malformed], 2),
        (vec!["check-algebra", &truncated], 2),
        (vec!["check-algebra", "/nonexistent/file.json"], 2),
        (vec!["index", &h3, "--trials", "0"], 2),
        (vec!["frobnicate"], 2),
        (vec!["index", &h3, "--bogus"], 2),
        (vec![], 2),
        (vec!["model", "verify", "sl2"], 2),
        (vec!["model", "verify", "g4_7", "--alpha", "1", "--beta", "-1"], 2),
        (vec!["model", "verify", "g4_7", "--alpha", "x"], 2),
        (vec!["model", "reduce", "g4_7", "--J", "2"], 2),
        (vec!["model", "reduce", "heisenberg", "--J", "0"], 2),
        (vec!["model", "residual", "g4_7", "--psi", "/nonexistent.txt", "--E", "1"], 2),
        (vec!["--seed", "zz", "index", &h3], 2),
        (vec!["--help"], 0),
        (vec!["--version"], 0),
    ];
    for (args, want) in cases {
        let o = nclb(&args);
        assert_eq!(code(&o), want, "{args:?}\nstdout: {}\nstderr: {}", stdout(&o), stderr(&o));
    }
    let o = nclb(&["check-algebra", &malformed]);
    assert!(stderr(&o).contains("brackets[0].c[3]"), "{}", stderr(&o));
    let o = nclb(&["check-algebra", &truncated]);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
    let o = nclb(&["frobnicate"]);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn byte_identical_reports() {
    for args in [
        vec!["model", "verify", "g4_7", "--json"],
        vec!["index", "--json", "--seed", "17"],
        vec!["model", "residual", "heisenberg", "--psi", "mode", "--json"],
    ] {
        let mut args: Vec<String> = args.into_iter().map(String::from).collect();
        if args[0] == "index" {
            args.insert(1, fixture("g47.json"));
        }
        let a: Vec<&str> = args.iter().map(String::as_str).collect();
        let (x, y) = (nclb(&a), nclb(&a));
        assert_eq!(code(&x), 0);
        assert_eq!(x.stdout, y.stdout, "{a:?}");
    }
}

#[test]
fn seed_sources() {
    let h3 = fixture("h3.json");
    let run = |env: Option<&str>, flag: Option<&str>| -> Value {
        let mut c = Command::new(env!("CARGO_BIN_EXE_nclb"));
        c.env_remove("NCLB_SEED").args(["index", &h3, "--json"]);
        if let Some(e) = env {
            c.env("NCLB_SEED", e);
        }
        if let Some(f) = flag {
            c.args(["--seed", f]);
        }
        serde_json::from_slice(&c.output().unwrap().stdout).unwrap()
    };
    assert_eq!(run(None, None)["seed"], 0xC0FFEE);
    assert_eq!(run(Some("42"), None)["seed"], 42);
    assert_eq!(run(Some("42"), Some("0x10"))["seed"], 16);
    assert_eq!(run(None, Some("7"))["checks"][0]["seed"], 7);
}
