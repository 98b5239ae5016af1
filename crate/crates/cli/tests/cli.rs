use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(format!("{name}.json"))
}

fn ibvp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ibvp"))
        .args(args)
        .output()
        .unwrap()
}

fn report(cmd: &str, name: &str, extra: &[&str]) -> Value {
    let path = config(name);
    let mut args = vec![cmd, "--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = ibvp(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn entry<'a>(list: &'a Value, key: &str, name: &str) -> &'a Value {
    list.as_array()
        .unwrap()
        .iter()
        .find(|e| e[key] == name)
        .unwrap()
}

#[test]
fn reports_embed_config_hash_and_version() {
    let bytes = std::fs::read(config("zero_problem")).unwrap();
    let hash = format!("sha256:{}", hex::encode(Sha256::digest(&bytes)));
    for cmd in ["validate", "green", "solve", "certify"] {
        let r = report(cmd, "zero_problem", &[]);
        assert_eq!(r["config_hash"], hash.as_str(), "{cmd}");
        assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(r["command"], cmd);
        assert_eq!(r["config_name"], "zero_problem");
    }
}

#[test]
fn example_validate_flags_h2_and_h7() {
    let r = report("validate", "example_sec4", &[]);
    let hyps = &r["result"]["hypotheses"];
    let h2 = entry(hyps, "hypothesis", "H2");
    assert_eq!(h2["status"], "violated");
    assert!(h2["witness"]["t"].as_f64().unwrap() < std::f64::consts::LN_2);
    let h7 = entry(hyps, "hypothesis", "H7");
    assert_eq!(h7["status"], "divergent");
    assert!((h7["location"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 0.05);
    assert_eq!(r["result"]["hard_violation"], true);
}

#[test]
fn zero_problem_solves_to_zero_and_certifies_a2_only() {
    let r = report("solve", "zero_problem", &[]);
    let sol = &r["result"]["solutions"][0];
    assert_eq!(sol["norm"].as_f64(), Some(0.0));
    assert_eq!(sol["converged"], true);
    let c = report("certify", "zero_problem", &[]);
    let conds = &c["result"]["conditions"]["conditions"];
    assert_eq!(entry(conds, "condition", "A1-small")["status"], "fail");
    assert_eq!(entry(conds, "condition", "A2")["status"], "pass");
}

#[test]
fn corpus_solves_and_a2_is_finite() {
    let r = report("solve", "contraction_corpus", &[]);
    let below = r["result"]["below"].as_u64().unwrap() as usize;
    let sol = &r["result"]["solutions"][below];
    assert!(sol["residual"].as_f64().unwrap() <= 1e-6);
    assert_eq!(sol["positivity_certified"], true);
    let cert = &sol["certificate"];
    assert!(cert["ode_residual_max"].as_f64().unwrap() <= 1e-3);
    assert!(cert["boundary_left"].as_f64().unwrap().abs() <= 1e-5);
    assert!(cert["boundary_right"].as_f64().unwrap().abs() <= 1e-5);
    assert!(r["result"]["above"].is_null());
    let c = report("certify", "contraction_corpus", &[]);
    let a2 = entry(&c["result"]["conditions"]["conditions"], "condition", "A2");
    assert!(a2["lhs"].as_f64().unwrap().is_finite());
    assert_eq!(c["result"]["hypotheses"]["all_verified"], true);
}

#[test]
fn solve_csv_has_both_sides_at_impulses() {
    let path = config("constant_map");
    let out = ibvp(&[
        "solve",
        "--config",
        path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,side,x,dx,Tx,dTx,residual"));
    let at_impulse: Vec<&str> = lines
        .filter(|l| l.starts_with("1.0000000000000000e0,"))
        .collect();
    assert_eq!(at_impulse.len(), 2);
    assert!(at_impulse[0].contains(",left,") && at_impulse[1].contains(",right,"));
}

#[test]
fn green_csv_matches_closed_form() {
    let path = config("example_sec4");
    let out = ibvp(&[
        "green",
        "--config",
        path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        rows.headers().unwrap(),
        vec!["t", "s", "G", "Gt_left", "Gt_right"]
    );
    let mut n = 0;
    for row in rows.records() {
        let row = row.unwrap();
        let v: Vec<f64> = row.iter().map(|c| c.parse().unwrap()).collect();
        let (t, s) = (v[0], v[1]);
        // θ(t) = 2 − e^{−t}, φ ≡ 1, D = 1
        assert!((v[2] - (2.0 - (-t.min(s)).exp())).abs() < 1e-10, "{row:?}");
        let below = if t <= s { (-t).exp() } else { 0.0 };
        let above = if t < s { (-t).exp() } else { 0.0 };
        assert!(
            (v[3] - below).abs() < 1e-10 && (v[4] - above).abs() < 1e-10,
            "{row:?}"
        );
        n += 1;
    }
    assert_eq!(n, 81);
}

#[test]
fn tol_and_seed_flags_reach_the_report() {
    let r = report("solve", "constant_map", &["--tol", "1e-6"]);
    assert_eq!(r["result"]["solver"]["tol"].as_f64(), Some(1e-6));
    let v = report("validate", "zero_problem", &["--seed", "42"]);
    assert_eq!(v["result"]["sampling"]["seed"].as_u64(), Some(42));
}

#[test]
fn out_flag_writes_the_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.json");
    let path = config("constant_map");
    let p = path.to_str().unwrap();
    let out = ibvp(&["certify", "--config", p, "--out", file.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let direct = ibvp(&["certify", "--config", p]);
    assert_eq!(std::fs::read(&file).unwrap(), direct.stdout);
}

#[test]
fn operational_failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        "{\n  \"problem\": {\n    \"coefficients\": [1, 2]\n  }\n}\n",
    )
    .unwrap();
    let out = ibvp(&["validate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(&format!("{}:3:", bad.display())), "{err}");

    let expr = dir.path().join("expr.json");
    std::fs::write(
        &expr,
        r#"{"problem": {"coefficients": {"a1": 1, "a2": 0, "b1": 1, "b2": 1}, "p": "exp(t", "f": "0"}}"#,
    )
    .unwrap();
    let out = ibvp(&["solve", "--config", expr.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem.p"));

    let missing = ibvp(&["solve", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(missing.status.code(), Some(1));

    let path = config("zero_problem");
    let csv = ibvp(&[
        "certify",
        "--config",
        path.to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(csv.status.code(), Some(2));
}

#[test]
fn failed_conditions_still_exit_zero() {
    let out = ibvp(&[
        "certify",
        "--config",
        config("example_sec4").to_str().unwrap(),
    ]);
    assert!(out.status.success());
}

/// Key paths of a report, arrays collapsed to their first element.
fn schema(v: &Value, prefix: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(m) => {
            for (k, item) in m {
                let p = format!("{prefix}.{k}");
                out.push(p.clone());
                schema(item, &p, out);
            }
        }
        Value::Array(a) => {
            if let Some(first) = a.first() {
                schema(first, &format!("{prefix}[]"), out);
            }
        }
        _ => {}
    }
}

#[test]
fn report_layout_matches_golden() {
    let golden_dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("golden");
    for (cmd, name) in [
        ("certify", "contraction_corpus"),
        ("solve", "constant_map"),
        ("validate", "example_sec4"),
    ] {
        let mut keys = Vec::new();
        let r = report(cmd, name, &[]);
        schema(&r, "", &mut keys);
        keys.dedup();
        let actual = keys.join("\n") + "\n";
        let golden = golden_dir.join(format!("{cmd}_{name}.keys"));
        if std::env::var_os("IBVP_BLESS").is_some() {
            std::fs::create_dir_all(&golden_dir).unwrap();
            std::fs::write(&golden, &actual).unwrap();
        }
        let expected = std::fs::read_to_string(&golden)
            .unwrap_or_else(|_| panic!("missing {}", golden.display()));
        assert_eq!(actual, expected, "{cmd} {name} layout changed");
    }
}
