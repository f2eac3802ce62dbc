use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn spec(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("specs").join(name).display().to_string()
}

fn rhoconn(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_rhoconn")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn report(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = rhoconn(args);
    assert!(err.is_empty(), "{err}");
    (code, serde_json::from_str(&out).unwrap())
}

fn check<'a>(r: &'a Value, name: &str) -> &'a Value {
    r["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

fn summary(r: &Value) -> Vec<String> {
    r["summary"].as_array().unwrap().iter().map(|s| s.as_str().unwrap().to_owned()).collect()
}

#[test]
fn validate_classifies_the_fixtures() {
    let (code, r) = report(&["validate", &spec("f1.toml")]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "ok");
    assert!(summary(&r).contains(&"affine: yes, Γ_{10}=2, Γ_{11}=3".to_owned()));
    assert_eq!(check(&r, "declared_affine")["pass"], true);

    let (code, r) = report(&["validate", &spec("f2.toml")]);
    assert_eq!(code, 0);
    assert!(summary(&r).iter().any(|s| s.starts_with("affine: no (second difference")));
    assert!(!r["counterexamples"].as_array().unwrap().is_empty());
}

#[test]
fn f4_reports_the_anchor_kernel() {
    let (code, r) = report(&["validate", &spec("f4.toml")]);
    assert_eq!(code, 0);
    assert!(summary(&r).iter().any(|s| s.contains("kernel")));
}

#[test]
fn declared_but_false_properties_fail() {
    let dir = tempdir();
    let path = dir.join("lie.toml");
    std::fs::write(&path, std::fs::read_to_string(spec("f2.toml")).unwrap().replace("[curve]", "declared = [\"affine\"]\n\n[curve]")).unwrap();
    let path = path.display().to_string();
    let (code, r) = report(&["validate", &path]);
    assert_eq!((code, r["status"].as_str()), (1, Some("failed")));
    let (code, _) = report(&["checks", &path, "--suite", "affine"]);
    assert_eq!(code, 1);
    // undeclared: a negative result is a finding, not a failure
    let (code, r) = report(&["checks", &spec("f2.toml"), "--suite", "affine"]);
    assert_eq!((code, r["status"].as_str()), (0, Some("finding")));
}

#[test]
fn invalid_specs_and_bad_input() {
    let dir = tempdir();
    let path = dir.join("bad_var.toml");
    std::fs::write(&path, "base_dim = 1\nv_rank = 1\ne_dim = 1\nanchor = [[\"y1\"]]\ngamma = [[\"0\"]]\n").unwrap();
    let (code, r) = report(&["validate", &path.display().to_string()]);
    assert_eq!(code, 1);
    assert_eq!(check(&r, "spec_valid")["pass"], false);

    let (code, out, err) = rhoconn(&["validate", "no/such/file.toml"]);
    assert_eq!((code, out.as_str()), (2, ""));
    assert!(err.starts_with("error: "));

    let broken = dir.join("broken.toml");
    std::fs::write(&broken, "base_dim = 1\nv_rank = 1\ne_dim = 1\nanchor = [[\"1\"]]\ngamma = [[\"2 + * y1\"]]\n").unwrap();
    let (code, _, err) = rhoconn(&["validate", &broken.display().to_string()]);
    assert_eq!(code, 2);
    assert!(err.contains("gamma[0][0]") && err.contains("offset 4"), "{err}");

    assert_eq!(rhoconn(&["checks", &spec("f1.toml"), "--suite", "bogus"]).0, 2);
}

#[test]
fn transport_examples() {
    let (code, r) = report(&["transport", &spec("f1.toml"), "--oracle", "5/3*exp(-3*t) - 2/3"]);
    assert_eq!(code, 0);
    let last = r["outputs"]["final"]["psi"][0].as_f64().unwrap();
    assert!((last - (5.0 / 3.0 * (-3.0f64).exp() - 2.0 / 3.0)).abs() <= 1e-8);
    assert_eq!(check(&r, "oracle")["pass"], true);
    assert_eq!(check(&r, "horizontal_lift")["pass"], true);

    let (code, r) = report(&["transport", &spec("f2.toml"), "--oracle", "1/(1 + t)"]);
    assert_eq!(code, 0);
    assert_eq!(check(&r, "oracle")["pass"], true);

    let (code, r) = report(&["transport", &spec("blowup.toml")]);
    assert_eq!(code, 0);
    let t_star = r["outputs"]["t_star"].as_f64().unwrap();
    assert!((t_star - 0.5).abs() <= 0.01);
    assert!(summary(&r)[0].starts_with("blow-up detected at t* = "));

    // flags override the [curve] block
    let (_, r) = report(&["transport", &spec("f1.toml"), "--y0=-0.6666666666666666"]);
    let last = r["outputs"]["final"]["psi"][0].as_f64().unwrap();
    assert!((last + 2.0 / 3.0).abs() <= 1e-12);
}

#[test]
fn sode_examples() {
    let (code, r) = report(&["sode", &spec("f3.toml")]);
    assert_eq!(code, 0);
    assert_eq!(summary(&r), ["Γ^1_1 = -1 - 3*v1", "Γ^1_0 = -1 - v1", "verdict: affine"]);
    let (code, r) = report(&["sode", &spec("cubic.toml")]);
    assert_eq!(code, 0);
    assert_eq!(summary(&r).last().unwrap(), "verdict: non-affine");
}

#[test]
fn covderiv_on_f1() {
    let (code, r) = report(&["covderiv", &spec("f1.toml"), "--x", "0"]);
    assert_eq!(code, 0);
    assert_eq!(r["outputs"]["nabla"][0].as_f64(), Some(3.0));
    let (_, r) = report(&["covderiv", &spec("f1.toml"), "--x", "1", "--zeta", "1", "--sigma", "x1"]);
    assert_eq!(r["outputs"]["nabla"][0].as_f64(), Some(6.0));
    // covderiv needs an affine connection
    let (code, r) = report(&["covderiv", &spec("f2.toml"), "--x", "0", "--zeta", "1", "--sigma", "x1"]);
    assert_eq!(code, 1);
    assert_eq!(check(&r, "affine_gate")["pass"], false);
}

#[test]
fn check_suites_pass_on_f1() {
    for suite in ["affine", "commutation", "leibniz", "e0"] {
        let (code, r) = report(&["checks", &spec("f1.toml"), "--suite", suite, "--samples", "20"]);
        assert_eq!((code, r["status"].as_str()), (0, Some("ok")), "{suite}");
        assert_eq!(r["samples"], 20);
    }
    let (code, r) = report(&["checks", &spec("flat.toml"), "--suite", "linear"]);
    assert_eq!((code, r["status"].as_str()), (0, Some("ok")));
}

#[test]
fn reports_depend_only_on_inputs() {
    let args = ["validate", &spec("f2.toml"), "--seed", "11"];
    assert_eq!(rhoconn(&args).1, rhoconn(&args).1);
    let other = rhoconn(&["validate", &spec("f2.toml"), "--seed", "12"]).1;
    assert_ne!(rhoconn(&args).1, other);
}

fn tempdir() -> PathBuf {
    use std::sync::atomic::{AtomicUsize, Ordering};
    static N: AtomicUsize = AtomicUsize::new(0);
    let dir = std::env::temp_dir().join(format!("rhoconn-cli-{}-{}", std::process::id(), N.fetch_add(1, Ordering::Relaxed)));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
