mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

fn gelfand(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_gelfand"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn sweep_on_the_interval() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = gelfand(&["sweep", "--domain", "interval", "--resolution", "801"], d.path());
    assert_eq!(code, 0, "{err}");
    let b = json(&d.path().join("branch.json"));
    let est = b["lambda_star_estimate"].as_f64().unwrap();
    assert!((3.5128..=3.5148).contains(&est), "{est}");
    assert_eq!(b["schema_version"], "1");
    assert_eq!(b["termination_reason"], "fold");
    let csv = fs::read_to_string(d.path().join("branch.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "index,lambda,max_phi,mu1,residual_norm,newton_iterations");
    assert!(d.path().join("run_meta.txt").exists());
}

#[test]
fn convexity_on_the_disk() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = gelfand(&["convexity", "--domain", "ball", "--dim", "2", "--lambda", "0.1"], d.path());
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("convexity.json"));
    assert!(r["reports"][0]["c1_estimate"].as_f64().unwrap() > 0.0);
    let csv = fs::read_to_string(d.path().join("hessian_field_0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "node_index,x,class,value");
}

#[test]
fn flow_above_the_fold_is_not_an_error() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = gelfand(&["flow", "--lambda", "5"], d.path());
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("flow.json"));
    assert_eq!(r["runs"][0]["converged"], false);
    assert!(r["runs"][0]["blow_up"]["max_u"].as_f64().unwrap() >= 50.0);
    let ts = fs::read_to_string(d.path().join("timeseries_0.csv")).unwrap();
    assert_eq!(ts.lines().next().unwrap(), "step,t,max_u,lyapunov,min_hessian_eig_w,steady_residual");
}

#[test]
fn violated_claim_exits_2() {
    // A loose steady tolerance stops the flow far from the Newton solution.
    let d = tempfile::tempdir().unwrap();
    let (code, err) = gelfand(&["flow", "--lambda", "1", "--steady-tol", "1"], d.path());
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("flow_newton_agreement"), "{err}");
    let c = json(&d.path().join("claims.json"));
    assert!(c["claims"].as_array().unwrap().iter().any(|c| c["holds"] == false));
}

#[test]
fn operational_errors_exit_1() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = gelfand(&["solve", "--lambda", "5"], d.path());
    assert_eq!(code, 1);
    assert!(err.contains("steady:"), "{err}");
    let (code, err) = gelfand(&["sweep", "--domain", "ellipse", "--a", "1", "--b", "2"], d.path());
    assert_eq!(code, 1);
    assert!(err.contains("require a ≥ b"), "{err}");
    let cfg = d.path().join("bad.toml");
    fs::write(&cfg, "[tolerances]\nnewton_tol = 0\n").unwrap();
    let (code, err) = gelfand(&["sweep", "--config", cfg.to_str().unwrap()], d.path());
    assert_eq!(code, 1);
    assert!(err.contains("newton_tol must be > 0"), "{err}");
    let (code, _) = gelfand(&["sweep", "--bogus"], d.path());
    assert_eq!(code, 1);
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["all", "--domain", "ball", "--dim", "2", "--resolution", "201"];
    assert_eq!(gelfand(&args, a.path()).0, 0);
    assert_eq!(gelfand(&args, b.path()).0, 0);
    let mut n = 0;
    for e in fs::read_dir(a.path()).unwrap() {
        let name = e.unwrap().file_name();
        if name == "run_meta.txt" {
            continue;
        }
        let x = fs::read(a.path().join(&name)).unwrap();
        let y = fs::read(b.path().join(&name)).unwrap();
        assert!(x == y, "{name:?} differs");
        n += 1;
    }
    assert!(n >= 15, "{n} artifacts");
}

#[test]
fn barriers_on_a_ball() {
    let d = tempfile::tempdir().unwrap();
    let (code, err) = gelfand(&["barriers", "--domain", "ball", "--dim", "3", "--resolution", "401"], d.path());
    assert_eq!(code, 0, "{err}");
    let r = json(&d.path().join("barriers.json"));
    let lb = r["lambda_bar"]["lambda_bar"].as_f64().unwrap();
    assert!(lb > 0.0 && lb <= r["lambda_star_estimate"].as_f64().unwrap());
    assert_eq!(r["g_samples"].as_array().unwrap().len(), 5);
    for rep in r["reports"].as_array().unwrap() {
        assert_eq!(rep["phi_nu_bounds_ok"], true);
        assert!(rep["M"].as_f64().unwrap() > 0.0);
    }
    assert!(d.path().join("barrier_violation_2.csv").exists());
}
