use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid]
resolution = 64

[sampler]
n = [8, 16]
sweeps = 400
burn_in = 100

[exact]
n = [64]
draws = 100
profile_points = 201
"#;

fn cgas(dir: &Path, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    if !cfg.exists() {
        std::fs::write(&cfg, SMALL).unwrap();
    }
    Command::new(env!("CARGO_BIN_EXE_cgas"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let o = cgas(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn header(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

fn checksums(dir: &Path) -> BTreeMap<String, String> {
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap();
    m["artifacts"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, v)| (k.clone(), v["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn analyze_without_samples_fails_with_a_hint() {
    let dir = tempfile::tempdir().unwrap();
    let o = cgas(dir.path(), &["analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cgas equilibrium"));
    ok(dir.path(), &["equilibrium"]);
    let o = cgas(dir.path(), &["analyze"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sample_meta.json") && err.contains("cgas sample"), "{err}");
}

#[test]
fn reruns_reproduce_every_artifact() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        for s in ["equilibrium", "sample", "exact"] {
            ok(d, &["--seed", "5", s]);
        }
    }
    let (ca, cb) = (checksums(a.path()), checksums(b.path()));
    assert!(ca.contains_key("chain_n16_c1.cgas") && ca.contains_key("gumbel.csv"));
    assert_eq!(ca, cb);
    ok(b.path(), &["--seed", "6", "sample"]);
    assert_ne!(checksums(b.path())["chain_n8_c0.csv"], ca["chain_n8_c0.csv"]);
}

#[test]
fn tables_have_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    for s in ["equilibrium", "sample", "exact", "analyze"] {
        ok(dir.path(), &[s]);
    }
    let out = dir.path().join("out");
    assert_eq!(header(&out.join("fields.csv")), "x,y,sigma,q_check,q_eff,droplet");
    assert_eq!(header(&out.join("chain_n8_c0.csv")), "sample,d_n,energy,acceptance");
    assert_eq!(header(&out.join("gumbel.csv")), "n,draw,max_radius,d_n,omega,ks");
    assert_eq!(header(&out.join("kernel_profile.csv")), "n,r,one_point,exterior_bound");
    assert_eq!(header(&out.join("tail_report.csv")), "source,n,beta,t,threshold,p_hat,ci_lo,ci_hi,bound,pass");
    let tail = std::fs::read_to_string(out.join("tail_report.csv")).unwrap();
    assert!(tail.lines().any(|l| l.starts_with("mcmc,16,")));
    assert!(tail.lines().any(|l| l.starts_with("exact,64,")));
    for f in ["analysis_summary.json", "energy.json", "decay_fit.json", "convergence.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let rows = std::fs::read_to_string(out.join("chain_n16_c0.csv")).unwrap().lines().count();
    assert_eq!(rows, 401);
}

#[test]
fn configuration_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[sampler]\nsweeps = 10\nbogus = 1\n").unwrap();
    let o = cgas(dir.path(), &["equilibrium"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cgas"))
        .args(["--out", dir.path().to_str().unwrap(), "equilibrium"])
        .env("CGAS_GRID__RESOLUTION", "-3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.resolution"));
}

#[test]
fn verify_passes_on_ginibre() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["verify"]);
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/verify_report.json")).unwrap()).unwrap();
    let checks = rep["checks"].as_array().unwrap();
    assert!(checks.len() >= 20);
    assert!(checks.iter().filter(|c| c["hard"] == true).all(|c| c["passed"] == true));
}
