use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_besselbridge"));
    cmd.current_dir(dir).env("BESSELBRIDGE_THREADS", "1").args(args);
    if let Some(text) = config {
        let path = dir.join("run.toml");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-mu"], Some("seed = 1\ncolour = \"red\"\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
    let o = run(dir.path(), &["verify-mu"], Some("[verify_mu]\nalpha = [0.5]\n"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mu_defaults_meet_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-mu", "--out", "res"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("res"), "mu.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "check,function,alpha,param,value,expected,residual,status,reason");
    assert!(lines.all(|l| l.contains(",pass,")));
}

#[test]
fn empty_alpha_list_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-mu"], Some("[verify_mu]\nalphas = []\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("usage"));
}

#[test]
fn gamma_pole_rows_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["verify-mu"], Some("[verify_mu]\nalphas = [0.5]\ngamma_x = [-2.0, 0.25]\n"));
    assert!(o.status.success());
    let csv = read(&dir.path().join("out"), "mu.csv");
    assert!(csv.lines().any(|l| l.starts_with("renorm_gamma,") && l.contains("skipped") && l.contains("pole")));
}

#[test]
fn ibpf_grid_and_bad_h_family() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[verify_ibpf]
deltas = [2.0, 3.0]
functionals = [{ id = "atom", terms = [{ coefficient = 1.0, measure = { atoms = [[0.5, 1.0]] } }] }]
h = [{ id = "p", family = "poly", params = [1.0, 0.5] }]
"#;
    let o = run(dir.path(), &["verify-ibpf"], Some(cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("out"), "ibpf.csv");
    assert!(csv.starts_with("delta,phi_id,h_id,route,value,se_or_tol,residual_vs_lhs_closed\n"));
    let delta2: Vec<&str> = csv.lines().filter(|l| l.starts_with("2.0")).collect();
    assert!(delta2.iter().any(|l| l.contains(",rhs_quadrature,")));
    assert!(!delta2.iter().any(|l| l.contains(",rhs_unified,")));
    assert!(csv.lines().any(|l| l.starts_with("3.0") && l.contains(",rhs_special,")));

    let bad = cfg.replace("\"poly\"", "\"gaussian\"");
    let o = run(dir.path(), &["verify-ibpf"], Some(&bad));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gaussian"));
    let bad = cfg.replace("[[0.5, 1.0]]", "[[1.5, 1.0]]");
    assert_eq!(run(dir.path(), &["verify-ibpf"], Some(&bad)).status.code(), Some(2));
}

const SMALL_SAMPLE: &str = r#"
[sample]
paths = 5
grid_points = 8
ks_deltas = [1.0]
ks_paths = 2000
additivity = [[1.0, 1.0]]
expectation_paths = 2000
expectation_grid = 16
expectations = [{ delta = 1.0, functional = { id = "atom_half", builtin = "atom_half" } }]
"#;

#[test]
fn sample_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), &["sample", "--seed", "11", "--out", "a"], Some(SMALL_SAMPLE));
    assert!(a.status.success(), "{}", stderr(&a));
    let b = run(dir.path(), &["sample", "--seed", "11", "--out", "b"], Some(SMALL_SAMPLE));
    assert!(b.status.success());
    let c = run(dir.path(), &["sample", "--seed", "12", "--out", "c"], Some(SMALL_SAMPLE));
    for name in ["paths.csv", "ks.csv", "expectations.csv"] {
        assert_eq!(read(&dir.path().join("a"), name), read(&dir.path().join("b"), name));
    }
    assert!(c.status.code().is_some());
    assert_ne!(read(&dir.path().join("a"), "paths.csv"), read(&dir.path().join("c"), "paths.csv"));

    let paths = read(&dir.path().join("a"), "paths.csv");
    assert!(paths.starts_with("path_id,t,value\n"));
    assert_eq!(paths.lines().count(), 1 + 5 * 10);
    let ks = read(&dir.path().join("a"), "ks.csv");
    assert!(ks.starts_with("check,delta,r,statistic,critical_1pct,passed\n"));
    assert_eq!(ks.lines().count(), 1 + 3 + 3);
}

#[test]
fn zero_paths_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL_SAMPLE.replace("paths = 5", "paths = 0");
    let o = run(dir.path(), &["sample"], Some(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("positive"));
}

#[test]
fn spde_refuses_unstable_steps() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["spde"], Some("[spde]\nm = 31\ndt = 1e-3\nt_end = 0.1\nprobes = [0.5]\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stability"), "{}", stderr(&o));
}

#[test]
fn spde_without_drift_is_the_heat_equation() {
    let dir = tempfile::tempdir().unwrap();
    let base = "m = 15\ndt = 1e-4\nt_end = 0.2\nprobes = [0.5]\nprobe_every = 10\nsnapshot_every = 1000\nreplicas = 3\nks_tolerance = 1.0\n";
    let off = format!("[spde]\nmodel = \"bessel1\"\ndrift = false\n{base}");
    let she = format!("[spde]\nmodel = \"she\"\n{base}");
    assert!(run(dir.path(), &["spde", "--out", "off"], Some(&off)).status.success());
    assert!(run(dir.path(), &["spde", "--out", "she"], Some(&she)).status.success());
    for name in ["trajectories.csv", "diagnostics.csv"] {
        assert_eq!(read(&dir.path().join("off"), name), read(&dir.path().join("she"), name));
    }
    let diag = read(&dir.path().join("she"), "diagnostics.csv");
    assert!(diag.lines().nth(1).unwrap().contains(",normal,"));
    let traj = read(&dir.path().join("she"), "trajectories.csv");
    assert!(traj.starts_with("replica,t,x,u\n"));

    let on = format!("[spde]\nmodel = \"bessel1\"\neps = 0.2\n{base}");
    assert!(run(dir.path(), &["spde", "--out", "on"], Some(&on)).status.success());
    assert!(read(&dir.path().join("on"), "diagnostics.csv").contains(",folded_normal,"));
}

#[test]
fn distinction_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["distinction"], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = read(&dir.path().join("out"), "distinction.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "k_id,h_id,J,L,gap");
    let gap = |id: &str| -> f64 {
        let line = csv.lines().find(|l| l.starts_with(id)).unwrap();
        line.rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!(gap("sin,").abs() >= 1e-3);
    assert!(gap("zero,").abs() <= 1e-10);

    let malformed = "[distinction]\nk = [{ id = \"s\", family = \"sine\" }]\n";
    let o = run(dir.path(), &["distinction"], Some(malformed));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("needs n"));
    let unknown = "[distinction]\nk = [{ id = \"s\", family = \"cosine\", n = 1 }]\n";
    assert_eq!(run(dir.path(), &["distinction"], Some(unknown)).status.code(), Some(2));
}

#[test]
fn unmet_tolerance_gives_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[distinction]\nk = [{ id = \"sin\", family = \"sine\", n = 1, min_gap = 1.0 }]\n";
    let o = run(dir.path(), &["distinction"], Some(cfg));
    assert_eq!(o.status.code(), Some(1));
    assert!(dir.path().join("out/distinction.csv").exists());
}
