use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn redimlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redimlab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("REDIMLAB_OUT")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn gql_on_mm_writes_split_and_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let o = redimlab(&["gql"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let record: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("gql.json")).unwrap()).unwrap();
    assert_eq!(record["m_f"], 1);
    assert_eq!(record["m_s"], 2);
    assert!(record["epsilon"].as_f64().unwrap() < 1.0);
    let coeffs = fs::read_to_string(dir.path().join("fast_rhs_coefficients.csv")).unwrap();
    assert!(coeffs.lines().any(|l| l.starts_with("U^2,")));
    assert!(coeffs.starts_with("# code_version:"));
}

#[test]
fn gql_linear_test_reports_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let o = redimlab(&["gql", "--model", "linear-test"], dir.path());
    assert_eq!(code(&o), 0);
    let record: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("gql.json")).unwrap()).unwrap();
    assert!((record["epsilon"].as_f64().unwrap() - 0.01).abs() < 1e-14);
}

#[test]
fn identity_matrix_exits_with_gap_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = redimlab(&["gql", "--model", "linear-test", "--linear-matrix", "1,0,0;0,1,0;0,0,1"], dir.path());
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gap report"), "{err}");
    assert!(err.contains("no spectral gap"), "{err}");
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&redimlab(&["gql", "--model", "linear-test", "--linear-matrix", "1,2;3"], dir.path())), 2);
    assert_eq!(code(&redimlab(&["residuals", "--order", "3"], dir.path())), 2);
    assert_eq!(code(&redimlab(&["simulate", "--dt", "-1"], dir.path())), 2);
    assert_eq!(code(&redimlab(&["simulate", "--model", "linear-test"], dir.path())), 2);
    assert_eq!(code(&redimlab(&["--bogus"], dir.path())), 2);
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "model = \"nope\"\n").unwrap();
    assert_eq!(code(&redimlab(&["gql", "--config", cfg.to_str().unwrap()], dir.path())), 2);
}

#[test]
fn non_convergence_keeps_flagged_data() {
    let dir = tempfile::tempdir().unwrap();
    let o = redimlab(&["simulate", "--tmax", "0.01", "--grid", "49"], dir.path());
    assert_eq!(code(&o), 1);
    let text = fs::read_to_string(dir.path().join("profile_far.csv")).unwrap();
    assert!(text.contains("# converged: false"));
}

#[test]
fn heat_test_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = redimlab(&["simulate", "--model", "heat-test"], dir.path());
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(dir.path().join("profile_heat.csv")).unwrap();
    let worst = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse::<f64>().unwrap())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}

#[test]
fn near_residuals_below_far() {
    let dir = tempfile::tempdir().unwrap();
    let max_h0 = |s: &str| {
        let o = redimlab(&["residuals", "--scenario", s, "--order", "1", "--grid", "99"], dir.path());
        assert_eq!(code(&o), 0);
        let text = fs::read_to_string(dir.path().join(format!("residuals_{s}_order1.csv"))).unwrap();
        assert!(text.lines().any(|l| l == "x,H0,H1,turning_flag"));
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap())
            .fold(0.0, f64::max)
    };
    assert!(max_h0("near") < max_h0("far"));
}

#[test]
fn validate_passes_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(code(&redimlab(&["validate", "--seed", "3"], a.path())), 0);
    assert_eq!(code(&redimlab(&["validate", "--seed", "3"], b.path())), 0);
    let fa = read_dir_sorted(a.path());
    assert!(fa.iter().any(|(n, _)| n == "summary.json"));
    assert_eq!(fa, read_dir_sorted(b.path()));
}

#[test]
fn corrupted_transform_fails_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let o = redimlab(&["validate", "--corrupt-transform"], dir.path());
    assert_eq!(code(&o), 1);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("A2.roundtrip,") && l.contains(",fail,")));
}

#[test]
fn sweep_writes_per_run_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = redimlab(&["sweep", "--epsilons", "0.1,0.05", "--grid", "49", "--workers", "3"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(dir.path().join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().filter(|l| !l.starts_with('#')).count(), 5);
    assert!(dir.path().join("run1/residuals_near_order1.csv").exists());
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("env-out");
    let o = Command::new(env!("CARGO_BIN_EXE_redimlab"))
        .args(["gql", "--model", "linear-test"])
        .env("REDIMLAB_OUT", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("gql.json").exists());
}
