//! End-to-end tests of the `fep` binary: exit codes, output files, and the
//! byte-identical reproducibility contract.

use std::path::Path;
use std::process::Command;

fn fep() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fep"))
}

fn tmp_dir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("fep-cli-tests").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {path:?}: {e}"))
}

#[test]
fn usage_errors_exit_2() {
    let out = fep().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = fep().args(["hydro", "--wat", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = fep().args(["verify", "nosuchsuite"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = fep().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn subcritical_profile_is_rejected_with_scope_message() {
    let dir = tmp_dir("subcritical");
    let out = fep()
        .args(["hydro", "--init", "const:0.45", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("supercritical"), "message was: {msg}");
}

#[test]
fn hydro_emits_expected_files_and_is_byte_reproducible() {
    let args = |out: &Path| {
        vec![
            "hydro".to_string(),
            "--n".into(),
            "32".into(),
            "--replicas".into(),
            "4".into(),
            "--t".into(),
            "0.02,0.04".into(),
            "--m".into(),
            "64".into(),
            "--seed".into(),
            "9".into(),
            "--l1-tol".into(),
            "1.0".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let d1 = tmp_dir("hydro-a");
    let d2 = tmp_dir("hydro-b");
    let out1 = fep().args(args(&d1)).output().unwrap();
    assert_eq!(out1.status.code(), Some(0), "{}", String::from_utf8_lossy(&out1.stderr));
    let out2 = fep().args(args(&d2)).output().unwrap();
    assert_eq!(out2.status.code(), Some(0));
    for file in ["profile_t0.02.csv", "profile_t0.04.csv", "pde_t0.02.csv", "pde_t0.04.csv", "report.csv"]
    {
        let a = read(&d1.join(file));
        let b = read(&d2.join(file));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    // headers as documented
    assert!(read(&d1.join("profile_t0.02.csv")).starts_with("x,x_over_N,mean,stderr,weight"));
    assert!(read(&d1.join("pde_t0.02.csv")).starts_with("u,rho,a_of_rho"));
    assert!(read(&d1.join("report.csv")).starts_with("checkpoint,l1,max_z,pass"));
}

#[test]
fn stationary_small_n_passes_and_writes_table() {
    let dir = tmp_dir("stationary");
    let out = fep()
        .args(["stationary", "--n", "10", "--theta", "1", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(&dir.join("stationary.csv"));
    assert!(table.starts_with("x,abar_exact,abar_formula,residual,density"));
    assert_eq!(table.lines().count(), 10); // header + 9 sites
}

#[test]
fn verify_core_suite_passes() {
    let out = fep().args(["verify", "core"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("[PASS]"));
    assert!(!text.contains("[FAIL]"));
}

#[test]
fn pde_command_solves_and_reports() {
    let dir = tmp_dir("pde");
    let out = fep()
        .args(["pde", "--theta", "2", "--m", "50", "--t", "0.1", "--init", "const:0.7", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let table = read(&dir.join("pde_t0.1.csv"));
    assert_eq!(table.lines().count(), 52); // header + 51 nodes
}
