//! Acceptance suite: every release-gating criterion as one test, each
//! printing a single PASS/FAIL line (visible with `--nocapture`). Seeds and
//! tolerances are pinned here; nothing is calibrated at run time.
//!
//! Run with `cargo test -p fep-cli --test acceptance` (add
//! `-- --nocapture --test-threads=1` for ordered live output).

use fep_cli::checks::{self, Check};

fn gate(c: Check) {
    c.print();
    assert!(c.pass, "{} failed: {}", c.name, c.detail);
}

#[test]
fn criterion_01_exact_stationary_oracle() {
    gate(checks::check_exact_stationary_field());
}

#[test]
fn criterion_02_equilibrium_identity() {
    gate(checks::check_equilibrium_identity());
}

#[test]
fn criterion_03_quasi_reversibility_rate() {
    // the scan route is validated against the exact_prob route first
    gate(checks::check_defect_routes_agree());
    gate(checks::check_quasi_reversibility_rate());
}

#[test]
fn criterion_04_reference_density_law() {
    gate(checks::check_reference_density_law());
}

#[test]
fn criteria_05_06_hydro_dirichlet_and_boundary_pinning() {
    let conv = checks::run_hydro_convergence(&[128, 256, 512], 16, 6, 420);
    gate(checks::check_hydro_convergence(&conv));
    gate(checks::check_boundary_pinning(&conv));
}

#[test]
fn criterion_07_robin_neumann_stationary_profiles() {
    gate(checks::check_pde_stationary_profiles());
    gate(checks::check_simulation_stationary_profiles(256, 808));
}

#[test]
fn criterion_08_stationary_density_figure() {
    gate(checks::check_fig3(515));
}

#[test]
fn criterion_09_deterministic_paths() {
    gate(checks::check_path_replays(1000, 2024));
}

#[test]
fn criterion_10_measure_sanity() {
    gate(checks::check_measure_sanity(1_000_000, 99));
}

#[test]
fn criterion_11_correlation_decay() {
    gate(checks::check_correlation_decay(77));
}
