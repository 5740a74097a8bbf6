//! The five subcommands: `hydro`, `fig3`, `stationary`, `pde`, `verify`.

use std::path::Path;

use fep_core::engine::{build_generator, stationary_active_closed_form, stationary_exact};
use fep_core::measures::MeasureSpec;
use fep_core::pde::{self, stationary_closed_form};

use crate::checks::{self, Check};
use crate::config::RunConfig;
use crate::experiment::{hydro_comparison, stationary_estimate};
use crate::report;

/// Simulate replicas from the fitted initial law, solve the matching PDE,
/// and emit `profile_t<t>.csv`, `pde_t<t>.csv`, and `report.csv`.
/// Returns false when a checkpoint comparison fails its tolerance.
pub fn cmd_hydro(cfg: &RunConfig) -> Result<bool, String> {
    let report = hydro_comparison(cfg)?;
    report::ensure_dir(&cfg.out_dir).map_err(|e| e.to_string())?;
    for (stats, grid) in report.stats.iter().zip(&report.grids) {
        let tag = report::time_tag(stats.t);
        report::write_profile_csv(
            &cfg.out_dir.join(format!("profile_t{tag}.csv")),
            cfg.n,
            &stats.raw,
        )
        .map_err(|e| e.to_string())?;
        report::write_pde_csv(&cfg.out_dir.join(format!("pde_t{tag}.csv")), grid)
            .map_err(|e| e.to_string())?;
    }
    report::write_report_csv(&cfg.out_dir.join("report.csv"), &report.rows)
        .map_err(|e| e.to_string())?;
    for row in &report.rows {
        println!(
            "t = {}: L1 = {:.5}, max |z| = {:.2} -> {}",
            row.t,
            row.l1,
            row.max_z,
            if row.pass { "pass" } else { "FAIL" }
        );
    }
    Ok(report.all_pass())
}

/// Long-run stationary estimate at the Figure-3 operating point (defaults
/// N = 50, alpha = 0.3, beta = 0.8, theta = 0, kappa = 1), with the exact
/// closed-form active field alongside.
pub fn cmd_fig3(cfg: &RunConfig) -> Result<bool, String> {
    let params = cfg.params().map_err(|e| e.to_string())?;
    let init = MeasureSpec::reference(cfg.n, cfg.alpha, cfg.beta).map_err(|e| e.to_string())?;
    let est = stationary_estimate(params, init, cfg.seed, 2.0, 4.0, 0.005, 4000.0);
    report::ensure_dir(&cfg.out_dir).map_err(|e| e.to_string())?;
    let path = cfg.out_dir.join("fig3.csv");
    write_fig3_csv(&path, cfg, &est).map_err(|e| e.to_string())?;
    let mut worst_rho = 0.0f64;
    let mut worst_az = 0.0f64;
    for x in 1..cfg.n {
        let rho_ss =
            stationary_closed_form(cfg.theta, cfg.alpha, cfg.beta, cfg.kappa, x as f64 / cfg.n as f64);
        worst_rho = worst_rho.max((est.density[x - 1] - rho_ss).abs());
        let abar = stationary_active_closed_form(&params, x);
        worst_az = worst_az
            .max(((est.active[x - 1] - abar) / est.active_stderr[x - 1].max(1e-9)).abs());
    }
    println!(
        "averaged {:.0} time units (split z = {:.2}); max |density - stationary profile| = \
         {:.4}; max active-field |z| = {:.2}",
        est.averaged_time, est.split_consistency_z, worst_rho, worst_az
    );
    println!("wrote {}", path.display());
    Ok(worst_rho <= 0.03 && worst_az <= 4.0)
}

fn write_fig3_csv(
    path: &Path,
    cfg: &RunConfig,
    est: &crate::experiment::StationaryEstimate,
) -> std::io::Result<()> {
    use std::io::Write;
    let params = cfg.params().expect("validated");
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "x,x_over_N,density,density_stderr,rho_ss,active,active_stderr,abar_exact")?;
    for x in 1..cfg.n {
        let u = x as f64 / cfg.n as f64;
        writeln!(
            f,
            "{},{},{},{},{},{},{},{}",
            x,
            u,
            est.density[x - 1],
            est.density_stderr[x - 1],
            stationary_closed_form(cfg.theta, cfg.alpha, cfg.beta, cfg.kappa, u),
            est.active[x - 1],
            est.active_stderr[x - 1],
            stationary_active_closed_form(&params, x),
        )?;
    }
    Ok(())
}

/// Exact finite-state stationary analysis at small N: enumerate, solve the
/// null vector, and report the active field against its closed form.
pub fn cmd_stationary(cfg: &RunConfig) -> Result<bool, String> {
    let params = cfg.params().map_err(|e| e.to_string())?;
    let chain = build_generator(&params).map_err(|e| e.to_string())?;
    let pi = stationary_exact(&chain).map_err(|e| e.to_string())?;
    let eh = chain.expected_h(&pi);
    let occ = chain.expected_occupancy(&pi);
    report::ensure_dir(&cfg.out_dir).map_err(|e| e.to_string())?;
    let path = cfg.out_dir.join("stationary.csv");
    {
        use std::io::Write;
        let mut f = std::fs::File::create(&path).map_err(|e| e.to_string())?;
        writeln!(f, "x,abar_exact,abar_formula,residual,density")
            .map_err(|e| e.to_string())?;
        for x in 1..cfg.n {
            let formula = stationary_active_closed_form(&params, x);
            writeln!(
                f,
                "{},{},{},{},{}",
                x,
                eh[x - 1],
                formula,
                (eh[x - 1] - formula).abs(),
                occ[x - 1]
            )
            .map_err(|e| e.to_string())?;
        }
    }
    let worst = (1..cfg.n)
        .map(|x| (eh[x - 1] - stationary_active_closed_form(&params, x)).abs())
        .fold(0.0f64, f64::max);
    println!(
        "{} ergodic states; max |E[h_x] - closed form| = {worst:.3e}; wrote {}",
        chain.num_states(),
        path.display()
    );
    Ok(worst < 1e-9)
}

/// Solve the macroscopic equation only, with the boundary regime picked by
/// theta, and emit `pde_t<t>.csv` at each checkpoint.
pub fn cmd_pde(cfg: &RunConfig) -> Result<bool, String> {
    let bc = pde::bc_for_theta(cfg.theta, cfg.alpha, cfg.beta, cfg.kappa);
    let mut grid = pde::DensityGrid::from_profile(cfg.m_grid, |u| cfg.init.eval(u), bc)
        .map_err(|e| e.to_string())?;
    report::ensure_dir(&cfg.out_dir).map_err(|e| e.to_string())?;
    for &t in &cfg.checkpoints {
        pde::advance(&mut grid, t).map_err(|e| e.to_string())?;
        let path = cfg.out_dir.join(format!("pde_t{}.csv", report::time_tag(t)));
        report::write_pde_csv(&path, &grid).map_err(|e| e.to_string())?;
        println!("t = {t}: wrote {}", path.display());
    }
    Ok(true)
}

/// Named verification suites with fixed seeds. Returns false if any check
/// in the suite fails.
pub fn cmd_verify(suite: &str, _cfg: &RunConfig) -> Result<bool, String> {
    let checks: Vec<Check> = match suite {
        "core" => crate::verify::suite_core(),
        "measures" => crate::verify::suite_measures(),
        "exact" => vec![checks::check_exact_stationary_field(), checks::check_equilibrium_identity()],
        "paths" => vec![checks::check_path_replays(1000, 2001)],
        "pde" => crate::verify::suite_pde(),
        "decay" => vec![checks::check_correlation_decay(77), checks::check_defect_routes_agree()],
        other => return Err(format!("unknown suite '{other}' (core, measures, exact, paths, pde, decay)")),
    };
    let mut all = true;
    for c in &checks {
        c.print();
        all &= c.pass;
    }
    Ok(all)
}
