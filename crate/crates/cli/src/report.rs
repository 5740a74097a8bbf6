//! CSV emission. Floats are written with Rust's shortest-roundtrip
//! formatting, so identical runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use fep_core::observables::Profile;
use fep_core::pde::{active_of_grid, DensityGrid};

use crate::experiment::ComparisonRow;

pub fn ensure_dir(dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)
}

/// `profile_t<t>.csv`: per-site ensemble statistics.
pub fn write_profile_csv(path: &Path, n: usize, profile: &Profile) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "x,x_over_N,mean,stderr,weight")?;
    for x in 1..n {
        let i = x - 1;
        writeln!(
            f,
            "{},{},{},{},{}",
            x,
            x as f64 / n as f64,
            profile.mean(i),
            profile.stderr(i),
            profile.weight(i)
        )?;
    }
    Ok(())
}

/// `pde_t<t>.csv`: the solved macroscopic profile.
pub fn write_pde_csv(path: &Path, grid: &DensityGrid) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "u,rho,a_of_rho")?;
    let m = grid.m();
    let a = active_of_grid(grid);
    for (i, (rho, ai)) in grid.cells.iter().zip(&a).enumerate() {
        writeln!(f, "{},{},{}", i as f64 / m as f64, rho, ai)?;
    }
    Ok(())
}

/// `report.csv`: one row per checkpoint comparison.
pub fn write_report_csv(path: &Path, rows: &[ComparisonRow]) -> std::io::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "checkpoint,l1,max_z,pass")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.t, r.l1, r.max_z, r.pass)?;
    }
    Ok(())
}

/// Short float tag for checkpoint filenames: `0.05 -> "0.05"`.
pub fn time_tag(t: f64) -> String {
    format!("{t}")
}
