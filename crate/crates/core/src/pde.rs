//! Explicit finite-difference solver for the fast diffusion equation
//! `d_t rho = d_u^2 a(rho)` on `[0, 1]`, `a(rho) = (2 rho - 1) / rho`,
//! under Dirichlet, Robin, or Neumann boundary conditions.
//!
//! The scheme is forward-time centered-space applied to `a`: the weak form
//! of the equation is a plain Laplacian acting on `a(rho)`, so the interior
//! update is `rho_i += (dt/du^2) (a_{i+1} - 2 a_i + a_{i-1})`. Robin
//! boundaries use a second-order ghost node matching the flux relation
//! `d_u a(rho)(0) = kappa (a(rho(0)) - alpha)` (mirrored on the right);
//! Neumann is Robin with `kappa = 0`. Under the CFL bound the scheme is
//! monotone, which yields the discrete maximum principle, and the
//! closed-form stationary profiles (affine in `a`) are exact fixed points
//! of the discretization.

use std::fmt;

use crate::model::rho_bar;

/// Values may transiently escape `[1/2, 1]` by at most this much before the
/// step is declared unstable.
const RANGE_TOL: f64 = 1e-9;

/// `a(rho)` without domain policing: the solver's range invariant is
/// enforced per step with `RANGE_TOL` slack instead.
#[inline]
fn a_of(rho: f64) -> f64 {
    (2.0 * rho - 1.0) / rho
}

/// Boundary condition of the macroscopic equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// Pinned densities `rho(0) = rho_left`, `rho(1) = rho_right`.
    Dirichlet { rho_left: f64, rho_right: f64 },
    /// Flux relations `d_u a(rho)(0) = kappa (a(rho(0)) - alpha)` and
    /// `d_u a(rho)(1) = kappa (beta - a(rho(1)))`.
    Robin { kappa: f64, alpha: f64, beta: f64 },
    /// Zero flux at both ends.
    Neumann,
}

impl BoundaryCondition {
    /// Effective Robin coefficient: Dirichlet is not flux-form (`None`),
    /// Neumann is `kappa = 0`.
    fn robin_kappa(&self) -> Option<f64> {
        match self {
            BoundaryCondition::Dirichlet { .. } => None,
            BoundaryCondition::Robin { kappa, .. } => Some(*kappa),
            BoundaryCondition::Neumann => Some(0.0),
        }
    }
}

/// Solver failure.
#[derive(Debug, Clone, PartialEq)]
pub enum PdeError {
    /// Time step violates the stability bound.
    CflViolation { dt: f64, dt_max: f64 },
    /// A node left `[1/2, 1]` by more than the tolerance.
    Instability { node: usize, value: f64, time: f64 },
    /// Invalid grid or boundary data.
    BadData(String),
}

impl fmt::Display for PdeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PdeError::CflViolation { dt, dt_max } => {
                write!(f, "time step {dt:e} exceeds stability bound {dt_max:e}")
            }
            PdeError::Instability { node, value, time } => {
                write!(f, "node {node} escaped to {value} at t = {time}")
            }
            PdeError::BadData(msg) => write!(f, "bad data: {msg}"),
        }
    }
}

impl std::error::Error for PdeError {}

/// Discretized density profile: `M + 1` nodes at `u_i = i / M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub cells: Vec<f64>,
    pub time: f64,
    pub bc: BoundaryCondition,
}

impl DensityGrid {
    /// Sample a continuous supercritical profile on `m + 1` nodes.
    pub fn from_profile(
        m: usize,
        profile: impl Fn(f64) -> f64,
        bc: BoundaryCondition,
    ) -> Result<Self, PdeError> {
        if m < 2 {
            return Err(PdeError::BadData(format!("grid needs m >= 2, got {m}")));
        }
        validate_bc(&bc)?;
        let cells: Vec<f64> = (0..=m).map(|i| profile(i as f64 / m as f64)).collect();
        for (i, &r) in cells.iter().enumerate() {
            if !(r > 0.5 && r <= 1.0 + RANGE_TOL) {
                return Err(PdeError::BadData(format!(
                    "initial value {r} at node {i} not in (1/2, 1]"
                )));
            }
        }
        let mut grid = DensityGrid { cells, time: 0.0, bc };
        grid.pin_dirichlet();
        Ok(grid)
    }

    pub fn m(&self) -> usize {
        self.cells.len() - 1
    }

    pub fn du(&self) -> f64 {
        1.0 / self.m() as f64
    }

    /// Largest stable time step for this grid: `sup a'(rho) = 4` on
    /// `[1/2, 1]` gives the interior bound `du^2 / 8`; a Robin boundary node
    /// tightens it by its extra `2 kappa du` reaction term.
    pub fn dt_max(&self) -> f64 {
        let du = self.du();
        match self.bc.robin_kappa() {
            None | Some(0.0) => du * du / 8.0,
            Some(kappa) => du * du / (8.0 * (1.0 + 0.5 * kappa * du)),
        }
    }

    fn pin_dirichlet(&mut self) {
        if let BoundaryCondition::Dirichlet { rho_left, rho_right } = self.bc {
            *self.cells.first_mut().unwrap() = rho_left;
            *self.cells.last_mut().unwrap() = rho_right;
        }
    }

    /// Trapezoidal total mass `integral of rho du`.
    pub fn mass(&self) -> f64 {
        let m = self.m();
        let inner: f64 = self.cells[1..m].iter().sum();
        (0.5 * (self.cells[0] + self.cells[m]) + inner) * self.du()
    }

    /// Discrete boundary flux difference `d_u a(1) - d_u a(0)` read from the
    /// flux relations (Robin/Neumann only); the trapezoidal mass changes by
    /// exactly `dt` times this quantity per step.
    pub fn boundary_flux_difference(&self) -> Option<f64> {
        match self.bc {
            BoundaryCondition::Dirichlet { .. } => None,
            BoundaryCondition::Robin { kappa, alpha, beta } => {
                let m = self.m();
                Some(kappa * (beta - a_of(self.cells[m])) - kappa * (a_of(self.cells[0]) - alpha))
            }
            BoundaryCondition::Neumann => Some(0.0),
        }
    }
}

fn validate_bc(bc: &BoundaryCondition) -> Result<(), PdeError> {
    match *bc {
        BoundaryCondition::Dirichlet { rho_left, rho_right } => {
            for v in [rho_left, rho_right] {
                if !(v > 0.5 && v <= 1.0) {
                    return Err(PdeError::BadData(format!(
                        "Dirichlet density {v} not in (1/2, 1]"
                    )));
                }
            }
        }
        BoundaryCondition::Robin { kappa, .. } => {
            if kappa.is_nan() || kappa <= 0.0 {
                return Err(PdeError::BadData(format!("Robin kappa {kappa} not positive")));
            }
        }
        BoundaryCondition::Neumann => {}
    }
    Ok(())
}

/// One forward-Euler step of size `dt`. Pure: the input grid is unchanged.
pub fn step_explicit(grid: &DensityGrid, dt: f64) -> Result<DensityGrid, PdeError> {
    let mut out = grid.clone();
    let mut a = vec![0.0; grid.cells.len()];
    step_in_place(&mut out, dt, &mut a)?;
    Ok(out)
}

/// In-place step; `a_buf` is scratch for the `a(rho)` values.
fn step_in_place(grid: &mut DensityGrid, dt: f64, a_buf: &mut [f64]) -> Result<(), PdeError> {
    let dt_max = grid.dt_max();
    if dt > dt_max * (1.0 + 1e-12) {
        return Err(PdeError::CflViolation { dt, dt_max });
    }
    let m = grid.m();
    let du = grid.du();
    let lambda = dt / (du * du);
    for (b, &r) in a_buf.iter_mut().zip(grid.cells.iter()) {
        *b = a_of(r);
    }
    for i in 1..m {
        grid.cells[i] += lambda * (a_buf[i + 1] - 2.0 * a_buf[i] + a_buf[i - 1]);
    }
    match grid.bc {
        BoundaryCondition::Dirichlet { .. } => {
            // boundary nodes stay pinned
        }
        BoundaryCondition::Robin { kappa, alpha, beta } => {
            grid.cells[0] +=
                lambda * (2.0 * a_buf[1] - 2.0 * a_buf[0] - 2.0 * du * kappa * (a_buf[0] - alpha));
            grid.cells[m] += lambda
                * (2.0 * a_buf[m - 1] - 2.0 * a_buf[m] + 2.0 * du * kappa * (beta - a_buf[m]));
        }
        BoundaryCondition::Neumann => {
            grid.cells[0] += lambda * (2.0 * a_buf[1] - 2.0 * a_buf[0]);
            grid.cells[m] += lambda * (2.0 * a_buf[m - 1] - 2.0 * a_buf[m]);
        }
    }
    grid.time += dt;
    for (i, &v) in grid.cells.iter().enumerate() {
        if !(0.5 - RANGE_TOL..=1.0 + RANGE_TOL).contains(&v) {
            return Err(PdeError::Instability { node: i, value: v, time: grid.time });
        }
    }
    Ok(())
}

/// March a sampled initial profile to `t_end` with `dt = dt_max * 0.8`
/// (a fixed margin under the stability bound; the sup of `a'` is attained
/// at the critical density, which supercritical data approaches but does
/// not cross). Deterministic.
pub fn solve(
    initial: impl Fn(f64) -> f64,
    bc: BoundaryCondition,
    t_end: f64,
    m: usize,
) -> Result<DensityGrid, PdeError> {
    let mut grid = DensityGrid::from_profile(m, initial, bc)?;
    advance(&mut grid, t_end)?;
    Ok(grid)
}

/// Advance an existing grid to `t_end`.
pub fn advance(grid: &mut DensityGrid, t_end: f64) -> Result<(), PdeError> {
    let dt = grid.dt_max() * 0.8;
    let mut a_buf = vec![0.0; grid.cells.len()];
    while grid.time < t_end {
        let step = dt.min(t_end - grid.time);
        step_in_place(grid, step, &mut a_buf)?;
    }
    Ok(())
}

/// Stationary profile of the macroscopic equation in the regime selected by
/// `theta`: `rho_bar` applied to the affine-in-`u` stationary active field
///
/// * `theta < 1` (Dirichlet): `alpha + (beta - alpha) u`;
/// * `theta = 1` (Robin):     `alpha + (beta - alpha) (kappa u + 1) / (kappa + 2)`;
/// * `theta > 1` (Neumann):   `(alpha + beta) / 2`.
pub fn stationary_closed_form(theta: f64, alpha: f64, beta: f64, kappa: f64, u: f64) -> f64 {
    assert!((0.0..=1.0).contains(&u), "u = {u} outside [0, 1]");
    let a = if theta < 1.0 {
        alpha + (beta - alpha) * u
    } else if theta == 1.0 {
        alpha + (beta - alpha) * (kappa * u + 1.0) / (kappa + 2.0)
    } else {
        0.5 * (alpha + beta)
    };
    rho_bar(a)
}

/// Boundary condition imposed by the reservoir speed exponent: Dirichlet
/// below `theta = 1`, Robin at it, Neumann above it.
pub fn bc_for_theta(theta: f64, alpha: f64, beta: f64, kappa: f64) -> BoundaryCondition {
    if theta < 1.0 {
        BoundaryCondition::Dirichlet { rho_left: rho_bar(alpha), rho_right: rho_bar(beta) }
    } else if theta == 1.0 {
        BoundaryCondition::Robin { kappa, alpha, beta }
    } else {
        BoundaryCondition::Neumann
    }
}

/// Result of a grid-refinement study.
#[derive(Debug, Clone)]
pub struct RefinementReport {
    /// Grid sizes compared.
    pub m_list: Vec<usize>,
    /// `L1` distance between consecutive solutions, interpolated to the
    /// finest grid.
    pub l1_distances: Vec<f64>,
    /// Empirical convergence orders `log2(d_k / d_{k+1})` for doubling grids.
    pub orders: Vec<f64>,
    /// Set when an order estimate falls below 0.8 while distances are above
    /// the rounding floor.
    pub suspect: bool,
}

/// Solve on each grid in `m_list` (strictly increasing) and compare
/// consecutive solutions on the finest grid.
pub fn refinement_check(
    initial: impl Fn(f64) -> f64 + Copy,
    bc: BoundaryCondition,
    t_end: f64,
    m_list: &[usize],
) -> Result<RefinementReport, PdeError> {
    assert!(m_list.len() >= 2, "need at least two grids");
    assert!(m_list.windows(2).all(|w| w[0] < w[1]), "grid list must increase");
    let finest = *m_list.last().unwrap();
    let solutions: Vec<DensityGrid> = m_list
        .iter()
        .map(|&m| solve(initial, bc, t_end, m))
        .collect::<Result<_, _>>()?;
    let on_finest: Vec<Vec<f64>> = solutions
        .iter()
        .map(|g| (0..=finest).map(|i| interpolate(g, i as f64 / finest as f64)).collect())
        .collect();
    let mut l1 = Vec::new();
    for pair in on_finest.windows(2) {
        let d: f64 =
            pair[0].iter().zip(&pair[1]).map(|(a, b)| (a - b).abs()).sum::<f64>()
                / (finest + 1) as f64;
        l1.push(d);
    }
    let mut orders = Vec::new();
    for w in l1.windows(2) {
        orders.push((w[0] / w[1]).log2());
    }
    let floor = 1e-12;
    let suspect = orders
        .iter()
        .zip(l1.windows(2))
        .any(|(&o, d)| o < 0.8 && d[0] > floor && d[1] > floor);
    Ok(RefinementReport { m_list: m_list.to_vec(), l1_distances: l1, orders, suspect })
}

/// Piecewise-linear evaluation of the grid at `u in [0, 1]`.
pub fn interpolate(grid: &DensityGrid, u: f64) -> f64 {
    let m = grid.m();
    let s = (u.clamp(0.0, 1.0)) * m as f64;
    let i = (s.floor() as usize).min(m - 1);
    let frac = s - i as f64;
    grid.cells[i] * (1.0 - frac) + grid.cells[i + 1] * frac
}

/// `a(rho)` of every node, for emission next to the density.
pub fn active_of_grid(grid: &DensityGrid) -> Vec<f64> {
    grid.cells.iter().map(|&r| a_of(r)).collect()
}
