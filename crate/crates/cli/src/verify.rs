//! Quick verification suites for `fep verify core|measures|pde`: seeded
//! spot checks of the kernel identities, the measure layer, and the solver.
//! The heavyweight criteria live in `checks` and the acceptance tests.

use fep_core::measures::{gc_marginal, gc_marginal_closed_form, MeasureSpec};
use fep_core::model::{
    active_density, active_indicator, apply_move, instantaneous_current, is_ergodic, move_rate,
    rho_bar, Configuration, Move, SystemParams,
};
use fep_core::pde::{self, bc_for_theta, stationary_closed_form, BoundaryCondition};
use fep_core::rng::RngStream;

use crate::checks::Check;

fn random_ergodic(n: usize, rng: &mut RngStream) -> Configuration {
    MeasureSpec::grand_canonical(n, 0.55 + 0.44 * rng.next_f64()).unwrap().sample(rng)
}

pub fn suite_core() -> Vec<Check> {
    let mut rng = RngStream::new(101);
    let mut out = Vec::new();

    let mut worst_grad = 0.0f64;
    let mut closure_ok = true;
    for _ in 0..500 {
        let n = 8 + rng.below(56);
        let params = SystemParams::new(n, 0.3, 0.8, 0.5, 1.0).unwrap();
        let cfg = random_ergodic(n, &mut rng);
        for x in 1..=n - 2 {
            let j = instantaneous_current(&cfg, &params, x);
            let grad = active_indicator(&cfg, &params, x) - active_indicator(&cfg, &params, x + 1);
            worst_grad = worst_grad.max((j - grad).abs());
        }
        let mut moves: Vec<Move> = (1..=n - 2).map(Move::Swap).collect();
        moves.push(Move::FlipLeft);
        moves.push(Move::FlipRight);
        let mv = moves[rng.below(moves.len())];
        if move_rate(&cfg, &params, mv) > 0.0 && !is_ergodic(&apply_move(&cfg, mv)) {
            closure_ok = false;
        }
    }
    out.push(Check {
        name: "gradient identity",
        pass: worst_grad == 0.0,
        detail: format!("worst |j - (h_x - h_x+1)| = {worst_grad:.1e} over 500 random states"),
    });
    out.push(Check {
        name: "ergodic closure",
        pass: closure_ok,
        detail: "positive-rate moves never leave the ergodic component".into(),
    });

    let mut worst_inv = 0.0f64;
    for _ in 0..1000 {
        let rho = 0.5 + 0.5 * rng.next_f64();
        worst_inv = worst_inv.max((rho_bar(active_density(rho)) - rho).abs());
        let a = rng.next_f64();
        worst_inv = worst_inv.max((active_density(rho_bar(a)) - a).abs());
    }
    out.push(Check {
        name: "density inverse pair",
        pass: worst_inv < 1e-12,
        detail: format!("worst round-trip error {worst_inv:.1e} (tol 1e-12)"),
    });
    out
}

pub fn suite_measures() -> Vec<Check> {
    let mut out = Vec::new();
    // normalization at N = 12 for all four specs
    let n = 12;
    let specs = [
        MeasureSpec::grand_canonical(n, 0.75).unwrap(),
        MeasureSpec::initial_law(n, |u| 0.6 + 0.3 * u).unwrap(),
        MeasureSpec::reference(n, 0.3, 0.8).unwrap(),
        MeasureSpec::equilibrium_stationary(n, 0.4).unwrap(),
    ];
    let mut worst = 0.0f64;
    for spec in &specs {
        let mut total = 0.0;
        for bits in 0..(1u32 << (n - 1)) {
            let occ: Vec<u8> = (0..n - 1).map(|i| ((bits >> i) & 1) as u8).collect();
            total += spec.exact_prob(&Configuration::from_occupancies(n, &occ));
        }
        worst = worst.max((total - 1.0).abs());
    }
    out.push(Check {
        name: "normalization",
        pass: worst < 1e-10,
        detail: format!("worst |sum - 1| = {worst:.2e} over four measures at N = 12"),
    });
    // chain product versus closed-form marginal
    let mut worst_cf = 0.0f64;
    for l in 1..=8usize {
        for bits in 0..(1u32 << l) {
            let sigma: Vec<u8> = (0..l).map(|i| ((bits >> i) & 1) as u8).collect();
            if let Some(cf) = gc_marginal_closed_form(0.72, &sigma) {
                worst_cf = worst_cf.max((cf - gc_marginal(0.72, &sigma)).abs());
            }
        }
    }
    out.push(Check {
        name: "marginal route agreement",
        pass: worst_cf < 1e-12,
        detail: format!("chain product vs closed form, worst gap {worst_cf:.2e}"),
    });
    out.push(crate::checks::check_measure_sanity(200_000, 33));
    out
}

pub fn suite_pde() -> Vec<Check> {
    let mut out = Vec::new();
    let (alpha, beta, kappa) = (0.3, 0.8, 1.0);
    // closed-form stationary profiles are discrete fixed points
    let mut worst_fp = 0.0f64;
    for theta in [0.0, 1.0, 2.0] {
        let bc = bc_for_theta(theta, alpha, beta, kappa);
        let profile = |u: f64| stationary_closed_form(theta, alpha, beta, kappa, u);
        let mut grid = pde::DensityGrid::from_profile(128, profile, bc).unwrap();
        let start = grid.cells.clone();
        pde::advance(&mut grid, 1.0).unwrap();
        for (a, b) in start.iter().zip(&grid.cells) {
            worst_fp = worst_fp.max((a - b).abs());
        }
    }
    out.push(Check {
        name: "stationary fixed points",
        pass: worst_fp < 1e-12,
        detail: format!("closed forms drift {worst_fp:.2e} per unit time (tol 1e-12)"),
    });
    // refinement order
    let bc = BoundaryCondition::Dirichlet { rho_left: rho_bar(alpha), rho_right: rho_bar(beta) };
    let report = pde::refinement_check(|u| 0.6 + 0.3 * u, bc, 0.05, &[32, 64, 128, 256]).unwrap();
    out.push(Check {
        name: "grid refinement",
        pass: !report.suspect && report.orders.iter().all(|&o| o >= 1.0),
        detail: format!("L1 distances {:?}, orders {:?}", report.l1_distances, report.orders),
    });
    out.push(crate::checks::check_pde_stationary_profiles());
    out
}
