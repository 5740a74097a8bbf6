//! The verification checks behind `fep verify` and the acceptance test
//! suite. Every check is deterministic: fixed seeds, pinned tolerances.

use fep_core::engine::{
    build_generator, enumerate_ergodic, for_each_ergodic, stationary_active_closed_form,
    stationary_exact,
};
use fep_core::measures::{
    covariance_decay, exact_covariance, quasi_reversibility_defect, ref_density_profile,
    MeasureSpec,
};
use fep_core::model::{
    active_indicator, apply_move, bulk_rate, is_ergodic, irreducibility_path, long_jump_path,
    move_rate, replay_with_skip, rho_bar, Configuration, SystemParams,
};
use fep_core::pde::{self, bc_for_theta, stationary_closed_form, BoundaryCondition};
use fep_core::rng::RngStream;

use crate::config::{InitProfile, RunConfig};
use crate::experiment::{
    ensemble_stationary, hydro_comparison, stationary_estimate, ComparisonReport,
};

/// Outcome of one named check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        Check { name, pass, detail }
    }

    pub fn print(&self) {
        println!("[{}] {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail);
    }
}

/// Ordinary least squares of `y` on `x`: `(slope, intercept, r_squared)`.
pub fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// Criterion 1: the null vector of the enumerated generator reproduces the
/// closed-form stationary active field with residual below 1e-9, across
/// sizes, boundary speeds, and both equilibrium and non-equilibrium
/// reservoir densities.
pub fn check_exact_stationary_field() -> Check {
    let mut worst = 0.0f64;
    let mut combos = 0;
    for n in [6usize, 8, 10, 12] {
        for theta in [-1.0, 0.0, 1.0, 2.0] {
            for kappa in [0.5, 1.0, 2.0] {
                for (alpha, beta) in [(0.3, 0.8), (0.6, 0.6)] {
                    let params = SystemParams::new(n, alpha, beta, theta, kappa).unwrap();
                    let chain = build_generator(&params).unwrap();
                    let pi = match stationary_exact(&chain) {
                        Ok(pi) => pi,
                        Err(e) => {
                            return Check::new(
                                "exact stationary field",
                                false,
                                format!("solve failed at N={n} theta={theta}: {e}"),
                            )
                        }
                    };
                    let eh = chain.expected_h(&pi);
                    for x in 1..n {
                        let residual =
                            (eh[x - 1] - stationary_active_closed_form(&params, x)).abs();
                        worst = worst.max(residual);
                    }
                    combos += 1;
                }
            }
        }
    }
    Check::new(
        "exact stationary field",
        worst < 1e-9,
        format!("{combos} parameter combinations, worst residual {worst:.3e} (tol 1e-9)"),
    )
}

/// Criterion 2: at equilibrium the exact stationary vector is the
/// restricted grand-canonical measure, and detailed balance holds edgewise.
pub fn check_equilibrium_identity() -> Check {
    let alpha = 0.6;
    let mut worst_prob = 0.0f64;
    let mut worst_balance = 0.0f64;
    for n in [6usize, 8, 10, 12] {
        for (theta, kappa) in [(-1.0, 1.0), (0.0, 0.5), (1.0, 2.0), (2.0, 1.0)] {
            let params = SystemParams::new(n, alpha, alpha, theta, kappa).unwrap();
            let chain = build_generator(&params).unwrap();
            let pi = stationary_exact(&chain).unwrap();
            let eq = MeasureSpec::equilibrium_stationary(n, alpha).unwrap();
            for (s, cfg) in chain.states.iter().enumerate() {
                worst_prob = worst_prob.max((pi[s] - eq.exact_prob(cfg)).abs());
            }
            // detailed balance on the unscaled generator (the N^2 and
            // boundary speed factors cancel edge by edge)
            let nsq = (n * n) as f64;
            for s in 0..chain.num_states() {
                for &(t, rate) in chain.transitions(s) {
                    let back = chain
                        .transitions(t)
                        .iter()
                        .find(|&&(ss, _)| ss == s)
                        .map(|&(_, r)| r)
                        .expect("dynamics is reversible edge by edge");
                    worst_balance =
                        worst_balance.max((pi[s] * rate / nsq - pi[t] * back / nsq).abs());
                }
            }
        }
    }
    Check::new(
        "equilibrium identity",
        worst_prob < 1e-10 && worst_balance < 1e-12,
        format!(
            "stationary vs grand-canonical {worst_prob:.3e} (tol 1e-10), \
             detailed balance {worst_balance:.3e} (tol 1e-12)"
        ),
    )
}

/// Fast local evaluation of the reference-measure quasi-reversibility
/// defect: the measure is a site chain, so the swap only touches the three
/// transition factors at `x, x+1, x+2` (plus the start factor at the left
/// edge). Cross-checked against the `exact_prob` route in the unit tests of
/// this crate.
fn local_defect(spec: &MeasureSpec, params: &SystemParams, cfg: &Configuration, x: usize) -> f64 {
    let n = params.n;
    let c_fwd = bulk_rate(cfg, params, x);
    debug_assert!(c_fwd > 0.0);
    let factor = |prev: u64, cur: u64, k: usize| -> f64 {
        let a = spec.field().get(k);
        match (prev, cur) {
            (1, 1) => a,
            (1, 0) => 1.0 - a,
            (0, 1) => 1.0,
            _ => 0.0,
        }
    };
    let occ = |y: usize| cfg.occ(y);
    let swapped_occ = |y: usize| -> u64 {
        if y == x {
            occ(x + 1)
        } else if y == x + 1 {
            occ(x)
        } else {
            occ(y)
        }
    };
    let mut ratio = 1.0;
    if x == 1 {
        let s = spec.start_prob();
        let before = if occ(1) == 1 { s } else { 1.0 - s };
        let after = if swapped_occ(1) == 1 { s } else { 1.0 - s };
        ratio *= after / before;
    }
    for k in [x, x + 1, x + 2] {
        if (2..n).contains(&k) {
            let before = factor(occ(k - 1), occ(k), k);
            let after = factor(swapped_occ(k - 1), swapped_occ(k), k);
            ratio *= after / before;
        }
    }
    let mut sw = cfg.clone();
    let (a, b) = (sw.is_occupied(x), sw.is_occupied(x + 1));
    sw.set(x, b);
    sw.set(x + 1, a);
    let c_bwd = bulk_rate(&sw, params, x);
    (1.0 - (c_bwd / c_fwd) * ratio).abs()
}

/// Criterion 3: exhaustive scan of the bulk quasi-reversibility defect at
/// N = 16 and N = 32: the maximum defect decays like 1/N.
pub fn check_quasi_reversibility_rate() -> Check {
    let (alpha, beta) = (0.3, 0.8);
    let scan = |n: usize| -> f64 {
        let params = SystemParams::new_unchecked(n, alpha, beta, 0.0, 1.0);
        let spec = MeasureSpec::reference(n, alpha, beta).unwrap();
        let mut max_d = 0.0f64;
        for_each_ergodic(n, |cfg| {
            for x in 1..=n - 2 {
                if bulk_rate(cfg, &params, x) > 0.0 {
                    max_d = max_d.max(local_defect(&spec, &params, cfg, x));
                }
            }
        });
        max_d
    };
    let d16 = scan(16);
    let d32 = scan(32);
    let ratio = (16.0 * d16) / (32.0 * d32);
    Check::new(
        "quasi-reversibility rate",
        (0.5..=2.0).contains(&ratio),
        format!(
            "max defect {d16:.4e} at N=16, {d32:.4e} at N=32; N*defect ratio {ratio:.3} \
             (must lie in [0.5, 2])"
        ),
    )
}

/// Criterion 4: the reference-measure density profile tracks the local
/// equilibrium value `1/(2 - a_x)` to order 1/N with a stable constant.
pub fn check_reference_density_law() -> Check {
    let (alpha, beta) = (0.3, 0.8);
    let mut constants = Vec::new();
    for n in [64usize, 128, 256] {
        let spec = MeasureSpec::reference(n, alpha, beta).unwrap();
        let rho = ref_density_profile(alpha, beta, n);
        let max_dev = (1..n)
            .map(|x| (rho[x - 1] - rho_bar(spec.field().get(x))).abs())
            .fold(0.0f64, f64::max);
        constants.push(n as f64 * max_dev);
    }
    let pass = constants.windows(2).all(|w| {
        let r = w[1] / w[0];
        (0.5..=2.0).contains(&r)
    });
    Check::new(
        "reference density law",
        pass,
        format!("N * max deviation = {constants:.4?} over N in {{64, 128, 256}}"),
    )
}

/// Output of the Dirichlet-regime hydrodynamic convergence run, shared by
/// criteria 5 and 6: several independent 16-replica ensembles per size.
pub struct HydroConvergence {
    pub sizes: Vec<usize>,
    /// `reports[s][b]` is ensemble `b` at size `sizes[s]`.
    pub reports: Vec<Vec<ComparisonReport>>,
}

/// A single 16-replica ensemble realizes the L1 distance only up to its own
/// sampling noise, which at these sizes is of the same order as the distance
/// itself; the convergence trend is therefore read on the mean over
/// independent ensembles (each still a 16-replica profile), with ensemble
/// spread as the error bar.
pub fn run_hydro_convergence(
    sizes: &[usize],
    replicas: usize,
    batches: usize,
    seed: u64,
) -> HydroConvergence {
    let reports = sizes
        .iter()
        .map(|&n| {
            (0..batches)
                .map(|b| {
                    let cfg = RunConfig {
                        n,
                        alpha: 0.3,
                        beta: 0.8,
                        theta: 0.0,
                        kappa: 1.0,
                        replicas,
                        seed: RngStream::substream(seed, b as u64).next_u64(),
                        checkpoints: vec![0.05, 0.1],
                        m_grid: 512,
                        init: InitProfile::Linear { a: 0.6, b: 0.3 },
                        ..RunConfig::default()
                    };
                    hydro_comparison(&cfg).expect("valid hydro configuration")
                })
                .collect()
        })
        .collect();
    HydroConvergence { sizes: sizes.to_vec(), reports }
}

/// Criterion 5: the distance between the empirical profile and the PDE
/// solution decreases with N (mean over ensembles, both checkpoints pooled)
/// and every ensemble sits below 0.02 at the finest size.
pub fn check_hydro_convergence(conv: &HydroConvergence) -> Check {
    let mut means = Vec::new();
    let mut ses = Vec::new();
    for per_batch in &conv.reports {
        let l1s: Vec<f64> =
            per_batch.iter().flat_map(|r| r.rows.iter().map(|row| row.l1)).collect();
        let m = l1s.iter().sum::<f64>() / l1s.len() as f64;
        let var =
            l1s.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (l1s.len() - 1) as f64;
        means.push(m);
        ses.push((var / l1s.len() as f64).sqrt());
    }
    let monotone = means.windows(2).all(|w| w[1] < w[0]);
    let finest_ok = conv
        .reports
        .last()
        .unwrap()
        .iter()
        .flat_map(|r| r.rows.iter())
        .all(|row| row.l1 < 0.02);
    let detail = format!(
        "mean L1 over N {:?} = {means:.4?} (ensemble se {ses:.4?}); finest-size \
         ensembles all < 0.02: {finest_ok}",
        conv.sizes
    );
    Check::new("hydrodynamic limit, Dirichlet regime", monotone && finest_ok, detail)
}

/// Criterion 6: boundary pinning: at the finest size, the block density
/// near x = 1 (window of half width N/16) sits within 0.03 of
/// `rho_bar(alpha) = 1/1.7` for t >= 0.05, pooled over ensembles.
pub fn check_boundary_pinning(conv: &HydroConvergence) -> Check {
    let n = *conv.sizes.last().unwrap();
    let target = rho_bar(0.3);
    let mut vals = Vec::new();
    for report in conv.reports.last().unwrap() {
        for s in &report.stats {
            if s.t >= 0.05 {
                vals.push(s.block.mean(0)); // site 1 block = leading window
            }
        }
    }
    let avg = vals.iter().sum::<f64>() / vals.len() as f64;
    let dev = (avg - target).abs();
    Check::new(
        "boundary value pinning",
        dev <= 0.03,
        format!(
            "N={n}: block density near x=1 averaged over t>=0.05 is {avg:.4}, \
             target {target:.4}, |dev| = {dev:.4} (tol 0.03)"
        ),
    )
}

/// Criterion 7 (PDE half): long-time solves converge to the closed-form
/// stationary profiles in all three boundary regimes, uniformly to 1e-4 in
/// the active coordinate.
pub fn check_pde_stationary_profiles() -> Check {
    let (alpha, beta, kappa) = (0.3, 0.8, 1.0);
    let m = 256;
    let mut worst = 0.0f64;
    type Init = Box<dyn Fn(f64) -> f64>;
    let cases: Vec<(f64, BoundaryCondition, Init)> = vec![
        (0.0, bc_for_theta(0.0, alpha, beta, kappa), Box::new(|u: f64| 0.6 + 0.3 * u)),
        (1.0, bc_for_theta(1.0, alpha, beta, kappa), Box::new(|_| 0.7)),
        (2.0, bc_for_theta(2.0, alpha, beta, kappa), {
            // zero-flux boundaries conserve mass: start at the target mass
            let target = rho_bar(0.5 * (alpha + beta));
            Box::new(move |u: f64| target + 0.05 * (std::f64::consts::PI * u).cos())
        }),
    ];
    for (theta, bc, init) in cases {
        let grid = pde::solve(&init, bc, 6.0, m).expect("stable solve");
        for (i, &r) in grid.cells.iter().enumerate() {
            let u = i as f64 / m as f64;
            let target = stationary_closed_form(theta, alpha, beta, kappa, u);
            // compare in the active coordinate, where the profiles are affine
            let dev = ((2.0 * r - 1.0) / r - (2.0 * target - 1.0) / target).abs();
            worst = worst.max(dev);
        }
    }
    Check::new(
        "stationary profiles (PDE)",
        worst < 1e-4,
        format!("worst |a(rho) - closed form| = {worst:.3e} over three regimes (tol 1e-4)"),
    )
}

/// Criterion 7 (simulation half): long-run stationary profiles of the
/// chain at theta = 1 and theta = 2 match the closed forms within four
/// standard errors over an ensemble of independently averaged replicas.
///
/// Two readings are checked: the active field against its exact finite-N
/// closed form at every site, and the density against `rho_bar` of the
/// macroscopic stationary field on interior sites. The density relation is
/// a local-equilibrium statement: within a few sites of a slow reservoir it
/// visibly fails (a genuine microscopic boundary layer, strongest at
/// `theta >= 1`), so the density comparison excludes an 8-site margin and
/// the worst boundary deviation is reported instead.
pub fn check_simulation_stationary_profiles(n: usize, seed: u64) -> Check {
    let (alpha, beta, kappa) = (0.3, 0.8, 1.0);
    let margin = 8;
    let mut detail = String::new();
    let mut pass = true;
    for theta in [1.0, 2.0] {
        let params = SystemParams::new(n, alpha, beta, theta, kappa).unwrap();
        // theta > 1: reservoirs act on a slow timescale, so start at the
        // stationary particle mass instead of waiting for it to drift there
        let init = if theta > 1.0 {
            MeasureSpec::grand_canonical(n, rho_bar(0.5 * (alpha + beta))).unwrap()
        } else {
            MeasureSpec::reference(n, alpha, beta).unwrap()
        };
        let est = ensemble_stationary(params, &init, 24, seed, 2.0, 5.0);
        let mut worst_active_z = 0.0f64;
        let mut worst_bulk_z = 0.0f64;
        let mut worst_boundary = 0.0f64;
        for x in 1..n {
            let abar = stationary_active_closed_form(&params, x);
            let az = (est.active[x - 1] - abar) / est.active_stderr[x - 1].max(5e-4);
            worst_active_z = worst_active_z.max(az.abs());
            let target = stationary_closed_form(theta, alpha, beta, kappa, x as f64 / n as f64);
            let dev = est.density[x - 1] - target;
            if x > margin && x < n - margin {
                worst_bulk_z =
                    worst_bulk_z.max((dev / est.density_stderr[x - 1].max(5e-4)).abs());
            } else {
                worst_boundary = worst_boundary.max(dev.abs());
            }
        }
        if worst_active_z > 4.0 || worst_bulk_z > 4.0 {
            pass = false;
        }
        detail.push_str(&format!(
            "theta={theta}: active-field |z| {worst_active_z:.2}, interior density |z| \
             {worst_bulk_z:.2}, boundary-layer |dev| {worst_boundary:.3}, drift z \
             {:.2}; ",
            est.drift_z
        ));
    }
    detail.push_str("(|z| tolerance 4)");
    Check::new("stationary profiles (simulation)", pass, detail)
}

/// Criterion 8: the stationary density field at N = 50, theta = 0 sits
/// within 0.03 of `rho_bar` of the affine stationary active field, and the
/// time-averaged active field matches its exact closed form.
pub fn check_fig3(seed: u64) -> Check {
    let (alpha, beta, kappa) = (0.3, 0.8, 1.0);
    let n = 50;
    let params = SystemParams::new(n, alpha, beta, 0.0, kappa).unwrap();
    let init = MeasureSpec::reference(n, alpha, beta).unwrap();
    let est = stationary_estimate(params, init, seed, 2.0, 4.0, 0.005, 4000.0);
    let mut worst_rho = 0.0f64;
    let mut worst_az = 0.0f64;
    for x in 1..n {
        let rho_ss = stationary_closed_form(0.0, alpha, beta, kappa, x as f64 / n as f64);
        worst_rho = worst_rho.max((est.density[x - 1] - rho_ss).abs());
        let abar = stationary_active_closed_form(&params, x);
        let z = (est.active[x - 1] - abar) / est.active_stderr[x - 1].max(1e-9);
        worst_az = worst_az.max(z.abs());
    }
    Check::new(
        "stationary density field at N = 50",
        worst_rho <= 0.03 && worst_az <= 4.0,
        format!(
            "averaged {:.0} time units; max |density - closed form| = {worst_rho:.4} \
             (tol 0.03), max active-field |z| = {worst_az:.2} (tol 4); split z = {:.2}",
            est.averaged_time, est.split_consistency_z
        ),
    )
}

/// Criterion 9: randomized replays of the two deterministic path constructions.
pub fn check_path_replays(trials: usize, seed: u64) -> Check {
    let mut rng = RngStream::new(seed);
    // sweep-to-full paths
    for trial in 0..trials {
        let n = 6 + (trial % 15);
        let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
        let spec = MeasureSpec::grand_canonical(n, 0.55 + 0.4 * rng.next_f64()).unwrap();
        let cfg = spec.sample(&mut rng);
        let path = match irreducibility_path(&cfg) {
            Ok(p) => p,
            Err(e) => return Check::new("path replays", false, format!("sweep failed: {e}")),
        };
        let mut work = cfg;
        for mv in path {
            if move_rate(&work, &params, mv) <= 0.0 {
                return Check::new("path replays", false, "zero-rate move in sweep".into());
            }
            work = apply_move(&work, mv);
            if !is_ergodic(&work) {
                return Check::new("path replays", false, "sweep left ergodic component".into());
            }
        }
        if work != Configuration::full(n) {
            return Check::new("path replays", false, "sweep did not reach full".into());
        }
    }
    // deterministic long jumps
    let mut done = 0;
    let mut attempts = 0;
    while done < trials {
        attempts += 1;
        if attempts > 100 * trials {
            return Check::new("path replays", false, "could not find admissible jumps".into());
        }
        let n = 12 + (attempts % 12);
        let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
        let spec = MeasureSpec::grand_canonical(n, 0.6 + 0.3 * rng.next_f64()).unwrap();
        let cfg = spec.sample(&mut rng);
        let origin = 2 + rng.below(n - 5);
        let max_ell = (n - 2 - origin).min(8);
        if max_ell < 2 {
            continue;
        }
        let ell = 2 + rng.below(max_ell - 1);
        let Ok(path) = long_jump_path(&cfg, origin, ell) else { continue };
        if path.len() != 3 * ell - 4 {
            return Check::new("path replays", false, format!("length {} != 3l-4", path.len()));
        }
        let end = replay_with_skip(&cfg, &params, &path);
        let mut target = cfg.clone();
        target.set(origin, false);
        target.set(origin + ell, true);
        if end != target {
            return Check::new("path replays", false, "jump replay missed the target".into());
        }
        let mut work = cfg.clone();
        for &mv in &path {
            if move_rate(&work, &params, mv) > 0.0 {
                work = apply_move(&work, mv);
            }
            if !is_ergodic(&work) {
                return Check::new("path replays", false, "jump left ergodic component".into());
            }
        }
        done += 1;
    }
    Check::new(
        "path replays",
        true,
        format!("{trials} sweep replays and {trials} long-jump replays all verified"),
    )
}

/// Criterion 10: measure sanity: normalization, sampler/evaluator
/// multinomial agreement, and the grand-canonical active-density identity.
pub fn check_measure_sanity(samples: usize, seed: u64) -> Check {
    // normalization over the full configuration space
    let mut worst_norm = 0.0f64;
    for n in [8usize, 11, 14] {
        let specs = [
            MeasureSpec::grand_canonical(n, 0.75).unwrap(),
            MeasureSpec::initial_law(n, |u| 0.6 + 0.3 * u).unwrap(),
            MeasureSpec::reference(n, 0.3, 0.8).unwrap(),
            MeasureSpec::equilibrium_stationary(n, 0.4).unwrap(),
        ];
        for spec in &specs {
            let mut total = 0.0;
            for bits in 0..(1u32 << (n - 1)) {
                let occ: Vec<u8> = (0..n - 1).map(|i| ((bits >> i) & 1) as u8).collect();
                total += spec.exact_prob(&Configuration::from_occupancies(n, &occ));
            }
            worst_norm = worst_norm.max((total - 1.0).abs());
        }
    }
    if worst_norm >= 1e-10 {
        return Check::new(
            "measure sanity",
            false,
            format!("normalization defect {worst_norm:.3e} (tol 1e-10)"),
        );
    }
    // sampler vs evaluator, multinomial cells at N = 8
    let n = 8;
    let mut rng = RngStream::new(seed);
    let mut worst_cell_z = 0.0f64;
    for spec in
        [MeasureSpec::grand_canonical(n, 0.75).unwrap(), MeasureSpec::reference(n, 0.3, 0.8).unwrap()]
    {
        let mut counts = vec![0u64; 1 << (n - 1)];
        for _ in 0..samples {
            let cfg = spec.sample(&mut rng);
            let mut key = 0usize;
            for x in 1..n {
                key |= (cfg.occ(x) as usize) << (x - 1);
            }
            counts[key] += 1;
        }
        for (key, &count) in counts.iter().enumerate() {
            let occ: Vec<u8> = (0..n - 1).map(|i| ((key >> i) & 1) as u8).collect();
            let p = spec.exact_prob(&Configuration::from_occupancies(n, &occ));
            if p == 0.0 {
                if count != 0 {
                    return Check::new(
                        "measure sanity",
                        false,
                        format!("sampler produced a zero-probability cell {occ:?}"),
                    );
                }
                continue;
            }
            let expect = samples as f64 * p;
            let sigma = (samples as f64 * p * (1.0 - p)).sqrt();
            worst_cell_z = worst_cell_z.max(((count as f64 - expect) / sigma).abs());
        }
    }
    // grand-canonical active-density identity E[h_x] = a(rho) at interior x
    let n = 64;
    let rho = 0.75;
    let spec = MeasureSpec::grand_canonical(n, rho).unwrap();
    let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
    let a = (2.0 * rho - 1.0) / rho;
    let h_samples = 40_000;
    let sites = [2usize, 13, 32, 51, 62];
    let mut sums = [0.0f64; 5];
    for _ in 0..h_samples {
        let cfg = spec.sample(&mut rng);
        for (s, &x) in sites.iter().enumerate() {
            sums[s] += active_indicator(&cfg, &params, x);
        }
    }
    let sigma_h = (a * (1.0 - a) / h_samples as f64).sqrt();
    let worst_h_z = sums
        .iter()
        .map(|s| ((s / h_samples as f64 - a) / sigma_h).abs())
        .fold(0.0f64, f64::max);
    let pass = worst_cell_z <= 4.0 && worst_h_z <= 4.0;
    Check::new(
        "measure sanity",
        pass,
        format!(
            "normalization {worst_norm:.2e} (tol 1e-10); worst multinomial |z| \
             {worst_cell_z:.2} over {samples} samples; active identity |z| {worst_h_z:.2} \
             (tol 4 sigma)"
        ),
    )
}

/// Criterion 11: spatial correlations of the reference measure decay
/// exponentially: the log of the exact two-point covariance is linear in
/// the distance with negative slope. A Monte Carlo estimate cross-checks
/// the exact values at short distances.
pub fn check_correlation_decay(seed: u64) -> Check {
    let n = 256;
    let spec = MeasureSpec::reference(n, 0.3, 0.8).unwrap();
    let x = 120;
    let dists: Vec<f64> = (1..=15).map(|d| d as f64).collect();
    let logs: Vec<f64> =
        (1..=15).map(|d| exact_covariance(&spec, x, x + d).abs().ln()).collect();
    let (slope, _, r2) = ols(&dists, &logs);
    // Monte Carlo consistency at short distances
    let mut rng = RngStream::new(seed);
    let mc_samples = 200_000;
    let mut worst_mc = 0.0f64;
    for d in 1..=4usize {
        let mc = covariance_decay(&spec, x, x + d, mc_samples, &mut rng);
        let exact = exact_covariance(&spec, x, x + d);
        // covariance of indicators: sampling error ~ 1/sqrt(samples)
        let z = (mc - exact) / (1.2 / (mc_samples as f64).sqrt());
        worst_mc = worst_mc.max(z.abs());
    }
    let pass = slope < 0.0 && r2 > 0.9 && worst_mc <= 4.0;
    Check::new(
        "correlation decay",
        pass,
        format!(
            "OLS slope {slope:.4} (must be < 0), R^2 {r2:.4} (must be > 0.9), \
             Monte Carlo consistency |z| {worst_mc:.2}"
        ),
    )
}

/// Unit-style consistency between the local-ratio defect used by the
/// criterion-3 scan and the `exact_prob` route of the public operation.
pub fn check_defect_routes_agree() -> Check {
    let n = 16;
    let (alpha, beta) = (0.3, 0.8);
    let params = SystemParams::new_unchecked(n, alpha, beta, 0.0, 1.0);
    let spec = MeasureSpec::reference(n, alpha, beta).unwrap();
    let mut worst = 0.0f64;
    let mut count = 0;
    for cfg in enumerate_ergodic(n).unwrap() {
        for x in 1..=n - 2 {
            if bulk_rate(&cfg, &params, x) > 0.0 {
                let fast = local_defect(&spec, &params, &cfg, x);
                let slow = quasi_reversibility_defect(alpha, beta, n, x, &cfg);
                worst = worst.max((fast - slow).abs());
                count += 1;
            }
        }
    }
    Check::new(
        "defect route agreement",
        worst < 1e-12,
        format!("{count} (configuration, edge) pairs, worst |fast - exact_prob| = {worst:.2e}"),
    )
}
