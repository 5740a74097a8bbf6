//! Replica orchestration and the simulation-versus-PDE comparison.
//!
//! Replicas fan out to a worker pool, one deterministic RNG stream per
//! replica index, so results are byte-identical regardless of worker count.
//! Profiles merge through their monoid structure after all workers finish.

use std::thread;

use fep_core::engine::{NoHook, SimulationState};
use fep_core::measures::MeasureSpec;
use fep_core::model::SystemParams;
use fep_core::observables::{
    block_density, AccumulationMode, BatchMeans, BlockSpec, Profile, TimeAverager,
};
use fep_core::pde::{self, DensityGrid};
use fep_core::rng::RngStream;

use crate::config::{InitProfile, RunConfig};

/// Per-checkpoint snapshot of one replica: raw occupancies and the
/// block-smoothed profile.
type ReplicaSnapshots = Vec<(Vec<f64>, Vec<f64>)>;

/// Ensemble statistics at one checkpoint: per-site occupation and the
/// block-smoothed profile, both accumulated across replicas.
pub struct CheckpointStats {
    pub t: f64,
    pub raw: Profile,
    pub block: Profile,
    pub block_half_width: usize,
}

/// Run `replicas` independent copies of the chain from the initial law and
/// collect per-checkpoint statistics. Deterministic in `(params, init,
/// checkpoints, replicas, seed)`.
pub fn run_replicas(
    params: SystemParams,
    init: InitProfile,
    checkpoints: &[f64],
    replicas: usize,
    seed: u64,
    block_half_width: usize,
) -> Vec<CheckpointStats> {
    assert!(replicas >= 1);
    let n = params.n;
    let spec = MeasureSpec::initial_law(n, |u| init.eval(u)).expect("supercritical profile");
    let workers = thread::available_parallelism().map(|p| p.get()).unwrap_or(1).min(replicas);
    let mut per_replica: Vec<ReplicaSnapshots> = Vec::with_capacity(replicas);
    thread::scope(|scope| {
        let spec = &spec;
        let mut handles = Vec::new();
        for w in 0..workers {
            let checkpoints = checkpoints.to_vec();
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                let mut r = w;
                while r < replicas {
                    let mut rng = RngStream::substream(seed, r as u64);
                    let cfg = spec.sample(&mut rng);
                    let mut state = SimulationState::new(params, cfg);
                    let mut snaps = Vec::with_capacity(checkpoints.len());
                    state
                        .run_schedule(&checkpoints, &mut rng, &mut NoHook, |_, cfg| {
                            let occ: Vec<f64> = (1..n).map(|x| cfg.occ(x) as f64).collect();
                            let block: Vec<f64> = (1..n)
                                .map(|x| block_density(cfg, x, BlockSpec::new(block_half_width)))
                                .collect();
                            snaps.push((occ, block));
                        })
                        .expect("rate index stays consistent");
                    out.push((r, snaps));
                    r += workers;
                }
                out
            }));
        }
        let mut collected: Vec<(usize, ReplicaSnapshots)> = Vec::with_capacity(replicas);
        for h in handles {
            collected.extend(h.join().expect("worker panicked"));
        }
        collected.sort_by_key(|&(r, _)| r);
        per_replica.extend(collected.into_iter().map(|(_, snaps)| snaps));
    });

    let mut stats: Vec<CheckpointStats> = checkpoints
        .iter()
        .map(|&t| CheckpointStats {
            t,
            raw: Profile::new(n - 1, AccumulationMode::PerSample),
            block: Profile::new(n - 1, AccumulationMode::PerSample),
            block_half_width,
        })
        .collect();
    for snaps in &per_replica {
        for (k, (occ, block)) in snaps.iter().enumerate() {
            stats[k].raw.add_values(occ, 1.0);
            stats[k].block.add_values(block, 1.0);
        }
    }
    stats
}

/// One row of the simulation-versus-PDE comparison.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub t: f64,
    /// Mean absolute distance between the block-smoothed empirical profile
    /// and the equally smoothed PDE profile.
    pub l1: f64,
    /// Largest per-site studentized deviation of the block profile.
    pub max_z: f64,
    pub pass: bool,
}

/// Comparison of replica-averaged profiles against the PDE solution at each
/// checkpoint, reproducible from `(config, seed)`.
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub stats: Vec<CheckpointStats>,
    pub grids: Vec<DensityGrid>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

/// Block-average a per-site value vector on the clipped windows.
pub fn smooth_sites(values: &[f64], n: usize, block: BlockSpec) -> Vec<f64> {
    (1..n)
        .map(|x| {
            let (lo, hi) = block.window(x, n);
            values[lo - 1..hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Block-average a PDE solution on the same discrete windows used for the
/// empirical profile, so the two sides are smoothed identically.
pub fn pde_block_profile(grid: &DensityGrid, n: usize, block: BlockSpec) -> Vec<f64> {
    let at_sites: Vec<f64> =
        (1..n).map(|x| pde::interpolate(grid, x as f64 / n as f64)).collect();
    smooth_sites(&at_sites, n, block)
}

/// The hydrodynamic comparison behind `fep hydro`: simulate replicas of the
/// chain from the initial law, solve the matching PDE (boundary regime
/// selected by `theta`), and compare at every checkpoint.
pub fn hydro_comparison(cfg: &RunConfig) -> Result<ComparisonReport, String> {
    let params = cfg.params().map_err(|e| e.to_string())?;
    for x in 1..cfg.n {
        let u = x as f64 / cfg.n as f64;
        let v = cfg.init.eval(u);
        if !(v > 0.5 && v <= 1.0) {
            return Err(format!(
                "initial profile is not supercritical at u = {u} (rho = {v}); \
                 only profiles with values in (1/2, 1] are supported"
            ));
        }
    }
    let block = BlockSpec::new((cfg.n / 16).max(1));
    let stats =
        run_replicas(params, cfg.init, &cfg.checkpoints, cfg.replicas, cfg.seed, block.half_width);
    let bc = pde::bc_for_theta(cfg.theta, cfg.alpha, cfg.beta, cfg.kappa);
    let mut grids = Vec::with_capacity(cfg.checkpoints.len());
    let mut grid = DensityGrid::from_profile(cfg.m_grid, |u| cfg.init.eval(u), bc)
        .map_err(|e| e.to_string())?;
    for &t in &cfg.checkpoints {
        pde::advance(&mut grid, t).map_err(|e| e.to_string())?;
        grids.push(grid.clone());
    }
    // the L1 trend is read on a wider smoothing window (N/8) than the
    // boundary block (N/16): block averaging commutes with the ensemble
    // mean and is applied to both sides, so it cancels in the bias and
    // only suppresses the Bernoulli sampling noise
    let wide = BlockSpec::new((cfg.n / 8).max(1));
    let rows = stats
        .iter()
        .zip(&grids)
        .map(|(s, g)| {
            let sim_wide = smooth_sites(s.raw.means(), cfg.n, wide);
            let pde_wide = pde_block_profile(g, cfg.n, wide);
            let l1 = sim_wide
                .iter()
                .zip(&pde_wide)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / (cfg.n - 1) as f64;
            let pde_block = pde_block_profile(g, cfg.n, block);
            let mut max_z = 0.0f64;
            for (i, &pb) in pde_block.iter().enumerate() {
                let dev = s.block.mean(i) - pb;
                let se = s.block.stderr(i).max(1e-6);
                max_z = max_z.max((dev / se).abs());
            }
            ComparisonRow { t: s.t, l1, max_z, pass: l1 < cfg.l1_tol }
        })
        .collect();
    Ok(ComparisonReport { rows, stats, grids })
}

/// Long-run stationary estimate for one replica chain: burn-in, then batch
/// means over 32 batches, extending the window (by pairwise batch
/// coalescing) until the worst per-site standard error of the density
/// estimate drops below `target_stderr` or the time cap is hit.
pub struct StationaryEstimate {
    pub density: Vec<f64>,
    pub density_stderr: Vec<f64>,
    pub active: Vec<f64>,
    pub active_stderr: Vec<f64>,
    /// Total averaging time (after burn-in).
    pub averaged_time: f64,
    /// First-half versus second-half consistency of the density estimate,
    /// in units of the standard error (largest site).
    pub split_consistency_z: f64,
}

pub fn stationary_estimate(
    params: SystemParams,
    init: MeasureSpec,
    seed: u64,
    burn_in: f64,
    initial_batch_len: f64,
    target_stderr: f64,
    time_cap: f64,
) -> StationaryEstimate {
    let n = params.n;
    assert_eq!(init.n(), n, "initial measure size mismatch");
    let mut rng = RngStream::substream(seed, 0);
    let cfg = init.sample(&mut rng);
    let mut state = SimulationState::new(params, cfg);
    state.run_until(burn_in, &mut rng, &mut NoHook).expect("consistent rate index");

    let mut density = BatchMeans::new();
    let mut active = BatchMeans::new();
    let mut batch_len = initial_batch_len;
    let mut averager = TimeAverager::new(params, true);
    loop {
        while density.num_batches() < 32 {
            let t0 = state.time();
            averager.begin(t0);
            state.run_until(t0 + batch_len, &mut rng, &mut averager).expect("consistent index");
            let cfg = state.cfg().clone();
            let (eta, h) = averager.finish(state.time(), &cfg);
            density.push(eta);
            active.push(h.expect("active field tracked"));
        }
        let max_se = density.stderr().iter().fold(0.0f64, |a, &b| a.max(b));
        let averaged = state.time() - burn_in;
        if max_se <= target_stderr || averaged >= time_cap {
            break;
        }
        // double the batch length, halving the batch count to keep going
        density.coalesce_pairs();
        active.coalesce_pairs();
        batch_len *= 2.0;
    }
    let averaged_time = state.time() - burn_in;
    // split consistency: first 16 vs last 16 batches of the final layout
    let split_consistency_z = {
        let se = density.stderr();
        let b = density.num_batches();
        let halves = |range: std::ops::Range<usize>| -> Vec<f64> {
            let mut acc = vec![0.0; n - 1];
            let mut count = 0.0;
            for k in range {
                for (a, v) in acc.iter_mut().zip(density.batch(k)) {
                    *a += v;
                }
                count += 1.0;
            }
            acc.into_iter().map(|v| v / count).collect()
        };
        let first = halves(0..b / 2);
        let second = halves(b / 2..b);
        first
            .iter()
            .zip(&second)
            .zip(&se)
            .map(|((a, b), s)| ((a - b) / (2.0 * s.max(1e-12))).abs())
            .fold(0.0f64, f64::max)
    };
    StationaryEstimate {
        density: density.mean(),
        density_stderr: density.stderr(),
        active: active.mean(),
        active_stderr: active.stderr(),
        averaged_time,
        split_consistency_z,
    }
}

/// Window averages of one replica chain: per-site time-averaged density
/// and active field, plus the density drift between the two window halves.
struct ReplicaAverages {
    density: Vec<f64>,
    active: Vec<f64>,
    drift: Vec<f64>,
}

/// Ensemble stationary estimate: independent replica chains, each time-
/// averaged over a window after burn-in, combined as independent batches.
///
/// One long chain underestimates its error badly when the slow collective
/// modes (total particle number exchanging through slow reservoirs) have
/// relaxation times comparable to the window; independent replicas make the
/// batch independence assumption true by construction.
pub struct EnsembleStationary {
    pub density: Vec<f64>,
    pub density_stderr: Vec<f64>,
    pub active: Vec<f64>,
    pub active_stderr: Vec<f64>,
    pub replicas: usize,
    pub window: f64,
    /// Worst per-site studentized drift between the two window halves,
    /// pooled over replicas; large values flag unconverged burn-in.
    pub drift_z: f64,
}

pub fn ensemble_stationary(
    params: SystemParams,
    init: &MeasureSpec,
    replicas: usize,
    seed: u64,
    burn_in: f64,
    window: f64,
) -> EnsembleStationary {
    let n = params.n;
    assert_eq!(init.n(), n, "initial measure size mismatch");
    let workers = thread::available_parallelism().map(|p| p.get()).unwrap_or(1).min(replicas);
    let mut results: Vec<(usize, ReplicaAverages)> = Vec::with_capacity(replicas);
    thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let init = init.clone();
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                let mut r = w;
                while r < replicas {
                    let mut rng = RngStream::substream(seed, r as u64);
                    let cfg = init.sample(&mut rng);
                    let mut state = SimulationState::new(params, cfg);
                    state.run_until(burn_in, &mut rng, &mut NoHook).expect("consistent index");
                    let mut averager = TimeAverager::new(params, true);
                    let mut halves = Vec::new();
                    for _ in 0..2 {
                        let t0 = state.time();
                        averager.begin(t0);
                        state
                            .run_until(t0 + 0.5 * window, &mut rng, &mut averager)
                            .expect("consistent index");
                        let cfg = state.cfg().clone();
                        halves.push(averager.finish(state.time(), &cfg));
                    }
                    let (eta_a, h_a) = &halves[0];
                    let (eta_b, h_b) = &halves[1];
                    let eta: Vec<f64> =
                        eta_a.iter().zip(eta_b).map(|(a, b)| 0.5 * (a + b)).collect();
                    let h: Vec<f64> = h_a
                        .as_ref()
                        .unwrap()
                        .iter()
                        .zip(h_b.as_ref().unwrap())
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect();
                    let drift: Vec<f64> =
                        eta_b.iter().zip(eta_a).map(|(b, a)| b - a).collect();
                    out.push((r, ReplicaAverages { density: eta, active: h, drift }));
                    r += workers;
                }
                out
            }));
        }
        for h in handles {
            results.extend(h.join().expect("worker panicked"));
        }
    });
    results.sort_by_key(|&(r, ..)| r);

    let stats = |pick: &dyn Fn(&ReplicaAverages) -> &Vec<f64>| {
        let r = replicas as f64;
        let mut mean = vec![0.0; n - 1];
        for (_, row) in &results {
            for (m, v) in mean.iter_mut().zip(pick(row)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= r);
        let mut se = vec![0.0; n - 1];
        for (_, row) in &results {
            for (s, (v, m)) in se.iter_mut().zip(pick(row).iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        se.iter_mut().for_each(|s| *s = (*s / (r - 1.0) / r).sqrt());
        (mean, se)
    };
    let (density, density_stderr) = stats(&|row| &row.density);
    let (active, active_stderr) = stats(&|row| &row.active);
    let (drift_mean, drift_se) = stats(&|row| &row.drift);
    let drift_z = drift_mean
        .iter()
        .zip(&drift_se)
        .map(|(m, s)| (m / s.max(1e-12)).abs())
        .fold(0.0f64, f64::max);
    EnsembleStationary {
        density,
        density_stderr,
        active,
        active_stderr,
        replicas,
        window,
        drift_z,
    }
}
