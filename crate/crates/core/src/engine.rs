//! Event-driven simulation under the diffusively accelerated generator,
//! plus exact finite-state analysis at small `N`.
//!
//! The continuous-time chain is simulated exactly: waiting times are
//! exponential in the current total rate, the next move is drawn
//! proportionally to its rate through a binary indexed tree (`O(log N)`
//! selection), and a move only perturbs rates on the five surrounding edges
//! and the touched boundary, so updates are `O(log N)` as well. Rates carry
//! the full time scaling: bulk exchanges at `N^2 * c`, boundary flips at
//! `N^2 * kappa * N^-theta * b`, so one unit of simulation time is one unit
//! of macroscopic (diffusive) time.

use std::collections::HashMap;
use std::fmt;

use crate::model::{
    boundary_rate_left, boundary_rate_right, bulk_rate, is_ergodic, Configuration, Move,
    SystemParams,
};
use crate::rng::RngStream;

mod fenwick;
mod linalg;

use fenwick::Fenwick;

/// Full rate-index rebuild cadence, in events.
const REBUILD_INTERVAL: u64 = 1 << 20;
/// Relative disagreement between the incremental total rate and a fresh
/// rebuild that is treated as index corruption.
const REBUILD_TOL: f64 = 1e-9;
/// Enumeration cap: `F(N+1)` ergodic states stays below ~75k.
pub const MAX_ENUM_N: usize = 24;
/// Dense stationary-solve cap, in states (`F(19) = 4181`, i.e. `N <= 18`).
pub const MAX_DENSE_STATES: usize = 4181;

/// Engine failure.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineError {
    /// `N` exceeds the enumeration or dense-solve capacity.
    Capacity { n: usize, what: &'static str },
    /// The incremental rate index drifted away from a fresh rebuild.
    RateIndexCorrupt { relative_error: f64 },
    /// The generator is not irreducible (should not happen on the ergodic
    /// component; indicates a construction bug).
    NotIrreducible,
    /// The stationary solve failed or left a large residual.
    SingularSolve { residual: f64 },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::Capacity { n, what } => write!(f, "N = {n} too large for {what}"),
            EngineError::RateIndexCorrupt { relative_error } => {
                write!(f, "rate index corrupt: relative error {relative_error:e} at rebuild")
            }
            EngineError::NotIrreducible => write!(f, "generator is not irreducible"),
            EngineError::SingularSolve { residual } => {
                write!(f, "stationary solve residual {residual:e}")
            }
        }
    }
}

impl std::error::Error for EngineError {}

/// Hook invoked once per event, immediately *before* the move is applied,
/// with the pre-move configuration and the sites the move will change.
/// This is what time-integrating observers need: the occupancy seen over
/// the elapsed holding interval is the pre-move one.
pub trait EventHook {
    fn on_event(&mut self, t: f64, cfg: &Configuration, changed: &[usize]);
}

/// No-op hook.
pub struct NoHook;

impl EventHook for NoHook {
    #[inline]
    fn on_event(&mut self, _t: f64, _cfg: &Configuration, _changed: &[usize]) {}
}

impl<F: FnMut(f64, &Configuration, &[usize])> EventHook for F {
    #[inline]
    fn on_event(&mut self, t: f64, cfg: &Configuration, changed: &[usize]) {
        self(t, cfg, changed)
    }
}

/// Move identifiers: `0..N-2` are the swaps on edges `1..=N-2`, then the
/// left and right flips.
#[inline]
fn move_of_id(id: usize, n: usize) -> Move {
    if id < n - 2 {
        Move::Swap(id + 1)
    } else if id == n - 2 {
        Move::FlipLeft
    } else {
        Move::FlipRight
    }
}

/// Configuration, clock, and the incremental rate bookkeeping for
/// `O(log N)` event selection.
pub struct SimulationState {
    params: SystemParams,
    cfg: Configuration,
    time: f64,
    rates: Vec<f64>,
    tree: Fenwick,
    total: f64,
    events: u64,
    events_since_rebuild: u64,
}

impl SimulationState {
    /// Start the chain at `cfg` (must be ergodic) at macroscopic time 0.
    pub fn new(params: SystemParams, cfg: Configuration) -> Self {
        assert_eq!(cfg.n(), params.n, "configuration size mismatch");
        assert!(is_ergodic(&cfg), "initial configuration must be ergodic");
        let rates = Self::full_rates(&params, &cfg);
        let tree = Fenwick::from_values(&rates);
        let total = tree.total();
        SimulationState {
            params,
            cfg,
            time: 0.0,
            rates,
            tree,
            total,
            events: 0,
            events_since_rebuild: 0,
        }
    }

    fn full_rates(params: &SystemParams, cfg: &Configuration) -> Vec<f64> {
        let n = params.n;
        let nsq = (n * n) as f64;
        let bspeed = nsq * params.boundary_speed();
        let mut rates = Vec::with_capacity(n);
        for x in 1..=n - 2 {
            rates.push(nsq * bulk_rate(cfg, params, x));
        }
        rates.push(bspeed * boundary_rate_left(cfg, params));
        rates.push(bspeed * boundary_rate_right(cfg, params));
        rates
    }

    pub fn cfg(&self) -> &Configuration {
        &self.cfg
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Sum of all enabled move rates (time-scaled).
    pub fn total_rate(&self) -> f64 {
        self.total
    }

    /// Events fired since construction.
    pub fn events(&self) -> u64 {
        self.events
    }

    /// Refresh the scaled rates of the moves whose local neighbourhood
    /// contains a changed site.
    fn refresh_after(&mut self, changed_lo: usize, changed_hi: usize) {
        let n = self.params.n;
        let nsq = (n * n) as f64;
        let lo = changed_lo.saturating_sub(2).max(1);
        let hi = (changed_hi + 1).min(n - 2);
        for x in lo..=hi {
            self.set_rate(x - 1, nsq * bulk_rate(&self.cfg, &self.params, x));
        }
        let bspeed = nsq * self.params.boundary_speed();
        if changed_lo <= 2 {
            self.set_rate(n - 2, bspeed * boundary_rate_left(&self.cfg, &self.params));
        }
        if changed_hi >= n - 2 {
            self.set_rate(n - 1, bspeed * boundary_rate_right(&self.cfg, &self.params));
        }
    }

    #[inline]
    fn set_rate(&mut self, id: usize, value: f64) {
        let delta = value - self.rates[id];
        if delta != 0.0 {
            self.rates[id] = value;
            self.tree.add(id, delta);
            self.total += delta;
        }
    }

    fn apply(&mut self, mv: Move) {
        let (lo, hi) = match mv {
            Move::Swap(x) => {
                let (a, b) = (self.cfg.is_occupied(x), self.cfg.is_occupied(x + 1));
                self.cfg.set(x, b);
                self.cfg.set(x + 1, a);
                (x, x + 1)
            }
            Move::FlipLeft => {
                self.cfg.flip(1);
                (1, 1)
            }
            Move::FlipRight => {
                let s = self.params.n - 1;
                self.cfg.flip(s);
                (s, s)
            }
        };
        self.refresh_after(lo, hi);
    }

    /// Rebuild the rate index from scratch, checking the incremental total
    /// against the fresh one, and the configuration against the ergodic
    /// component.
    fn rebuild(&mut self) -> Result<(), EngineError> {
        let fresh = Self::full_rates(&self.params, &self.cfg);
        let fresh_total: f64 = fresh.iter().sum();
        let rel = (fresh_total - self.total).abs() / fresh_total.max(1.0);
        if rel > REBUILD_TOL {
            return Err(EngineError::RateIndexCorrupt { relative_error: rel });
        }
        debug_assert!(is_ergodic(&self.cfg));
        self.rates = fresh;
        self.tree = Fenwick::from_values(&self.rates);
        self.total = self.tree.total();
        self.events_since_rebuild = 0;
        Ok(())
    }

    /// Fire one event: exponential waiting time at the current total rate,
    /// move drawn proportionally to its rate. Returns the move and the
    /// elapsed time, or `None` if no move is enabled (absorbing state).
    pub fn step(&mut self, rng: &mut RngStream) -> Option<(Move, f64)> {
        if self.total <= 0.0 {
            return None;
        }
        let dt = rng.exponential(self.total);
        self.time += dt;
        let mv = self.draw_move(rng);
        self.apply(mv);
        self.events += 1;
        self.events_since_rebuild += 1;
        if self.events_since_rebuild >= REBUILD_INTERVAL {
            self.rebuild().expect("rate index consistent");
        }
        Some((mv, dt))
    }

    fn draw_move(&self, rng: &mut RngStream) -> Move {
        let u = rng.next_f64() * self.total;
        let mut id = self.tree.find(u);
        // floating-point guard: never select a zero-rate move
        if self.rates[id] <= 0.0 {
            id = (0..self.rates.len())
                .map(|k| (id + k) % self.rates.len())
                .find(|&k| self.rates[k] > 0.0)
                .expect("total rate positive");
        }
        move_of_id(id, self.params.n)
    }

    /// Advance the chain to exactly `t_end`, invoking `hook` before every
    /// applied move. An event whose waiting time overshoots `t_end` is not
    /// applied; the clock is simply set to `t_end`. Deterministic given the
    /// stream state.
    pub fn run_until(
        &mut self,
        t_end: f64,
        rng: &mut RngStream,
        hook: &mut impl EventHook,
    ) -> Result<(), EngineError> {
        assert!(t_end >= self.time, "t_end must not precede the current time");
        while self.time < t_end {
            if self.total <= 0.0 {
                break;
            }
            let dt = rng.exponential(self.total);
            if self.time + dt > t_end {
                break;
            }
            self.time += dt;
            let mv = self.draw_move(rng);
            let changed: [usize; 2] = match mv {
                Move::Swap(x) => [x, x + 1],
                Move::FlipLeft => [1, 1],
                Move::FlipRight => [self.params.n - 1, self.params.n - 1],
            };
            let len = if changed[0] == changed[1] { 1 } else { 2 };
            hook.on_event(self.time, &self.cfg, &changed[..len]);
            self.apply(mv);
            self.events += 1;
            self.events_since_rebuild += 1;
            if self.events_since_rebuild >= REBUILD_INTERVAL {
                self.rebuild()?;
            }
        }
        self.time = t_end;
        Ok(())
    }

    /// Advance through a sorted list of snapshot times, calling `snapshot`
    /// with the state at each one. Each snapshot time is visited exactly
    /// once, including times equal to the current clock.
    pub fn run_schedule(
        &mut self,
        times: &[f64],
        rng: &mut RngStream,
        hook: &mut impl EventHook,
        mut snapshot: impl FnMut(f64, &Configuration),
    ) -> Result<(), EngineError> {
        for &t in times {
            self.run_until(t, rng, hook)?;
            snapshot(t, &self.cfg);
        }
        Ok(())
    }
}

/// All ergodic configurations for the given `N`, in lexicographic order of
/// `(eta_1, eta_2, ...)`. Capped: the state count is the Fibonacci number
/// `F(N+1)`.
pub fn enumerate_ergodic(n: usize) -> Result<Vec<Configuration>, EngineError> {
    if n > MAX_ENUM_N {
        return Err(EngineError::Capacity { n, what: "ergodic enumeration" });
    }
    let mut out = Vec::new();
    for_each_ergodic(n, |cfg| out.push(cfg.clone()));
    Ok(out)
}

/// Visit every ergodic configuration for `n` in lexicographic order without
/// materializing the list. Useful for scans past the enumeration cap.
pub fn for_each_ergodic(n: usize, mut visit: impl FnMut(&Configuration)) {
    let sites = n - 1;
    let mut cfg = Configuration::empty(n);
    // depth-first over sites, branching 0 before 1; a 0 is allowed only when
    // the previous site holds a 1 (or it is the first site)
    fn rec(cfg: &mut Configuration, x: usize, sites: usize, visit: &mut impl FnMut(&Configuration)) {
        if x > sites {
            visit(cfg);
            return;
        }
        let prev_occupied = x == 1 || cfg.is_occupied(x - 1);
        if prev_occupied {
            cfg.set(x, false);
            rec(cfg, x + 1, sites, visit);
        }
        cfg.set(x, true);
        rec(cfg, x + 1, sites, visit);
        cfg.set(x, false);
    }
    rec(&mut cfg, 1, sites, &mut visit);
}

/// Finite-state view of the accelerated generator on the ergodic component:
/// enumerated states and the sparse rate matrix `Q` (off-diagonal entries
/// are the scaled move rates, diagonal entries the negated row sums).
pub struct ExactChain {
    pub params: SystemParams,
    pub states: Vec<Configuration>,
    index: HashMap<Configuration, usize>,
    /// `rows[s]` lists `(s', rate)` for every move `s -> s'` with positive rate.
    rows: Vec<Vec<(usize, f64)>>,
}

impl ExactChain {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, cfg: &Configuration) -> Option<usize> {
        self.index.get(cfg).copied()
    }

    pub fn transitions(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    /// Total exit rate of state `s` (the negated diagonal of `Q`).
    pub fn exit_rate(&self, s: usize) -> f64 {
        self.rows[s].iter().map(|&(_, r)| r).sum()
    }

    /// Strong connectivity of the transition graph.
    pub fn is_irreducible(&self) -> bool {
        let m = self.num_states();
        if m == 0 {
            return false;
        }
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (s, row) in self.rows.iter().enumerate() {
            for &(t, _) in row {
                reverse[t].push(s);
            }
        }
        let bfs = |start: usize, forward: bool| -> usize {
            let mut seen = vec![false; m];
            let mut stack = vec![start];
            seen[start] = true;
            let mut count = 1;
            while let Some(s) = stack.pop() {
                let nexts: Vec<usize> = if forward {
                    self.rows[s].iter().map(|&(t, _)| t).collect()
                } else {
                    reverse[s].clone()
                };
                for t in nexts {
                    if !seen[t] {
                        seen[t] = true;
                        count += 1;
                        stack.push(t);
                    }
                }
            }
            count
        };
        bfs(0, true) == m && bfs(0, false) == m
    }

    /// Expectation of the active indicator `h_x` under a probability vector
    /// on the enumerated states, for `x in 1..=N-1`.
    pub fn expected_h(&self, pi: &[f64]) -> Vec<f64> {
        let n = self.params.n;
        let mut out = vec![0.0; n - 1];
        for (s, cfg) in self.states.iter().enumerate() {
            for x in 1..n {
                out[x - 1] += pi[s] * crate::model::active_indicator(cfg, &self.params, x);
            }
        }
        out
    }

    /// Expectation of the occupancy `eta_x` under a probability vector.
    pub fn expected_occupancy(&self, pi: &[f64]) -> Vec<f64> {
        let n = self.params.n;
        let mut out = vec![0.0; n - 1];
        for (s, cfg) in self.states.iter().enumerate() {
            for x in 1..n {
                out[x - 1] += pi[s] * cfg.occ(x) as f64;
            }
        }
        out
    }
}

/// Build the exact generator over the enumerated ergodic component.
pub fn build_generator(params: &SystemParams) -> Result<ExactChain, EngineError> {
    let n = params.n;
    let states = enumerate_ergodic(n)?;
    let index: HashMap<Configuration, usize> =
        states.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let nsq = (n * n) as f64;
    let bspeed = nsq * params.boundary_speed();
    let mut rows = Vec::with_capacity(states.len());
    for cfg in &states {
        let mut row = Vec::new();
        for id in 0..n {
            let mv = move_of_id(id, n);
            let rate = match mv {
                Move::Swap(x) => nsq * bulk_rate(cfg, params, x),
                Move::FlipLeft => bspeed * boundary_rate_left(cfg, params),
                Move::FlipRight => bspeed * boundary_rate_right(cfg, params),
            };
            if rate > 0.0 {
                let target = crate::model::apply_move(cfg, mv);
                let t = index[&target];
                row.push((t, rate));
            }
        }
        rows.push(row);
    }
    Ok(ExactChain { params: *params, states, index, rows })
}

/// Stationary probability vector of an irreducible chain: the unique
/// `pi >= 0` with `pi Q = 0` and `sum pi = 1`, solved densely with one
/// balance equation replaced by the normalization constraint.
pub fn stationary_exact(chain: &ExactChain) -> Result<Vec<f64>, EngineError> {
    let m = chain.num_states();
    if m > MAX_DENSE_STATES {
        return Err(EngineError::Capacity { n: chain.params.n, what: "dense stationary solve" });
    }
    if !chain.is_irreducible() {
        return Err(EngineError::NotIrreducible);
    }
    // A = Q^T with the last row replaced by ones; b = e_last
    let mut a = vec![0.0f64; m * m];
    for (s, row) in chain.rows.iter().enumerate() {
        let exit: f64 = row.iter().map(|&(_, r)| r).sum();
        a[s * m + s] -= exit; // (Q^T)[s][s] = Q[s][s]
        for &(t, rate) in row {
            a[t * m + s] += rate; // (Q^T)[t][s] = Q[s][t]
        }
    }
    for s in 0..m {
        a[(m - 1) * m + s] = 1.0;
    }
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;
    let pi = linalg::solve_dense(&mut a, &mut b, m)
        .ok_or(EngineError::SingularSolve { residual: f64::INFINITY })?;
    // residual check against the sparse generator
    let mut residual = vec![0.0f64; m];
    for (s, row) in chain.rows.iter().enumerate() {
        let exit: f64 = row.iter().map(|&(_, r)| r).sum();
        residual[s] -= pi[s] * exit;
        for &(t, rate) in row {
            residual[t] += pi[s] * rate;
        }
    }
    // scale: residual entries are O(rate * pi); normalize by the largest rate
    let rate_scale = (0..m).map(|s| chain.exit_rate(s)).fold(1.0f64, f64::max);
    let res = residual.iter().fold(0.0f64, |acc, r| acc.max(r.abs())) / rate_scale;
    if res.is_nan() || res >= 1e-10 {
        return Err(EngineError::SingularSolve { residual: res });
    }
    if pi.iter().any(|&p| p < -1e-12) {
        return Err(EngineError::SingularSolve { residual: res });
    }
    Ok(pi)
}

/// Closed-form stationary active field of the open system:
/// `abar_x = alpha + (beta - alpha) (kappa (x-1) + N^theta) / (kappa (N-2) + 2 N^theta)`.
///
/// This is exact for every finite `N`, which makes it the sharpest oracle
/// for the exact stationary solve.
pub fn stationary_active_closed_form(params: &SystemParams, x: usize) -> f64 {
    let n = params.n as f64;
    let nt = n.powf(params.theta);
    params.alpha
        + (params.beta - params.alpha) * (params.kappa * (x as f64 - 1.0) + nt)
            / (params.kappa * (n - 2.0) + 2.0 * nt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::MeasureSpec;
    use crate::model::active_indicator;

    fn fib(k: usize) -> usize {
        let (mut a, mut b) = (1usize, 1usize);
        for _ in 2..k {
            let c = a + b;
            a = b;
            b = c;
        }
        if k <= 2 { 1 } else { b }
    }

    #[test]
    fn enumeration_small_cases() {
        let states = enumerate_ergodic(4).unwrap();
        let as_strings: Vec<String> =
            states.iter().map(|c| format!("{c:?}")).collect();
        // the five no-adjacent-zero strings of length 3
        let expect = ["010", "011", "101", "110", "111"];
        assert_eq!(as_strings.len(), 5);
        for e in expect {
            assert!(as_strings.contains(&e.to_string()), "missing {e}");
        }
        // lexicographic in (eta_1, eta_2, ...)
        let mut sorted = as_strings.clone();
        sorted.sort();
        assert_eq!(as_strings, sorted);
    }

    #[test]
    fn enumeration_counts_are_fibonacci() {
        for n in 4..=16 {
            let states = enumerate_ergodic(n).unwrap();
            assert_eq!(states.len(), fib(n + 1), "N = {n}");
            assert!(states.iter().all(is_ergodic));
        }
        assert_eq!(enumerate_ergodic(8).unwrap().len(), 34);
        assert!(matches!(enumerate_ergodic(30), Err(EngineError::Capacity { .. })));
    }

    #[test]
    fn enumeration_is_complete() {
        // every omitted bit string fails the ergodicity predicate
        let n = 10;
        let states = enumerate_ergodic(n).unwrap();
        let set: std::collections::HashSet<_> = states.into_iter().collect();
        for bits in 0..(1u32 << (n - 1)) {
            let occ: Vec<u8> = (0..n - 1).map(|i| ((bits >> i) & 1) as u8).collect();
            let cfg = Configuration::from_occupancies(n, &occ);
            assert_eq!(set.contains(&cfg), is_ergodic(&cfg));
        }
    }

    #[test]
    fn generator_structure() {
        let params = SystemParams::new(6, 0.3, 0.8, 0.5, 1.3).unwrap();
        let chain = build_generator(&params).unwrap();
        assert!(chain.is_irreducible());
        for s in 0..chain.num_states() {
            // each off-diagonal target appears exactly once
            let mut targets: Vec<usize> = chain.transitions(s).iter().map(|&(t, _)| t).collect();
            let before = targets.len();
            targets.sort_unstable();
            targets.dedup();
            assert_eq!(before, targets.len(), "duplicate transition from state {s}");
            assert!(!targets.contains(&s), "self-loop at state {s}");
            // row of Q sums to zero by construction: exit rate matches
            let sum: f64 = chain.transitions(s).iter().map(|&(_, r)| r).sum();
            assert!((sum - chain.exit_rate(s)).abs() < 1e-12 * sum.max(1.0));
        }
    }

    #[test]
    fn generator_left_creation_rate() {
        // N = 4: the transition 010 -> 110 is a left creation at rate
        // N^2 kappa N^-theta alpha
        let params = SystemParams::new(4, 0.3, 0.8, 0.7, 1.5).unwrap();
        let chain = build_generator(&params).unwrap();
        let from = Configuration::from_occupancies(4, &[0, 1, 0]);
        let to = Configuration::from_occupancies(4, &[1, 1, 0]);
        let s = chain.state_index(&from).unwrap();
        let t = chain.state_index(&to).unwrap();
        let rate = chain
            .transitions(s)
            .iter()
            .find(|&&(tt, _)| tt == t)
            .map(|&(_, r)| r)
            .unwrap();
        let expect = 16.0 * params.boundary_speed() * 0.3;
        assert!((rate - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn stationary_matches_closed_form_active_field() {
        // the exact stationary expectation of h_x equals the closed-form
        // affine field for every theta regime
        for n in [6usize, 8, 10, 12] {
            for theta in [-1.0, 0.0, 1.0, 2.0] {
                let params = SystemParams::new(n, 0.3, 0.8, theta, 1.0).unwrap();
                let chain = build_generator(&params).unwrap();
                let pi = stationary_exact(&chain).unwrap();
                let eh = chain.expected_h(&pi);
                for x in 1..n {
                    let expect = stationary_active_closed_form(&params, x);
                    assert!(
                        (eh[x - 1] - expect).abs() < 1e-10,
                        "N={n} theta={theta} x={x}: {} vs {expect}",
                        eh[x - 1]
                    );
                }
            }
        }
    }

    #[test]
    fn stationary_equilibrium_matches_restricted_grand_canonical() {
        let n = 10;
        let params = SystemParams::new(n, 0.45, 0.45, 0.0, 2.0).unwrap();
        let chain = build_generator(&params).unwrap();
        let pi = stationary_exact(&chain).unwrap();
        let eq = MeasureSpec::equilibrium_stationary(n, 0.45).unwrap();
        for (s, cfg) in chain.states.iter().enumerate() {
            assert!((pi[s] - eq.exact_prob(cfg)).abs() < 1e-10, "state {cfg:?}");
        }
        // detailed balance holds edgewise at equilibrium
        for (s, cfg) in chain.states.iter().enumerate() {
            for &(t, rate) in chain.transitions(s) {
                let back = chain
                    .transitions(t)
                    .iter()
                    .find(|&&(ss, _)| ss == s)
                    .map(|&(_, r)| r)
                    .expect("reverse transition exists");
                let lhs = pi[s] * rate;
                let rhs = pi[t] * back;
                assert!((lhs - rhs).abs() < 1e-12, "{:?} <-> {:?}", cfg, chain.states[t]);
            }
        }
    }

    #[test]
    fn trajectory_stays_ergodic_and_is_deterministic() {
        let n = 32;
        let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
        let spec = MeasureSpec::initial_law(n, |u| 0.6 + 0.3 * u).unwrap();
        let mut rng = RngStream::new(5);
        let cfg = spec.sample(&mut rng);
        let mut st = SimulationState::new(params, cfg.clone());
        let mut rng_a = RngStream::new(77);
        for _ in 0..100_000 {
            st.step(&mut rng_a).expect("chain is never absorbing here");
            if st.events().is_multiple_of(4096) {
                assert!(is_ergodic(st.cfg()));
            }
        }
        assert!(is_ergodic(st.cfg()));
        // identical seed, identical trajectory
        let mut st1 = SimulationState::new(params, cfg.clone());
        let mut st2 = SimulationState::new(params, cfg);
        let mut rng1 = RngStream::new(123);
        let mut rng2 = RngStream::new(123);
        for _ in 0..20_000 {
            let a = st1.step(&mut rng1);
            let b = st2.step(&mut rng2);
            assert_eq!(a, b);
        }
        assert_eq!(st1.cfg(), st2.cfg());
        assert_eq!(st1.time(), st2.time());
    }

    #[test]
    fn absorbing_when_reservoirs_saturate() {
        // alpha = beta = 1 on the full configuration: creation is blocked by
        // exclusion, annihilation rate (1 - alpha) vanishes, every bulk rate
        // vanishes. The state is absorbing and run_until just advances time.
        let params = SystemParams::new_unchecked(8, 1.0, 1.0, 0.0, 1.0);
        let mut st = SimulationState::new(params, Configuration::full(8));
        assert_eq!(st.total_rate(), 0.0);
        let mut rng = RngStream::new(1);
        assert!(st.step(&mut rng).is_none());
        st.run_until(2.5, &mut rng, &mut NoHook).unwrap();
        assert_eq!(st.time(), 2.5);
        assert_eq!(st.events(), 0);
    }

    #[test]
    fn run_until_horizon_and_schedule() {
        let n = 16;
        let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
        let spec = MeasureSpec::grand_canonical(n, 0.75).unwrap();
        let mut rng = RngStream::new(9);
        let cfg = spec.sample(&mut rng);
        let mut st = SimulationState::new(params, cfg);
        // t_end equal to the current time: no events
        let e0 = st.events();
        st.run_until(0.0, &mut rng, &mut NoHook).unwrap();
        assert_eq!(st.events(), e0);
        // snapshot times are each visited exactly once
        let mut seen = Vec::new();
        st.run_schedule(&[0.05, 0.1], &mut rng, &mut NoHook, |t, _| seen.push(t)).unwrap();
        assert_eq!(seen, vec![0.05, 0.1]);
        assert_eq!(st.time(), 0.1);
    }

    #[test]
    fn event_rate_scales_like_n_cubed() {
        // at theta = 0 the total rate is O(N^2) per active edge times O(N)
        // edges, so events per unit macroscopic time grow like N^3
        let mut per_unit = Vec::new();
        for n in [64usize, 128, 256] {
            let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
            let spec = MeasureSpec::grand_canonical(n, 0.75).unwrap();
            let mut rng = RngStream::new(n as u64);
            let cfg = spec.sample(&mut rng);
            let mut st = SimulationState::new(params, cfg);
            let t = 0.02;
            st.run_until(t, &mut rng, &mut NoHook).unwrap();
            per_unit.push(st.events() as f64 / t / (n as f64).powi(3));
        }
        let max = per_unit.iter().fold(0.0f64, |a, &b| a.max(b));
        let min = per_unit.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(max / min < 3.0, "normalized event rates {per_unit:?}");
    }

    #[test]
    fn rate_index_survives_rebuild() {
        // push the event count past the rebuild interval; the incremental
        // index must agree with the fresh one (rebuild() errors otherwise)
        let n = 24;
        let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
        let spec = MeasureSpec::grand_canonical(n, 0.8).unwrap();
        let mut rng = RngStream::new(4);
        let cfg = spec.sample(&mut rng);
        let mut st = SimulationState::new(params, cfg);
        let mut remaining = (REBUILD_INTERVAL + 1000) as i64;
        while remaining > 0 {
            st.run_until(st.time() + 1.0, &mut rng, &mut NoHook).unwrap();
            remaining = (REBUILD_INTERVAL + 1000) as i64 - st.events() as i64;
        }
        assert!(st.events() > REBUILD_INTERVAL);
    }

    #[test]
    fn time_averager_matches_brute_force() {
        use crate::observables::TimeAverager;
        let n = 12;
        let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
        let spec = MeasureSpec::grand_canonical(n, 0.75).unwrap();
        let mut rng = RngStream::new(21);
        let cfg = spec.sample(&mut rng);
        let mut st = SimulationState::new(params, cfg);

        // brute force: integrate eta and h over every holding interval
        struct Brute {
            params: SystemParams,
            last_t: f64,
            int_eta: Vec<f64>,
            int_h: Vec<f64>,
        }
        impl EventHook for Brute {
            fn on_event(&mut self, t: f64, cfg: &Configuration, _changed: &[usize]) {
                let dt = t - self.last_t;
                for x in 1..self.params.n {
                    self.int_eta[x - 1] += cfg.occ(x) as f64 * dt;
                    self.int_h[x - 1] += active_indicator(cfg, &self.params, x) * dt;
                }
                self.last_t = t;
            }
        }

        let t_end = 5.0;
        let mut lazy = TimeAverager::new(params, true);
        lazy.begin(0.0);
        let mut brute =
            Brute { params, last_t: 0.0, int_eta: vec![0.0; n - 1], int_h: vec![0.0; n - 1] };
        struct Both<'a>(&'a mut TimeAverager, &'a mut Brute);
        impl EventHook for Both<'_> {
            fn on_event(&mut self, t: f64, cfg: &Configuration, changed: &[usize]) {
                self.0.on_event(t, cfg, changed);
                self.1.on_event(t, cfg, changed);
            }
        }
        st.run_until(t_end, &mut rng, &mut Both(&mut lazy, &mut brute)).unwrap();
        // close the brute-force window at t_end
        let final_cfg = st.cfg().clone();
        brute.on_event(t_end, &final_cfg, &[]);
        let (eta, h) = lazy.finish(t_end, &final_cfg);
        let h = h.unwrap();
        assert!(st.events() > 1000, "want a nontrivial event count");
        for i in 0..n - 1 {
            assert!((eta[i] - brute.int_eta[i] / t_end).abs() < 1e-10, "eta site {}", i + 1);
            assert!((h[i] - brute.int_h[i] / t_end).abs() < 1e-10, "h site {}", i + 1);
        }
    }

    #[test]
    fn stationary_time_average_approaches_exact() {
        // long time average of h_x at small N agrees with the exact
        // stationary expectation
        use crate::observables::TimeAverager;
        let n = 8;
        let params = SystemParams::new(n, 0.3, 0.8, 0.0, 1.0).unwrap();
        let chain = build_generator(&params).unwrap();
        let pi = stationary_exact(&chain).unwrap();
        let expect = chain.expected_h(&pi);
        let spec = MeasureSpec::reference(n, 0.3, 0.8).unwrap();
        let mut rng = RngStream::new(3);
        let mut st = SimulationState::new(params, spec.sample(&mut rng));
        st.run_until(5.0, &mut rng, &mut NoHook).unwrap(); // burn-in
        let mut avg = TimeAverager::new(params, true);
        avg.begin(st.time());
        let t_end = st.time() + 400.0;
        st.run_until(t_end, &mut rng, &mut avg).unwrap();
        let cfg = st.cfg().clone();
        let (_, h) = avg.finish(t_end, &cfg);
        let h = h.unwrap();
        for x in 1..n {
            assert!(
                (h[x - 1] - expect[x - 1]).abs() < 0.01,
                "x={x}: {} vs {}",
                h[x - 1],
                expect[x - 1]
            );
        }
    }
}
