//! Macroscopic readouts: empirical pairings, block averages, profile
//! accumulators with uncertainty, and exact time averaging along a
//! trajectory.

use crate::engine::EventHook;
use crate::model::{active_indicator, Configuration, SystemParams};

/// Pair the empirical measure with a test function:
/// `(1/N) * sum_x g(x/N) eta_x`.
pub fn pair_with_test_function(cfg: &Configuration, g: impl Fn(f64) -> f64) -> f64 {
    let n = cfg.n() as f64;
    (1..cfg.n()).map(|x| g(x as f64 / n) * cfg.occ(x) as f64).sum::<f64>() / n
}

/// Clipped averaging window of size `2*half_width + 1` containing `x`:
/// centered in the bulk, pushed inward near the boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub half_width: usize,
}

impl BlockSpec {
    pub fn new(half_width: usize) -> Self {
        BlockSpec { half_width }
    }

    /// Inclusive site range of the window around `x` on `{1,..,N-1}`.
    pub fn window(&self, x: usize, n: usize) -> (usize, usize) {
        let l = self.half_width;
        assert!(x >= 1 && x < n, "site {x} out of range");
        assert!(2 * l < n - 1, "window of size {} exceeds the lattice", 2 * l + 1);
        if x <= l {
            (1, 2 * l + 1)
        } else if x < n - l {
            (x - l, x + l)
        } else {
            (n - 2 * l - 1, n - 1)
        }
    }
}

/// Particle density averaged over the window `Lambda_x^l`.
pub fn block_density(cfg: &Configuration, x: usize, spec: BlockSpec) -> f64 {
    let (lo, hi) = spec.window(x, cfg.n());
    let sum: u64 = (lo..=hi).map(|y| cfg.occ(y)).sum();
    sum as f64 / (hi - lo + 1) as f64
}

/// Active indicator averaged over the smaller window `Lambda_x^{l-1}`.
pub fn block_active(cfg: &Configuration, params: &SystemParams, x: usize, spec: BlockSpec) -> f64 {
    assert!(spec.half_width >= 1, "active block needs half width >= 1");
    let inner = BlockSpec::new(spec.half_width - 1);
    let (lo, hi) = inner.window(x, cfg.n());
    let sum: f64 = (lo..=hi).map(|y| active_indicator(cfg, params, y)).sum();
    sum / (hi - lo + 1) as f64
}

/// How sample weights enter a [`Profile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccumulationMode {
    /// Every sample counts with weight one.
    PerSample,
    /// Samples carry holding-time weights.
    TimeWeighted,
}

/// Per-site running mean, variance, and weight over a sequence of
/// configurations or value vectors. Single-pass (West-style weighted
/// Welford), so arbitrarily long runs need no sample storage. Profiles are
/// mergeable: `merge` is associative and order-insensitive up to rounding,
/// which is what parallel replica reduction needs.
#[derive(Debug, Clone)]
pub struct Profile {
    mode: AccumulationMode,
    mean: Vec<f64>,
    m2: Vec<f64>,
    weight: Vec<f64>,
    samples: u64,
}

impl Profile {
    pub fn new(len: usize, mode: AccumulationMode) -> Self {
        Profile {
            mode,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
            weight: vec![0.0; len],
            samples: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Accumulate a value vector with the given weight (ignored and taken
    /// as 1 in per-sample mode).
    pub fn add_values(&mut self, values: &[f64], weight: f64) {
        assert_eq!(values.len(), self.len(), "profile length mismatch");
        let w = match self.mode {
            AccumulationMode::PerSample => 1.0,
            AccumulationMode::TimeWeighted => weight,
        };
        if w <= 0.0 {
            return;
        }
        for (i, &v) in values.iter().enumerate() {
            let total = self.weight[i] + w;
            let delta = v - self.mean[i];
            let r = w / total;
            self.mean[i] += delta * r;
            self.m2[i] += self.weight[i] * delta * delta * r;
            self.weight[i] = total;
        }
        self.samples += 1;
    }

    /// Accumulate the occupancy vector of a configuration.
    pub fn add_config(&mut self, cfg: &Configuration, weight: f64) {
        assert_eq!(cfg.num_sites(), self.len(), "profile length mismatch");
        let w = match self.mode {
            AccumulationMode::PerSample => 1.0,
            AccumulationMode::TimeWeighted => weight,
        };
        if w <= 0.0 {
            return;
        }
        for x in 1..cfg.n() {
            let i = x - 1;
            let v = cfg.occ(x) as f64;
            let total = self.weight[i] + w;
            let delta = v - self.mean[i];
            let r = w / total;
            self.mean[i] += delta * r;
            self.m2[i] += self.weight[i] * delta * delta * r;
            self.weight[i] = total;
        }
        self.samples += 1;
    }

    /// Fold another profile into this one (parallel-reduction merge).
    pub fn merge(&mut self, other: &Profile) {
        assert_eq!(self.len(), other.len(), "profile length mismatch");
        assert_eq!(self.mode, other.mode, "profile mode mismatch");
        for i in 0..self.len() {
            let (wa, wb) = (self.weight[i], other.weight[i]);
            if wb == 0.0 {
                continue;
            }
            if wa == 0.0 {
                self.mean[i] = other.mean[i];
                self.m2[i] = other.m2[i];
                self.weight[i] = wb;
                continue;
            }
            let total = wa + wb;
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * wb / total;
            self.m2[i] += other.m2[i] + delta * delta * wa * wb / total;
            self.weight[i] = total;
        }
        self.samples += other.samples;
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &[f64] {
        &self.mean
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weight[i]
    }

    /// Standard error of the mean, treating accumulated samples as
    /// independent (time averages should instead use batch means).
    /// Zero when fewer than two samples carry weight.
    pub fn stderr(&self, i: usize) -> f64 {
        if self.samples < 2 || self.weight[i] == 0.0 {
            return 0.0;
        }
        let n_eff = self.samples as f64;
        let var = self.m2[i] / self.weight[i] * n_eff / (n_eff - 1.0);
        (var / n_eff).sqrt()
    }
}

/// Batch-means estimate over a list of per-batch mean vectors: the mean of
/// batch means and its standard error, which absorbs autocorrelation within
/// batches.
pub struct BatchMeans {
    batches: Vec<Vec<f64>>,
}

impl BatchMeans {
    pub fn new() -> Self {
        BatchMeans { batches: Vec::new() }
    }

    pub fn push(&mut self, batch_mean: Vec<f64>) {
        if let Some(first) = self.batches.first() {
            assert_eq!(first.len(), batch_mean.len());
        }
        self.batches.push(batch_mean);
    }

    pub fn num_batches(&self) -> usize {
        self.batches.len()
    }

    pub fn batch(&self, k: usize) -> &[f64] {
        &self.batches[k]
    }

    /// Halve the batch count by averaging adjacent pairs (doubling the
    /// effective batch length). Keeps the batch count bounded when a run is
    /// extended until the error target is met.
    pub fn coalesce_pairs(&mut self) {
        let mut merged = Vec::with_capacity(self.batches.len().div_ceil(2));
        for pair in self.batches.chunks(2) {
            if pair.len() == 2 {
                merged.push(
                    pair[0].iter().zip(&pair[1]).map(|(a, b)| 0.5 * (a + b)).collect(),
                );
            } else {
                merged.push(pair[0].clone());
            }
        }
        self.batches = merged;
    }

    /// Per-entry mean over batches.
    pub fn mean(&self) -> Vec<f64> {
        let b = self.batches.len() as f64;
        let len = self.batches[0].len();
        let mut out = vec![0.0; len];
        for batch in &self.batches {
            for (o, v) in out.iter_mut().zip(batch) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|o| *o /= b);
        out
    }

    /// Per-entry standard error of the mean across batches.
    pub fn stderr(&self) -> Vec<f64> {
        let b = self.batches.len() as f64;
        assert!(b >= 2.0, "need at least two batches");
        let mean = self.mean();
        let len = mean.len();
        let mut var = vec![0.0; len];
        for batch in &self.batches {
            for i in 0..len {
                let d = batch[i] - mean[i];
                var[i] += d * d;
            }
        }
        var.iter().map(|v| (v / (b - 1.0) / b).sqrt()).collect()
    }
}

impl Default for BatchMeans {
    fn default() -> Self {
        Self::new()
    }
}

/// Exact time integrals of the occupancy field (and optionally the active
/// field) along a trajectory.
///
/// Site values only change at events that touch them, so each site keeps a
/// lazy `(last value time, integral)` pair: an event flushes only the few
/// sites it changes, and `finish` flushes everything at the window end.
/// Cost: `O(1)` per event plus `O(N)` per window.
pub struct TimeAverager {
    params: SystemParams,
    start: f64,
    last_t_eta: Vec<f64>,
    int_eta: Vec<f64>,
    track_h: bool,
    last_t_h: Vec<f64>,
    int_h: Vec<f64>,
}

impl TimeAverager {
    pub fn new(params: SystemParams, track_h: bool) -> Self {
        let len = params.n - 1;
        TimeAverager {
            params,
            start: 0.0,
            last_t_eta: vec![0.0; len],
            int_eta: vec![0.0; len],
            track_h,
            last_t_h: vec![0.0; if track_h { len } else { 0 }],
            int_h: vec![0.0; if track_h { len } else { 0 }],
        }
    }

    /// Open an averaging window at time `t`.
    pub fn begin(&mut self, t: f64) {
        self.start = t;
        self.last_t_eta.iter_mut().for_each(|v| *v = t);
        self.int_eta.iter_mut().for_each(|v| *v = 0.0);
        self.last_t_h.iter_mut().for_each(|v| *v = t);
        self.int_h.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn flush_eta(&mut self, cfg: &Configuration, x: usize, t: f64) {
        let i = x - 1;
        self.int_eta[i] += cfg.occ(x) as f64 * (t - self.last_t_eta[i]);
        self.last_t_eta[i] = t;
    }

    #[inline]
    fn flush_h(&mut self, cfg: &Configuration, x: usize, t: f64) {
        let i = x - 1;
        self.int_h[i] += active_indicator(cfg, &self.params, x) * (t - self.last_t_h[i]);
        self.last_t_h[i] = t;
    }

    /// Close the window at time `t_end`, returning the per-site time-averaged
    /// occupancy and, when tracked, active indicator.
    pub fn finish(&mut self, t_end: f64, cfg: &Configuration) -> (Vec<f64>, Option<Vec<f64>>) {
        let n = self.params.n;
        for x in 1..n {
            self.flush_eta(cfg, x, t_end);
        }
        if self.track_h {
            for x in 1..n {
                self.flush_h(cfg, x, t_end);
            }
        }
        let span = t_end - self.start;
        assert!(span > 0.0, "empty averaging window");
        let eta = self.int_eta.iter().map(|v| v / span).collect();
        let h = if self.track_h {
            Some(self.int_h.iter().map(|v| v / span).collect())
        } else {
            None
        };
        (eta, h)
    }
}

impl EventHook for TimeAverager {
    #[inline]
    fn on_event(&mut self, t: f64, cfg: &Configuration, changed: &[usize]) {
        let n = self.params.n;
        for &x in changed {
            self.flush_eta(cfg, x, t);
        }
        if self.track_h {
            // h_y reads sites y-1..y+1, so an eta change at x touches h on
            // x-1..x+1; dedupe the overlap when two adjacent sites change
            let lo = changed.iter().min().unwrap().saturating_sub(1).max(1);
            let hi = (changed.iter().max().unwrap() + 1).min(n - 1);
            for y in lo..=hi {
                self.flush_h(cfg, y, t);
            }
        }
    }
}
