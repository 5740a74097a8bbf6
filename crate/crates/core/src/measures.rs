//! Samplers and exact probability evaluators for the explicit measures on
//! the ergodic component.
//!
//! All four measures share one mechanism: an inhomogeneous two-state Markov
//! chain along the lattice. Site 1 is Bernoulli, an occupied site is
//! followed by a particle with the local *active density*, and an empty
//! site is followed by a particle with probability 1, so every sample is
//! ergodic by construction. The four kinds differ only in the start
//! probability and the active-density field:
//!
//! * grand-canonical at density `rho`: start `rho`, constant field `a(rho)`;
//! * initial law fitting a supercritical profile `rho_ini`: start
//!   `rho_ini(1/N)`, field `a_x = (rho_ini(x/N) + rho_ini((x-1)/N) - 1) / rho_ini((x-1)/N)`;
//! * reference measure for boundary densities `(alpha, beta)`: start
//!   `rho_bar(alpha)`, affine field `a_x = alpha + (beta - alpha)(x-1)/(N-2)`;
//! * equilibrium stationary measure at `alpha`: the grand-canonical measure
//!   at density `rho_bar(alpha)` restricted to the lattice.

use std::fmt;

use crate::model::{active_density, is_ergodic, rho_bar, Configuration};
use crate::rng::RngStream;

/// Which explicit measure a [`MeasureSpec`] describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeasureKind {
    GrandCanonical { rho: f64 },
    InitialLaw,
    Reference { alpha: f64, beta: f64 },
    EquilibriumStationary { alpha: f64 },
}

/// Active-density field driving the chain transitions: `values[x - start_x]`
/// is the probability that site `x` is occupied given site `x-1` is.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveField {
    start_x: usize,
    values: Vec<f64>,
    /// Field increment `(beta - alpha) / (N - 2)` for the reference measure.
    pub eps_n: Option<f64>,
}

impl ActiveField {
    /// Field value `a_x`. Panics outside the stored index range.
    pub fn get(&self, x: usize) -> f64 {
        assert!(x >= self.start_x && x < self.start_x + self.values.len(), "a_{x} not defined");
        self.values[x - self.start_x]
    }

    /// First site index carrying a field value.
    pub fn start_x(&self) -> usize {
        self.start_x
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Invalid measure parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureError(pub String);

impl fmt::Display for MeasureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid measure: {}", self.0)
    }
}

impl std::error::Error for MeasureError {}

/// One of the four explicit measures, with its chain data precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureSpec {
    kind: MeasureKind,
    n: usize,
    start_prob: f64,
    field: ActiveField,
}

impl MeasureSpec {
    /// Grand-canonical measure at supercritical density `rho`, restricted to
    /// the lattice `{1, ..., N-1}`.
    pub fn grand_canonical(n: usize, rho: f64) -> Result<Self, MeasureError> {
        if !(rho > 0.5 && rho <= 1.0) {
            return Err(MeasureError(format!("grand-canonical density {rho} not in (1/2, 1]")));
        }
        let a = active_density(rho);
        Ok(MeasureSpec {
            kind: MeasureKind::GrandCanonical { rho },
            n,
            start_prob: rho,
            field: ActiveField { start_x: 2, values: vec![a; n - 2], eps_n: None },
        })
    }

    /// Law of the inhomogeneous chain fitting a continuous supercritical
    /// profile `rho_ini: [0,1] -> (1/2, 1]`.
    pub fn initial_law(n: usize, profile: impl Fn(f64) -> f64) -> Result<Self, MeasureError> {
        let rho: Vec<f64> = (1..n).map(|x| profile(x as f64 / n as f64)).collect();
        for (i, &r) in rho.iter().enumerate() {
            if !(r > 0.5 && r <= 1.0) {
                return Err(MeasureError(format!(
                    "profile value {r} at x = {} not supercritical in (1/2, 1]",
                    i + 1
                )));
            }
        }
        let values: Vec<f64> = (2..n)
            .map(|x| (rho[x - 1] + rho[x - 2] - 1.0) / rho[x - 2])
            .collect();
        Ok(MeasureSpec {
            kind: MeasureKind::InitialLaw,
            n,
            start_prob: rho[0],
            field: ActiveField { start_x: 2, values, eps_n: None },
        })
    }

    /// Reference measure with affine active-density field interpolating
    /// `alpha` to `beta` across the lattice.
    pub fn reference(n: usize, alpha: f64, beta: f64) -> Result<Self, MeasureError> {
        for (name, v) in [("alpha", alpha), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(MeasureError(format!("{name} = {v} not in (0, 1)")));
            }
        }
        let eps_n = (beta - alpha) / (n - 2) as f64;
        let values: Vec<f64> = (1..n).map(|x| alpha + eps_n * (x - 1) as f64).collect();
        Ok(MeasureSpec {
            kind: MeasureKind::Reference { alpha, beta },
            n,
            start_prob: rho_bar(alpha),
            field: ActiveField { start_x: 1, values, eps_n: Some(eps_n) },
        })
    }

    /// Unique stationary measure of the equilibrium system `alpha = beta`:
    /// the grand-canonical measure at density `rho_bar(alpha)`.
    pub fn equilibrium_stationary(n: usize, alpha: f64) -> Result<Self, MeasureError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MeasureError(format!("alpha = {alpha} not in (0, 1)")));
        }
        Ok(MeasureSpec {
            kind: MeasureKind::EquilibriumStationary { alpha },
            n,
            start_prob: rho_bar(alpha),
            field: ActiveField { start_x: 2, values: vec![alpha; n - 2], eps_n: None },
        })
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Marginal probability that site 1 is occupied.
    pub fn start_prob(&self) -> f64 {
        self.start_prob
    }

    pub fn field(&self) -> &ActiveField {
        &self.field
    }

    /// Transition probability `P(eta_x = 1 | eta_{x-1})` for `2 <= x <= N-1`.
    #[inline]
    fn transition(&self, x: usize, prev_occupied: bool) -> f64 {
        if prev_occupied {
            self.field.get(x)
        } else {
            1.0
        }
    }

    /// Draw one configuration. The output is always ergodic.
    pub fn sample(&self, rng: &mut RngStream) -> Configuration {
        let mut cfg = Configuration::empty(self.n);
        let mut prev = rng.bernoulli(self.start_prob);
        cfg.set(1, prev);
        for x in 2..self.n {
            let occ = if prev { rng.bernoulli(self.field.get(x)) } else { true };
            cfg.set(x, occ);
            prev = occ;
        }
        cfg
    }

    /// Exact probability of `cfg`, zero iff `cfg` is not ergodic (or lies
    /// outside the support for degenerate field values).
    ///
    /// Accumulates in log space: the chain product has `N - 1` factors and
    /// would underflow `f64` near `N ~ 600` in linear space.
    pub fn exact_prob(&self, cfg: &Configuration) -> f64 {
        assert_eq!(cfg.n(), self.n, "configuration size mismatch");
        let mut log_p = 0.0f64;
        let first = cfg.is_occupied(1);
        let p1 = if first { self.start_prob } else { 1.0 - self.start_prob };
        if p1 == 0.0 {
            return 0.0;
        }
        log_p += p1.ln();
        for x in 2..self.n {
            let t = self.transition(x, cfg.is_occupied(x - 1));
            let f = if cfg.is_occupied(x) { t } else { 1.0 - t };
            if f == 0.0 {
                return 0.0;
            }
            log_p += f.ln();
        }
        log_p.exp()
    }
}

/// Grand-canonical marginal probability of a local configuration `sigma` on
/// a box of length `sigma.len()`, evaluated by the chain product (the closed
/// form `(1-rho)(1-a)^{l-1-p} a^{2p-l+1-s1-sl} 1{ergodic}` is numerically
/// fragile when exponents go negative; the two are identical).
pub fn gc_marginal(rho: f64, sigma: &[u8]) -> f64 {
    assert!(!sigma.is_empty(), "box must have length >= 1");
    assert!(rho > 0.5 && rho <= 1.0, "density {rho} not in (1/2, 1]");
    let a = active_density(rho);
    let mut p = if sigma[0] != 0 { rho } else { 1.0 - rho };
    for w in sigma.windows(2) {
        let t = if w[0] != 0 { a } else { 1.0 };
        p *= if w[1] != 0 { t } else { 1.0 - t };
    }
    p
}

/// Density profile `rho_x = P(eta_x = 1)` under the reference measure,
/// by the chain recurrence `rho_1 = rho_bar(alpha)`,
/// `rho_x = 1 - rho_{x-1} + a_x rho_{x-1}`. Index `x - 1` holds site `x`.
pub fn ref_density_profile(alpha: f64, beta: f64, n: usize) -> Vec<f64> {
    let spec = MeasureSpec::reference(n, alpha, beta).expect("valid reference parameters");
    let mut rho = Vec::with_capacity(n - 1);
    rho.push(spec.start_prob);
    for x in 2..n {
        let prev = rho[x - 2];
        rho.push(1.0 - prev + spec.field.get(x) * prev);
    }
    rho
}

/// Detailed-balance defect of the reference measure for the exchange over
/// `{x, x+1}`: `|1 - (c(eta^swap) / c(eta)) (mu(eta^swap) / mu(eta))|`.
///
/// Requires `eta` ergodic with `c_{x,x+1}(eta) > 0`. Vanishes identically
/// when `alpha = beta` and decays like `1/N` otherwise.
pub fn quasi_reversibility_defect(
    alpha: f64,
    beta: f64,
    n: usize,
    x: usize,
    cfg: &Configuration,
) -> f64 {
    use crate::model::{apply_move, bulk_rate, Move, SystemParams};
    assert!(x >= 1 && x <= n - 2, "edge index {x} out of range");
    assert!(is_ergodic(cfg), "configuration must be ergodic");
    let params = SystemParams::new_unchecked(n, alpha, beta, 0.0, 1.0);
    let c_fwd = bulk_rate(cfg, &params, x);
    assert!(c_fwd > 0.0, "edge {x} has zero rate");
    let spec = MeasureSpec::reference(n, alpha, beta).expect("valid reference parameters");
    let swapped = apply_move(cfg, Move::Swap(x));
    let c_bwd = bulk_rate(&swapped, &params, x);
    let mu = spec.exact_prob(cfg);
    let mu_swapped = spec.exact_prob(&swapped);
    (1.0 - (c_bwd / c_fwd) * (mu_swapped / mu)).abs()
}

/// Monte Carlo estimate of `Cov(eta_x, eta_y)` under `spec` from
/// `n_samples` independent draws.
pub fn covariance_decay(
    spec: &MeasureSpec,
    x: usize,
    y: usize,
    n_samples: usize,
    rng: &mut RngStream,
) -> f64 {
    assert!(x <= y, "need x <= y");
    let mut sx = 0.0;
    let mut sy = 0.0;
    let mut sxy = 0.0;
    for _ in 0..n_samples {
        let cfg = spec.sample(rng);
        let ex = cfg.occ(x) as f64;
        let ey = cfg.occ(y) as f64;
        sx += ex;
        sy += ey;
        sxy += ex * ey;
    }
    let m = n_samples as f64;
    sxy / m - (sx / m) * (sy / m)
}

/// Exact marginal `P(eta_x = 1)` under `spec`, by the chain recurrence.
pub fn exact_marginal(spec: &MeasureSpec, x: usize) -> f64 {
    assert!(x >= 1 && x < spec.n);
    let mut p = spec.start_prob;
    for z in 2..=x {
        p = 1.0 - p + spec.field.get(z) * p;
    }
    p
}

/// Exact covariance `Cov(eta_x, eta_y)` under `spec` by propagating the
/// chain's 2x2 transition matrices, with no sampling noise; this matters when
/// probing the exponentially small tail of the correlation decay.
pub fn exact_covariance(spec: &MeasureSpec, x: usize, y: usize) -> f64 {
    assert!(x <= y && x >= 1 && y < spec.n);
    let rho_x = exact_marginal(spec, x);
    if x == y {
        return rho_x * (1.0 - rho_x);
    }
    // P(eta_y = 1 | eta_x = 1)
    let mut p = 1.0f64;
    for z in (x + 1)..=y {
        p = 1.0 - p + spec.field.get(z) * p;
    }
    let rho_y = exact_marginal(spec, y);
    rho_x * (p - rho_y)
}

/// Closed-form grand-canonical marginal, valid when the exponent
/// `l - 1 - p` is non-negative. Retained as an independent cross-check of
/// [`gc_marginal`]; both routes agree to machine precision on their common
/// domain.
pub fn gc_marginal_closed_form(rho: f64, sigma: &[u8]) -> Option<f64> {
    let l = sigma.len();
    let p: usize = sigma.iter().map(|&s| s as usize).sum();
    let ergodic = sigma.windows(2).all(|w| w[0] + w[1] >= 1);
    if !ergodic {
        return Some(0.0);
    }
    let exp_holes = l as i32 - 1 - p as i32;
    let exp_a = 2 * p as i32 - l as i32 + 1 - sigma[0] as i32 - sigma[l - 1] as i32;
    if exp_holes < 0 || exp_a < 0 {
        return None;
    }
    let a = active_density(rho);
    Some((1.0 - rho) * (1.0 - a).powi(exp_holes) * a.powi(exp_a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        active_density, apply_move, boundary_rate_left, boundary_rate_right, rho_bar, Move,
        SystemParams,
    };

    fn all_configs(n: usize) -> impl Iterator<Item = Configuration> {
        (0..(1u32 << (n - 1))).map(move |bits| {
            let occ: Vec<u8> = (0..n - 1).map(|i| ((bits >> i) & 1) as u8).collect();
            Configuration::from_occupancies(n, &occ)
        })
    }

    #[test]
    fn reference_field_is_affine_with_exact_endpoints() {
        let spec = MeasureSpec::reference(10, 0.3, 0.8).unwrap();
        let f = spec.field();
        assert_eq!(f.get(1), 0.3);
        assert_eq!(f.get(9), 0.8);
        let eps = f.eps_n.unwrap();
        assert!((eps - 0.5 / 8.0).abs() < 1e-15);
        for x in 2..=9 {
            assert!((f.get(x) - f.get(x - 1) - eps).abs() < 1e-15);
        }
    }

    #[test]
    fn initial_law_constant_profile_equals_grand_canonical() {
        let n = 12;
        let rho = 0.72;
        let init = MeasureSpec::initial_law(n, |_| rho).unwrap();
        let gc = MeasureSpec::grand_canonical(n, rho).unwrap();
        for cfg in all_configs(n) {
            let a = init.exact_prob(&cfg);
            let b = gc.exact_prob(&cfg);
            assert!((a - b).abs() < 1e-14, "{cfg:?}: {a} vs {b}");
        }
    }

    #[test]
    fn initial_law_rejects_subcritical_profiles() {
        assert!(MeasureSpec::initial_law(64, |u| 0.4 + 0.2 * u).is_err());
        assert!(MeasureSpec::grand_canonical(8, 0.5).is_err());
    }

    #[test]
    fn samples_are_ergodic_and_match_marginals() {
        let n = 64;
        let mut rng = RngStream::new(7);
        for spec in [
            MeasureSpec::grand_canonical(n, 0.75).unwrap(),
            MeasureSpec::initial_law(n, |u| 0.6 + 0.3 * u).unwrap(),
            MeasureSpec::reference(n, 0.3, 0.8).unwrap(),
            MeasureSpec::equilibrium_stationary(n, 0.4).unwrap(),
        ] {
            for _ in 0..25_000 {
                assert!(is_ergodic(&spec.sample(&mut rng)));
            }
        }
        // empirical site marginals of the grand-canonical sampler: constant
        // rho within binomial error
        let spec = MeasureSpec::grand_canonical(n, 0.75).unwrap();
        let m = 40_000usize;
        let mut counts = vec![0u32; n - 1];
        for _ in 0..m {
            let cfg = spec.sample(&mut rng);
            for x in 1..n {
                counts[x - 1] += cfg.occ(x) as u32;
            }
        }
        let sigma = (0.75f64 * 0.25 / m as f64).sqrt();
        for (i, &c) in counts.iter().enumerate() {
            let p = c as f64 / m as f64;
            assert!((p - 0.75).abs() < 4.5 * sigma, "site {} marginal {p}", i + 1);
        }
    }

    #[test]
    fn initial_law_marginals_follow_profile() {
        // P(eta_x = 1) = rho_ini(x/N) exactly, by chain induction
        let n = 32;
        let profile = |u: f64| 0.6 + 0.3 * u;
        let spec = MeasureSpec::initial_law(n, profile).unwrap();
        for x in 1..n {
            let expect = profile(x as f64 / n as f64);
            assert!((exact_marginal(&spec, x) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_prob_zero_iff_non_ergodic() {
        let n = 10;
        let specs = [
            MeasureSpec::grand_canonical(n, 0.8).unwrap(),
            MeasureSpec::initial_law(n, |u| 0.55 + 0.4 * u).unwrap(),
            MeasureSpec::reference(n, 0.3, 0.8).unwrap(),
            MeasureSpec::equilibrium_stationary(n, 0.5).unwrap(),
        ];
        for cfg in all_configs(n) {
            for spec in &specs {
                let p = spec.exact_prob(&cfg);
                if is_ergodic(&cfg) {
                    assert!(p > 0.0, "{cfg:?} should have positive probability");
                } else {
                    assert_eq!(p, 0.0, "{cfg:?} should be excluded");
                }
            }
        }
    }

    #[test]
    fn exact_prob_normalizes() {
        for n in [8, 11, 14] {
            let specs = [
                MeasureSpec::grand_canonical(n, 0.75).unwrap(),
                MeasureSpec::initial_law(n, |u| 0.6 + 0.3 * u).unwrap(),
                MeasureSpec::reference(n, 0.3, 0.8).unwrap(),
                MeasureSpec::equilibrium_stationary(n, 0.4).unwrap(),
            ];
            for spec in &specs {
                let total: f64 = all_configs(n).map(|c| spec.exact_prob(&c)).sum();
                assert!((total - 1.0).abs() < 1e-12, "N={n} total={total}");
            }
        }
    }

    #[test]
    fn gc_marginal_examples() {
        // two-site box (1,1): rho * a(rho) = 2 rho - 1
        assert!((gc_marginal(0.75, &[1, 1]) - 0.5).abs() < 1e-15);
        // single site: rho
        assert!((gc_marginal(0.75, &[1]) - 0.75).abs() < 1e-15);
        // non-ergodic box: zero
        assert_eq!(gc_marginal(0.75, &[1, 0, 0, 1]), 0.0);
    }

    #[test]
    fn gc_marginal_agrees_with_closed_form() {
        let rho = 0.68;
        for l in 1..=9usize {
            for bits in 0..(1u32 << l) {
                let sigma: Vec<u8> = (0..l).map(|i| ((bits >> i) & 1) as u8).collect();
                if let Some(cf) = gc_marginal_closed_form(rho, &sigma) {
                    let chain = gc_marginal(rho, &sigma);
                    assert!((cf - chain).abs() < 1e-12, "sigma {sigma:?}: {cf} vs {chain}");
                }
            }
        }
    }

    #[test]
    fn gc_marginal_box_sums_to_one() {
        for l in 1..=10usize {
            let total: f64 = (0..(1u32 << l))
                .map(|bits| {
                    let sigma: Vec<u8> = (0..l).map(|i| ((bits >> i) & 1) as u8).collect();
                    gc_marginal(0.75, &sigma)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ref_density_profile_recurrence() {
        // alpha = beta: constant profile at rho_bar(alpha)
        let rho = ref_density_profile(0.4, 0.4, 32);
        for r in &rho {
            assert!((r - rho_bar(0.4)).abs() < 1e-14);
        }
        // N = 4, alpha = 0.3, beta = 0.8: a_2 = 0.55 and the hand-evaluated
        // second step of the recurrence
        let rho = ref_density_profile(0.3, 0.8, 4);
        let r1 = 1.0 / 1.7;
        assert!((rho[0] - r1).abs() < 1e-15);
        assert!((rho[1] - (1.0 - r1 + 0.55 * r1)).abs() < 1e-15);
        // agrees with Monte Carlo marginals of the sampler
        let n = 24;
        let spec = MeasureSpec::reference(n, 0.3, 0.8).unwrap();
        let profile = ref_density_profile(0.3, 0.8, n);
        let mut rng = RngStream::new(31);
        let m = 60_000usize;
        let mut counts = vec![0u32; n - 1];
        for _ in 0..m {
            let cfg = spec.sample(&mut rng);
            for x in 1..n {
                counts[x - 1] += cfg.occ(x) as u32;
            }
        }
        for x in 1..n {
            let p = counts[x - 1] as f64 / m as f64;
            let sigma = (profile[x - 1] * (1.0 - profile[x - 1]) / m as f64).sqrt();
            assert!((p - profile[x - 1]).abs() < 4.5 * sigma, "site {x}: {p}");
        }
    }

    #[test]
    fn ref_density_close_to_local_equilibrium() {
        // max_x |rho_x - 1/(2 - a_x)| <= C0 / N with stable C0 as N doubles
        let mut c0 = Vec::new();
        for n in [64usize, 128, 256] {
            let spec = MeasureSpec::reference(n, 0.3, 0.8).unwrap();
            let rho = ref_density_profile(0.3, 0.8, n);
            let max_dev = (1..n)
                .map(|x| (rho[x - 1] - rho_bar(spec.field().get(x))).abs())
                .fold(0.0f64, f64::max);
            c0.push(max_dev * n as f64);
        }
        for w in c0.windows(2) {
            let ratio = w[1] / w[0];
            assert!((0.5..=2.0).contains(&ratio), "C0 sequence {c0:?}");
        }
    }

    #[test]
    fn quasi_reversibility_vanishes_at_equilibrium() {
        let n = 10;
        let params = SystemParams::new_unchecked(n, 0.45, 0.45, 0.0, 1.0);
        for cfg in all_configs(n).filter(is_ergodic) {
            for x in 1..=n - 2 {
                if crate::model::bulk_rate(&cfg, &params, x) > 0.0 {
                    let d = quasi_reversibility_defect(0.45, 0.45, n, x, &cfg);
                    assert!(d < 1e-12, "defect {d} at x={x} cfg {cfg:?}");
                }
            }
        }
    }

    #[test]
    fn quasi_reversibility_defect_scales_like_inverse_n() {
        let scan = |n: usize| -> f64 {
            let params = SystemParams::new_unchecked(n, 0.3, 0.8, 0.0, 1.0);
            let mut max_d = 0.0f64;
            for cfg in all_configs(n).filter(is_ergodic) {
                for x in 1..=n - 2 {
                    if crate::model::bulk_rate(&cfg, &params, x) > 0.0 {
                        max_d = max_d.max(quasi_reversibility_defect(0.3, 0.8, n, x, &cfg));
                    }
                }
            }
            max_d
        };
        let d8 = scan(8);
        let d16 = scan(16);
        let ratio = (8.0 * d8) / (16.0 * d16);
        assert!((0.5..=2.0).contains(&ratio), "N*defect ratio {ratio}");
    }

    #[test]
    fn boundary_flip_balance() {
        // Right edge: b_r(eta) mu(eta) = b_r(eta^flip) mu(eta^flip) exactly.
        // Left edge: the chain construction starts at site 1, so the balance
        // holds only up to the field increment: the flip ratio is a_2/alpha,
        // i.e. a defect of order 1/N that vanishes identically when
        // alpha = beta.
        let n = 12;
        let (alpha, beta) = (0.3, 0.8);
        let params = SystemParams::new_unchecked(n, alpha, beta, 0.0, 1.0);
        let spec = MeasureSpec::reference(n, alpha, beta).unwrap();
        let eps_n = spec.field().eps_n.unwrap();
        for cfg in all_configs(n).filter(is_ergodic) {
            let b = boundary_rate_right(&cfg, &params);
            if b > 0.0 {
                let flipped = apply_move(&cfg, Move::FlipRight);
                let lhs = b * spec.exact_prob(&cfg);
                let rhs = boundary_rate_right(&flipped, &params) * spec.exact_prob(&flipped);
                assert!((lhs - rhs).abs() < 1e-15, "right edge: {lhs} vs {rhs}");
            }
            let b = boundary_rate_left(&cfg, &params);
            if b > 0.0 {
                let flipped = apply_move(&cfg, Move::FlipLeft);
                let lhs = b * spec.exact_prob(&cfg);
                let rhs = boundary_rate_left(&flipped, &params) * spec.exact_prob(&flipped);
                let rel = (lhs / rhs).max(rhs / lhs) - 1.0;
                let expected = (alpha + eps_n) / alpha - 1.0;
                assert!(
                    (rel - expected).abs() < 1e-12,
                    "left edge relative defect {rel}, expected {expected}"
                );
            }
        }
        // at equilibrium both edges balance exactly
        let spec = MeasureSpec::reference(n, 0.4, 0.4).unwrap();
        let params = SystemParams::new_unchecked(n, 0.4, 0.4, 0.0, 1.0);
        type RateFn = fn(&Configuration, &SystemParams) -> f64;
        for cfg in all_configs(n).filter(is_ergodic) {
            for (rate, mv) in [
                (boundary_rate_left as RateFn, Move::FlipLeft),
                (boundary_rate_right as RateFn, Move::FlipRight),
            ] {
                let b = rate(&cfg, &params);
                if b > 0.0 {
                    let flipped = apply_move(&cfg, mv);
                    let lhs = b * spec.exact_prob(&cfg);
                    let rhs = rate(&flipped, &params) * spec.exact_prob(&flipped);
                    assert!((lhs - rhs).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn equilibrium_identity() {
        // EquilibriumStationary(alpha) coincides with
        // GrandCanonical(rho_bar(alpha)) configuration by configuration.
        let n = 12;
        let eq = MeasureSpec::equilibrium_stationary(n, 0.35).unwrap();
        let gc = MeasureSpec::grand_canonical(n, rho_bar(0.35)).unwrap();
        for cfg in all_configs(n) {
            assert!((eq.exact_prob(&cfg) - gc.exact_prob(&cfg)).abs() < 1e-15);
        }
    }

    #[test]
    fn covariance_examples() {
        let n = 32;
        let mut rng = RngStream::new(11);
        let spec = MeasureSpec::grand_canonical(n, 0.75).unwrap();
        // variance at a site
        let v = covariance_decay(&spec, 10, 10, 50_000, &mut rng);
        assert!((v - 0.75 * 0.25).abs() < 0.01, "var {v}");
        // adjacent sites: rho a - rho^2 = rho (a - rho) = -1/16 at rho = 3/4
        let c = covariance_decay(&spec, 10, 11, 50_000, &mut rng);
        assert!((c - (-0.0625)).abs() < 0.01, "cov {c}");
        // exact evaluation matches the analytic two-point value
        assert!((exact_covariance(&spec, 10, 11) + 0.0625).abs() < 1e-13);
        let rho = exact_marginal(&spec, 10);
        assert!((exact_covariance(&spec, 10, 10) - rho * (1.0 - rho)).abs() < 1e-13);
    }

    #[test]
    fn exact_covariance_matches_enumeration() {
        let n = 10;
        let spec = MeasureSpec::reference(n, 0.3, 0.8).unwrap();
        for (x, y) in [(1, 2), (2, 5), (3, 9), (4, 4)] {
            let mut exy = 0.0;
            let mut ex = 0.0;
            let mut ey = 0.0;
            for cfg in all_configs(n) {
                let p = spec.exact_prob(&cfg);
                exy += p * (cfg.occ(x) * cfg.occ(y)) as f64;
                ex += p * cfg.occ(x) as f64;
                ey += p * cfg.occ(y) as f64;
            }
            let brute = exy - ex * ey;
            let fast = exact_covariance(&spec, x, y);
            assert!((brute - fast).abs() < 1e-12, "({x},{y}): {brute} vs {fast}");
        }
    }

    #[test]
    fn active_identity_under_grand_canonical() {
        // E[h_x] = a(rho) at interior sites, exactly under the chain measure
        let n = 12;
        let rho = 0.7;
        let spec = MeasureSpec::grand_canonical(n, rho).unwrap();
        let params = SystemParams::new_unchecked(n, 0.5, 0.5, 0.0, 1.0);
        let a = active_density(rho);
        for x in 2..=n - 2 {
            let mut eh = 0.0;
            for cfg in all_configs(n) {
                eh += spec.exact_prob(&cfg) * crate::model::active_indicator(&cfg, &params, x);
            }
            assert!((eh - a).abs() < 1e-12, "x={x}: E[h]={eh} vs a={a}");
        }
    }
}
