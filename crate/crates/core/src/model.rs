//! Microscopic model kernel: configurations, jump rates, local functions,
//! ergodicity, and deterministic move paths.
//!
//! The lattice is `{1, ..., N-1}`; sites `0` and `N` are virtual reservoir
//! positions whose occupancies are fixed by convention to the reservoir
//! densities `alpha` and `beta`. All rate formulas below return unscaled
//! values; the simulation engine owns the diffusive `N^2` and boundary
//! `kappa * N^-theta` time scalings.

use std::fmt;

/// Absolute tolerance accepted at the endpoints of the density domains.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Model constants: lattice size parameter `N` (the bulk is `{1,..,N-1}`),
/// reservoir densities `alpha`, `beta`, and boundary speed exponents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Lattice size parameter `N` (there are `N-1` sites).
    pub n: usize,
    /// Left reservoir density, in `(0, 1)`.
    pub alpha: f64,
    /// Right reservoir density, in `(0, 1)`.
    pub beta: f64,
    /// Boundary speed exponent (any real).
    pub theta: f64,
    /// Boundary speed prefactor, positive.
    pub kappa: f64,
}

/// Parameter validation failure.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamError(pub String);

impl fmt::Display for ParamError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameters: {}", self.0)
    }
}

impl std::error::Error for ParamError {}

impl SystemParams {
    pub fn new(n: usize, alpha: f64, beta: f64, theta: f64, kappa: f64) -> Result<Self, ParamError> {
        if n < 4 {
            return Err(ParamError(format!("N = {n}, need N >= 4")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ParamError(format!("alpha = {alpha}, need 0 < alpha < 1")));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(ParamError(format!("beta = {beta}, need 0 < beta < 1")));
        }
        if kappa.is_nan() || kappa <= 0.0 {
            return Err(ParamError(format!("kappa = {kappa}, need kappa > 0")));
        }
        let p = SystemParams { n, alpha, beta, theta, kappa };
        let speed = p.boundary_speed();
        if !(speed.is_finite() && speed > 0.0) {
            return Err(ParamError(format!("boundary speed kappa * N^-theta = {speed}")));
        }
        Ok(p)
    }

    /// Skips validation. Useful for probing rate arithmetic at parameter
    /// values outside the model's stated range (e.g. `alpha = 1`).
    pub fn new_unchecked(n: usize, alpha: f64, beta: f64, theta: f64, kappa: f64) -> Self {
        SystemParams { n, alpha, beta, theta, kappa }
    }

    /// The boundary exchange speed `kappa * N^-theta`.
    #[inline]
    pub fn boundary_speed(&self) -> f64 {
        self.kappa * (self.n as f64).powf(-self.theta)
    }
}

/// Occupancy of the bulk `{1, ..., N-1}` as a packed bit vector
/// (bit `x-1` holds site `x`; 1 = particle).
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    n: usize,
    words: Vec<u64>,
}

impl Configuration {
    /// All sites empty.
    pub fn empty(n: usize) -> Self {
        assert!(n >= 2);
        Configuration { n, words: vec![0; (n - 1).div_ceil(64)] }
    }

    /// All sites occupied (the configuration written `1` in full).
    pub fn full(n: usize) -> Self {
        let mut c = Configuration::empty(n);
        for x in 1..n {
            c.set(x, true);
        }
        c
    }

    /// Build from explicit occupancies for sites `1..=N-1`.
    pub fn from_occupancies(n: usize, occ: &[u8]) -> Self {
        assert_eq!(occ.len(), n - 1, "occupancy length must be N-1");
        let mut c = Configuration::empty(n);
        for (i, &o) in occ.iter().enumerate() {
            c.set(i + 1, o != 0);
        }
        c
    }

    /// The lattice size parameter `N`.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sites, `N - 1`.
    #[inline]
    pub fn num_sites(&self) -> usize {
        self.n - 1
    }

    /// Occupancy of site `x in 1..=N-1` as 0 or 1.
    #[inline]
    pub fn occ(&self, x: usize) -> u64 {
        debug_assert!(x >= 1 && x < self.n, "site {x} out of range");
        let b = x - 1;
        (self.words[b >> 6] >> (b & 63)) & 1
    }

    #[inline]
    pub fn is_occupied(&self, x: usize) -> bool {
        self.occ(x) == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, occupied: bool) {
        debug_assert!(x >= 1 && x < self.n, "site {x} out of range");
        let b = x - 1;
        if occupied {
            self.words[b >> 6] |= 1 << (b & 63);
        } else {
            self.words[b >> 6] &= !(1 << (b & 63));
        }
    }

    #[inline]
    pub fn flip(&mut self, x: usize) {
        let b = x - 1;
        self.words[b >> 6] ^= 1 << (b & 63);
    }

    /// Number of particles in the bulk.
    pub fn particle_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Occupancy vector for sites `1..=N-1`.
    pub fn occupancies(&self) -> Vec<u8> {
        (1..self.n).map(|x| self.occ(x) as u8).collect()
    }

    /// Effective occupancy with the reservoir conventions
    /// `eta_0 = alpha`, `eta_N = beta`; real sites give exactly 0 or 1.
    #[inline]
    pub fn eta(&self, params: &SystemParams, x: usize) -> f64 {
        if x == 0 {
            params.alpha
        } else if x == self.n {
            params.beta
        } else {
            self.occ(x) as f64
        }
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in 1..self.n {
            write!(f, "{}", self.occ(x))?;
        }
        Ok(())
    }
}

/// A transition of the dynamics: a nearest-neighbour exchange over the edge
/// `{x, x+1}` or a creation/annihilation flip at one of the two boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    /// Exchange over the edge `{x, x+1}`, `1 <= x <= N-2`.
    Swap(usize),
    /// Flip site 1 (reservoir exchange on the left).
    FlipLeft,
    /// Flip site `N-1` (reservoir exchange on the right).
    FlipRight,
}

/// Bulk jump rate over the edge `{x, x+1}` for `1 <= x <= N-2`:
/// `eta_{x-1} eta_x (1 - eta_{x+1}) + (1 - eta_x) eta_{x+1} eta_{x+2}`,
/// with the reservoir conventions at the virtual sites.
///
/// Takes values in `{0, 1}` away from the boundary edges and in
/// `{0, alpha, 1}` (resp. `{0, beta, 1}`) at `x = 1` (resp. `x = N-2`).
pub fn bulk_rate(cfg: &Configuration, params: &SystemParams, x: usize) -> f64 {
    assert!(x >= 1 && x <= cfg.n - 2, "edge index {x} out of range 1..={}", cfg.n - 2);
    let e = |y| cfg.eta(params, y);
    e(x - 1) * e(x) * (1.0 - e(x + 1)) + (1.0 - e(x)) * e(x + 1) * e(x + 2)
}

/// Left reservoir rate `alpha (1 - eta_1) + (1 - alpha) eta_1 eta_2`.
pub fn boundary_rate_left(cfg: &Configuration, params: &SystemParams) -> f64 {
    let e1 = cfg.occ(1) as f64;
    let e2 = cfg.occ(2) as f64;
    params.alpha * (1.0 - e1) + (1.0 - params.alpha) * e1 * e2
}

/// Right reservoir rate `beta (1 - eta_{N-1}) + (1 - beta) eta_{N-1} eta_{N-2}`.
pub fn boundary_rate_right(cfg: &Configuration, params: &SystemParams) -> f64 {
    let n = cfg.n;
    let e1 = cfg.occ(n - 1) as f64;
    let e2 = cfg.occ(n - 2) as f64;
    params.beta * (1.0 - e1) + (1.0 - params.beta) * e1 * e2
}

/// The local function `h_x` for `0 <= x <= N`:
/// `h_0 = alpha`, `h_N = beta`, and otherwise
/// `eta_{x-1} eta_x + eta_x eta_{x+1} - eta_{x-1} eta_x eta_{x+1}`
/// with the reservoir conventions. For `2 <= x <= N-2` this is the 0/1
/// indicator that site `x` holds an active particle.
pub fn active_indicator(cfg: &Configuration, params: &SystemParams, x: usize) -> f64 {
    assert!(x <= cfg.n, "site {x} out of range 0..={}", cfg.n);
    if x == 0 {
        return params.alpha;
    }
    if x == cfg.n {
        return params.beta;
    }
    let e = |y| cfg.eta(params, y);
    let (l, c, r) = (e(x - 1), e(x), e(x + 1));
    l * c + c * r - l * c * r
}

/// Instantaneous particle current through the edge `{x, x+1}` for
/// `0 <= x <= N-1`. In the bulk this is `c_{x,x+1} (eta_x - eta_{x+1})`,
/// which equals `h_x - h_{x+1}` identically; at the two reservoir edges it
/// carries the boundary speed factor `kappa N^-theta`.
pub fn instantaneous_current(cfg: &Configuration, params: &SystemParams, x: usize) -> f64 {
    assert!(x < cfg.n, "edge index {x} out of range 0..={}", cfg.n - 1);
    let n = cfg.n;
    if x == 0 {
        params.boundary_speed() * boundary_rate_left(cfg, params) * (1.0 - 2.0 * cfg.occ(1) as f64)
    } else if x == n - 1 {
        params.boundary_speed()
            * boundary_rate_right(cfg, params)
            * (2.0 * cfg.occ(n - 1) as f64 - 1.0)
    } else {
        bulk_rate(cfg, params, x) * (cfg.occ(x) as f64 - cfg.occ(x + 1) as f64)
    }
}

/// True iff no two adjacent sites are both empty.
pub fn is_ergodic(cfg: &Configuration) -> bool {
    let len = cfg.num_sites();
    let words = &cfg.words;
    for (i, &w) in words.iter().enumerate() {
        let mut holes = !w;
        // mask out bits beyond the last site in the final word
        let upto = len.saturating_sub(i * 64).min(64);
        if upto == 0 {
            break;
        }
        if upto < 64 {
            holes &= (1u64 << upto) - 1;
        }
        if holes & (holes >> 1) != 0 {
            return false;
        }
        // pair straddling the word boundary
        if upto == 64 && i + 1 < words.len() {
            let next_len = len.saturating_sub((i + 1) * 64).min(64);
            if next_len > 0 {
                let last = (w >> 63) & 1;
                let first = words[i + 1] & 1;
                if last == 0 && first == 0 {
                    return false;
                }
            }
        }
    }
    true
}

/// Apply a move, returning the new configuration. Swaps exchange the two
/// edge occupancies; flips toggle a boundary site. Rates are not consulted:
/// applying the same swap twice is the identity.
pub fn apply_move(cfg: &Configuration, mv: Move) -> Configuration {
    let mut out = cfg.clone();
    apply_move_in_place(&mut out, mv);
    out
}

/// In-place variant of [`apply_move`].
pub fn apply_move_in_place(cfg: &mut Configuration, mv: Move) {
    match mv {
        Move::Swap(x) => {
            assert!(x >= 1 && x <= cfg.n - 2, "swap edge {x} out of range");
            let (a, b) = (cfg.is_occupied(x), cfg.is_occupied(x + 1));
            cfg.set(x, b);
            cfg.set(x + 1, a);
        }
        Move::FlipLeft => cfg.flip(1),
        Move::FlipRight => {
            let n = cfg.n;
            cfg.flip(n - 1);
        }
    }
}

/// Active density `a(rho) = (2 rho - 1) / rho` for `rho in [1/2, 1]`.
///
/// Panics if `rho` lies outside the domain by more than `1e-12`; values
/// within the tolerance band are clamped to the domain first.
pub fn active_density(rho: f64) -> f64 {
    assert!(
        (0.5 - DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&rho),
        "density {rho} outside [1/2, 1]"
    );
    let rho = rho.clamp(0.5, 1.0);
    (2.0 * rho - 1.0) / rho
}

/// Inverse of [`active_density`]: `rho_bar(a) = 1 / (2 - a)` for `a in [0, 1]`.
pub fn rho_bar(a: f64) -> f64 {
    assert!((-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&a), "active density {a} outside [0, 1]");
    let a = a.clamp(0.0, 1.0);
    1.0 / (2.0 - a)
}

/// Failure of a path-construction precondition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathError {
    /// The input configuration has two adjacent empty sites.
    NotErgodic,
    /// The exchanged configuration `eta^{origin, origin+ell}` is not ergodic.
    SwappedNotErgodic,
    /// `origin` does not hold a particle.
    OriginNotOccupied,
    /// `origin + ell` is not empty.
    TargetNotEmpty,
    /// Indices leave the interior `2 <= origin`, `origin + ell <= N-2`, `ell >= 2`.
    OutOfRange,
}

impl fmt::Display for PathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            PathError::NotErgodic => "configuration is not ergodic",
            PathError::SwappedNotErgodic => "exchanged configuration is not ergodic",
            PathError::OriginNotOccupied => "origin site is not occupied",
            PathError::TargetNotEmpty => "target site is not empty",
            PathError::OutOfRange => "path indices outside the interior of the lattice",
        };
        f.write_str(msg)
    }
}

impl std::error::Error for PathError {}

/// Constructive path from an ergodic configuration to the full one,
/// every move having strictly positive rate when applied in order.
///
/// Sweeps left to right: the first empty site is filled either by a
/// reservoir creation (site 1) or by letting its left neighbour jump in,
/// which the kinetic constraint allows because every site to the left is
/// already occupied.
pub fn irreducibility_path(cfg: &Configuration) -> Result<Vec<Move>, PathError> {
    if !is_ergodic(cfg) {
        return Err(PathError::NotErgodic);
    }
    let mut work = cfg.clone();
    let mut moves = Vec::new();
    loop {
        let first_empty = (1..work.n).find(|&x| !work.is_occupied(x));
        let Some(x) = first_empty else { break };
        let mv = if x == 1 { Move::FlipLeft } else { Move::Swap(x - 1) };
        apply_move_in_place(&mut work, mv);
        moves.push(mv);
    }
    Ok(moves)
}

/// Deterministic edge sequence of length exactly `3*ell - 4` that carries the
/// particle at `origin` into the hole at `origin + ell` when replayed with
/// the skip rule (a listed exchange whose rate vanishes is skipped).
///
/// Requires interior indices (`2 <= origin`, `origin + ell <= N-2`,
/// `ell >= 2`), `eta_origin = 1`, `eta_{origin+ell} = 0`, and both the input
/// and the exchanged configuration ergodic. Three sweeps: the particle next
/// to the origin crosses to the hole, a second particle crosses to form a
/// particle-hole pair, and the pair travels back to the origin.
pub fn long_jump_path(
    cfg: &Configuration,
    origin: usize,
    ell: usize,
) -> Result<Vec<Move>, PathError> {
    let n = cfg.n;
    if ell < 2 || origin < 2 || origin + ell > n - 2 {
        return Err(PathError::OutOfRange);
    }
    if !cfg.is_occupied(origin) {
        return Err(PathError::OriginNotOccupied);
    }
    if cfg.is_occupied(origin + ell) {
        return Err(PathError::TargetNotEmpty);
    }
    if !is_ergodic(cfg) {
        return Err(PathError::NotErgodic);
    }
    let mut swapped = cfg.clone();
    swapped.set(origin, false);
    swapped.set(origin + ell, true);
    if !is_ergodic(&swapped) {
        return Err(PathError::SwappedNotErgodic);
    }

    let mut moves = Vec::with_capacity(3 * ell - 4);
    for k in 1..ell {
        moves.push(Move::Swap(origin + k));
    }
    for k in 0..=ell - 2 {
        moves.push(Move::Swap(origin + k));
    }
    if ell >= 3 {
        for k in (0..=ell - 3).rev() {
            moves.push(Move::Swap(origin + k));
        }
    }
    debug_assert_eq!(moves.len(), 3 * ell - 4);
    Ok(moves)
}

/// Replay a move list with the skip rule: a swap fires only when its bulk
/// rate is positive, a flip only when its boundary rate is positive.
/// Returns the final configuration.
pub fn replay_with_skip(cfg: &Configuration, params: &SystemParams, moves: &[Move]) -> Configuration {
    let mut work = cfg.clone();
    for &mv in moves {
        let rate = match mv {
            Move::Swap(x) => bulk_rate(&work, params, x),
            Move::FlipLeft => boundary_rate_left(&work, params),
            Move::FlipRight => boundary_rate_right(&work, params),
        };
        if rate > 0.0 {
            apply_move_in_place(&mut work, mv);
        }
    }
    work
}

/// Rate of a move in the unscaled generator (bulk rate or boundary rate;
/// the engine multiplies flips by `kappa N^-theta` and everything by `N^2`).
pub fn move_rate(cfg: &Configuration, params: &SystemParams, mv: Move) -> f64 {
    match mv {
        Move::Swap(x) => bulk_rate(cfg, params, x),
        Move::FlipLeft => boundary_rate_left(cfg, params),
        Move::FlipRight => boundary_rate_right(cfg, params),
    }
}
