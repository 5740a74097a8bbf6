//! Simulation laboratory for the one-dimensional symmetric facilitated
//! exclusion process coupled to kinetically constrained boundary reservoirs.
//!
//! A particle on `{1, ..., N-1}` hops to an empty neighbour at rate 1 when
//! its other neighbour is occupied; reservoirs at the two ends create and
//! (constraint permitting) absorb boundary particles at speed
//! `kappa * N^-theta`. The crate provides:
//!
//! * [`model`]: configurations, jump rates, local currents, the ergodic
//!   component, and deterministic move paths;
//! * [`measures`]: samplers and exact evaluators for the explicit
//!   product-chain measures (grand-canonical, profile-fitting initial law,
//!   affine-field reference measure, equilibrium stationary measure);
//! * [`engine`]: event-driven kinetic Monte Carlo under the diffusively
//!   accelerated generator, plus exact finite-state analysis at small `N`
//!   (enumeration, generator matrix, stationary vector);
//! * [`observables`]: empirical pairings, block averages, and mergeable
//!   profile accumulators with error estimates;
//! * [`pde`]: an explicit finite-difference solver for the limiting fast
//!   diffusion equation `d_t rho = d_u^2 a(rho)` under Dirichlet, Robin, or
//!   Neumann boundary conditions, and the closed-form stationary profiles.

pub mod engine;
pub mod measures;
pub mod model;
pub mod observables;
pub mod pde;
pub mod rng;

pub use model::{Configuration, Move, SystemParams};
pub use rng::RngStream;
