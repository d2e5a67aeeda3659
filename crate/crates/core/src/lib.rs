//! Planar Coulomb gas toolkit.
//!
//! - [`potential`]: external fields `Q` and their `u/n` perturbations.
//! - [`equilibrium`]: equilibrium measure, droplet, obstacle function, `c₀`, `a₀`, `γ`, `γ(Q)`.
//! - [`sampler`]: Metropolis sampling of the Gibbs measure `∝ e^{−βH_n}` and per-configuration observables.
//! - [`determinantal`]: exact `β = 1` quantities for radial potentials.
//! - [`analysis`]: tail, localization, decay, convergence and energy reports.
//! - [`cli`]: configuration, artifacts and the `cgas` subcommands.

pub mod analysis;
pub mod cli;
pub mod determinantal;
pub mod equilibrium;
pub mod error;
pub mod potential;
pub mod quad;
pub mod sampler;

pub use error::{Error, Result};
pub use num_complex::Complex64;
