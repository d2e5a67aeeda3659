//! Verdicts on sample batches and exact ensembles: tails, localization,
//! decay fits, empirical-measure convergence, energies and brute-force
//! partition functions.

mod convergence;
mod energy;
mod histogram;
pub mod identities;
mod stats;
mod tail;

pub use convergence::{empirical_measure_test, ConvergenceReport, ConvergenceRow, MeasureAccumulator, TestFunction};
pub use energy::{
    energy_continuous, energy_discrete, entropy_check, entropy_rhs, lq_kernel, partition_bruteforce, EnergyReport,
    EntropyCheck, PartitionEstimate, PartitionQuadrature,
};
pub use histogram::{decay_fit, CartesianHistogram, DecayFit, IntensityField, RadialHistogram, RadialProfile};
pub use stats::{
    blocked_standard_error, ks_statistic, mean, median, split_rhat, variance, wilson_interval, Z95,
};
pub use tail::{
    dn_tail, exterior_rate, large_r_tail, localization_scaling, localization_scaling_samples, tail_threshold,
    LargeRReport, LargeRRow, ScalingReport, ScalingRow, TailReport, TailRow,
};
