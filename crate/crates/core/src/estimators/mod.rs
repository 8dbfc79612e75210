//! Monte Carlo experiments on sampled metrics.
//!
//! Every estimator is a deterministic function of its parameters and master
//! seed: replicate `r` draws from its own labelled stream, replicates run in
//! parallel, and results are gathered in replicate order.

pub mod medians;
pub mod paths;
pub mod scaling;
pub mod stats;
pub mod tails;

pub use medians::{
    coupled_continuous, coupled_discrete, estimate_medians, fit_theta, padding_sensitivity,
    theta_monotonicity, MedianTable, ModelKind, MonotonicityReport, PaddingReport, ThetaEstimate,
    Verdict,
};
pub use paths::{
    branching_constant, c_hat, count_hop_classes, count_hop_classes_naive, count_self_avoiding,
    count_self_avoiding_naive, hop_constant, hop_count_mc, path_count_mc, HopCountReport,
    PathCountReport,
};
pub use scaling::{scaling_ks_test, ScalingReport};
pub use stats::{chi_square_sf, ks_two_sample, KsResult};
pub use tails::{
    coupled_diameters, diameter_tail, sample_diameters, tail_report, DiameterSamples, TailReport,
};
