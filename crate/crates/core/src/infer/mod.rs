//! Posterior inference that exploits exchangeability: any index can be
//! treated as the last one, so its full conditional is the prediction rule
//! times a likelihood term.

pub mod consistency;
pub mod features;
pub mod mixture;

pub use consistency::{joint_consistency_test, ConsistencyReport, StatisticDiscrepancy};
pub use features::{ibp_gibbs_sweep, membership_conditional, multistart, FeatureModel, FeatureState, LinearGaussian};
pub use mixture::{
    co_clustering, crp_conditional, crp_gibbs_sweep, crp_gibbs_sweep_with, least_squares_clustering, ClusterModel,
    MixtureState, NormalInverseGamma,
    SweepOptions,
};

use rand::Rng;

use crate::epf::sample_index;

/// Draws an index with probability proportional to `exp(log_weights)`.
pub(crate) fn sample_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> usize {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    sample_index(&w, rng)
}
