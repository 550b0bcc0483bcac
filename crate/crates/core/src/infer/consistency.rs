//! Joint-distribution consistency checks for samplers: forward simulation
//! of (structure, parameters, data) against a chain that alternates the
//! sampler under test with regeneration of the data. Both have the prior
//! joint as their law, so prior statistics must agree.

use serde::Serialize;

use super::features::{self, FeatureModel, FeatureState};
use super::mixture::{self, ClusterModel, MixtureState, SweepOptions};
use crate::epf::{CrpParams, IbpParams};
use crate::error::Result;
use crate::harness::stats::mean_var;
use crate::harness::{replicate, SECOND_SAMPLER_STREAMS};
use crate::rng::{stream_rng, StreamRng};

const BATCHES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatisticDiscrepancy {
    pub name: String,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub chain_mean: f64,
    /// Batch-means standard error.
    pub chain_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub forward_reps: usize,
    pub chain_steps: usize,
    pub statistics: Vec<StatisticDiscrepancy>,
}

impl ConsistencyReport {
    pub fn max_abs_z(&self) -> f64 {
        self.statistics.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }
}

/// Compares the means of `statistic` under `forward` draws and along a
/// chain of `chain_steps` applications of `transition`, started from a
/// forward draw. The chain's standard error comes from batch means.
pub fn joint_consistency_test<S, F, T, G>(
    names: &[&str],
    forward: F,
    mut transition: T,
    statistic: G,
    forward_reps: usize,
    chain_steps: usize,
    seed: u64,
) -> Result<ConsistencyReport>
where
    S: Send,
    F: Fn(&mut StreamRng) -> S + Sync,
    T: FnMut(&mut S, &mut StreamRng) -> Result<()>,
    G: Fn(&S) -> Vec<f64> + Sync,
{
    let fwd: Vec<Vec<f64>> = replicate(seed, 0, forward_reps, |rng| statistic(&forward(rng)));
    let mut rng = stream_rng(seed, SECOND_SAMPLER_STREAMS);
    let mut state = forward(&mut rng);
    let mut chain: Vec<Vec<f64>> = Vec::with_capacity(chain_steps);
    for _ in 0..chain_steps {
        transition(&mut state, &mut rng)?;
        chain.push(statistic(&state));
    }
    let batch = (chain_steps / BATCHES).max(1);
    let statistics = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let a: Vec<f64> = fwd.iter().map(|s| s[j]).collect();
            let (fm, fv) = mean_var(&a);
            let b: Vec<f64> = chain.iter().map(|s| s[j]).collect();
            let (cm, _) = mean_var(&b);
            let batch_means: Vec<f64> = b
                .chunks(batch)
                .filter(|c| c.len() == batch)
                .map(|c| c.iter().sum::<f64>() / batch as f64)
                .collect();
            let (_, bv) = mean_var(&batch_means);
            let forward_se = (fv / a.len() as f64).sqrt();
            let chain_se = (bv / batch_means.len() as f64).sqrt();
            let se = forward_se.hypot(chain_se);
            StatisticDiscrepancy {
                name: name.to_string(),
                forward_mean: fm,
                forward_se,
                chain_mean: cm,
                chain_se,
                z: if se > 0.0 { (cm - fm) / se } else { 0.0 },
            }
        })
        .collect();
    Ok(ConsistencyReport {
        forward_reps,
        chain_steps,
        statistics,
    })
}

/// Joint check of the collapsed CRP Gibbs sweep on `n` observations.
/// Statistics: number of blocks and largest block size.
pub fn crp_joint_consistency<M>(
    params: &CrpParams,
    model: &M,
    n: usize,
    forward_reps: usize,
    chain_steps: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<ConsistencyReport>
where
    M: ClusterModel + Sync,
    M::Stats: Send,
{
    let forward = |rng: &mut StreamRng| {
        let (ids, data) = mixture::forward_sample(params, model, n, rng);
        let state = MixtureState::new(*params, model, &data, &ids).expect("consistent forward draw");
        (state, data)
    };
    let transition = |s: &mut (MixtureState<M>, Vec<f64>), rng: &mut StreamRng| {
        mixture::crp_gibbs_sweep_with(&mut s.0, &s.1, model, rng, opts)?;
        mixture::regenerate_data(&mut s.0, &mut s.1, model, rng)
    };
    let statistic = |s: &(MixtureState<M>, Vec<f64>)| {
        vec![
            s.0.num_blocks() as f64,
            s.0.block_sizes().iter().copied().max().unwrap_or(0) as f64,
        ]
    };
    joint_consistency_test(&["blocks", "largest_block"], forward, transition, statistic, forward_reps, chain_steps, seed)
}

/// Joint check of the IBP Gibbs sweep on `n` rows of dimension `dim`.
/// Statistics: number of features and total memberships.
pub fn ibp_joint_consistency<M: FeatureModel + Sync>(
    params: &IbpParams,
    model: &M,
    n: usize,
    dim: usize,
    forward_reps: usize,
    chain_steps: usize,
    seed: u64,
) -> Result<ConsistencyReport> {
    let forward = |rng: &mut StreamRng| features::forward_sample(params, model, n, dim, rng);
    let transition = |s: &mut (FeatureState, Vec<Vec<f64>>), rng: &mut StreamRng| {
        features::ibp_gibbs_sweep(&mut s.0, &s.1, model, rng)?;
        s.1 = features::regenerate_data(&s.0, model, rng);
        Ok(())
    };
    let statistic = |s: &(FeatureState, Vec<Vec<f64>>)| {
        vec![
            s.0.num_features() as f64,
            s.0.row_sums().iter().sum::<usize>() as f64,
        ]
    };
    joint_consistency_test(&["features", "memberships"], forward, transition, statistic, forward_reps, chain_steps, seed)
}
