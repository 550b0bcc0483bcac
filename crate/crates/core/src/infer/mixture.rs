//! Collapsed Gibbs sampling for a CRP mixture of univariate observations.

use std::fmt::Debug;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::Serialize;

use super::sample_log_weights;
use crate::allocation::Partition;
use crate::epf::{crp_predict, crp_sample, eppf_crp, CrpParams};
use crate::error::{domain, Error, Result};
use crate::numeric::ln_gamma;

/// Observation model for one cluster. Collapsed sampling needs the
/// posterior predictive; models without one report an unsupported
/// configuration.
pub trait ClusterModel {
    /// Sufficient statistics of the observations in one block.
    type Stats: Clone + Default + Debug;
    /// Block parameter.
    type Param: Clone + Debug;

    fn add(&self, stats: &mut Self::Stats, x: f64);
    fn remove(&self, stats: &mut Self::Stats, x: f64);
    fn log_density(&self, param: &Self::Param, x: f64) -> f64;
    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Param;
    fn sample_observation<R: Rng + ?Sized>(&self, param: &Self::Param, rng: &mut R) -> f64;

    /// `log p(x | observations summarized by stats)`.
    fn log_predictive(&self, _stats: &Self::Stats, _x: f64) -> Result<f64> {
        Err(Error::Unsupported("model has no posterior predictive".into()))
    }

    /// Log marginal likelihood of the observations summarized by `stats`.
    fn log_marginal(&self, _stats: &Self::Stats) -> Result<f64> {
        Err(Error::Unsupported("model has no marginal likelihood".into()))
    }

    /// Parameter draw from the posterior given `stats`.
    fn sample_posterior<R: Rng + ?Sized>(&self, _stats: &Self::Stats, _rng: &mut R) -> Result<Self::Param> {
        Err(Error::Unsupported("model has no posterior sampler".into()))
    }
}

/// Normal observations with unknown mean and variance under the conjugate
/// prior `σ² ~ InvGamma(a, b)`, `μ | σ² ~ N(m, σ²/k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalInverseGamma {
    pub mean: f64,
    pub kappa: f64,
    pub shape: f64,
    pub scale: f64,
}

/// Count, mean and centered sum of squares.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NormalStats {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalParam {
    pub mean: f64,
    pub variance: f64,
}

impl NormalInverseGamma {
    pub fn new(mean: f64, kappa: f64, shape: f64, scale: f64) -> Result<Self> {
        if !(mean.is_finite() && kappa > 0.0 && shape > 0.0 && scale > 0.0) {
            return domain("Normal-InverseGamma needs finite mean and positive kappa, shape, scale");
        }
        Ok(Self { mean, kappa, shape, scale })
    }

    /// Posterior hyperparameters given block statistics.
    pub fn posterior(&self, s: &NormalStats) -> Self {
        let n = s.n as f64;
        let kappa = self.kappa + n;
        let dev = s.mean - self.mean;
        Self {
            mean: (self.kappa * self.mean + n * s.mean) / kappa,
            kappa,
            shape: self.shape + 0.5 * n,
            scale: self.scale + 0.5 * s.m2 + 0.5 * self.kappa * n * dev * dev / kappa,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> NormalParam {
        let precision = Gamma::new(self.shape, 1.0 / self.scale).expect("valid gamma").sample(rng);
        let variance = 1.0 / precision;
        let mean = Normal::new(self.mean, (variance / self.kappa).sqrt())
            .expect("valid normal")
            .sample(rng);
        NormalParam { mean, variance }
    }
}

impl ClusterModel for NormalInverseGamma {
    type Stats = NormalStats;
    type Param = NormalParam;

    fn add(&self, s: &mut NormalStats, x: f64) {
        s.n += 1;
        let d = x - s.mean;
        s.mean += d / s.n as f64;
        s.m2 += d * (x - s.mean);
    }

    fn remove(&self, s: &mut NormalStats, x: f64) {
        if s.n <= 1 {
            *s = NormalStats::default();
            return;
        }
        let n = s.n as f64;
        let old_mean = (n * s.mean - x) / (n - 1.0);
        s.m2 = (s.m2 - (x - old_mean) * (x - s.mean)).max(0.0);
        s.mean = old_mean;
        s.n -= 1;
    }

    fn log_density(&self, p: &NormalParam, x: f64) -> f64 {
        let d = x - p.mean;
        -0.5 * (2.0 * std::f64::consts::PI * p.variance).ln() - 0.5 * d * d / p.variance
    }

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> NormalParam {
        self.draw(rng)
    }

    fn sample_observation<R: Rng + ?Sized>(&self, p: &NormalParam, rng: &mut R) -> f64 {
        Normal::new(p.mean, p.variance.sqrt()).expect("valid normal").sample(rng)
    }

    /// Student-t with `2a'` degrees of freedom, location `m'` and squared
    /// scale `b'(k' + 1) / (a' k')`.
    fn log_predictive(&self, s: &NormalStats, x: f64) -> Result<f64> {
        let post = self.posterior(s);
        let nu = 2.0 * post.shape;
        let scale2 = post.scale * (post.kappa + 1.0) / (post.shape * post.kappa);
        let d = x - post.mean;
        Ok(ln_gamma(0.5 * (nu + 1.0))
            - ln_gamma(0.5 * nu)
            - 0.5 * (nu * std::f64::consts::PI * scale2).ln()
            - 0.5 * (nu + 1.0) * (d * d / (nu * scale2)).ln_1p())
    }

    fn log_marginal(&self, s: &NormalStats) -> Result<f64> {
        let post = self.posterior(s);
        Ok(ln_gamma(post.shape) - ln_gamma(self.shape) + self.shape * self.scale.ln()
            - post.shape * post.scale.ln()
            + 0.5 * (self.kappa / post.kappa).ln()
            - 0.5 * s.n as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    fn sample_posterior<R: Rng + ?Sized>(&self, s: &NormalStats, rng: &mut R) -> Result<NormalParam> {
        Ok(self.posterior(s).draw(rng))
    }
}

/// Cluster assignments with per-block sufficient statistics.
#[derive(Debug)]
pub struct MixtureState<M: ClusterModel> {
    /// Block id of each observation; ids are `0..num_blocks`.
    assignments: Vec<usize>,
    sizes: Vec<usize>,
    stats: Vec<M::Stats>,
    params: CrpParams,
}

impl<M: ClusterModel> Clone for MixtureState<M> {
    fn clone(&self) -> Self {
        Self {
            assignments: self.assignments.clone(),
            sizes: self.sizes.clone(),
            stats: self.stats.clone(),
            params: self.params,
        }
    }
}

impl<M: ClusterModel> MixtureState<M> {
    /// State from arbitrary block labels, one per observation.
    pub fn new(params: CrpParams, model: &M, data: &[f64], labels: &[usize]) -> Result<Self> {
        if labels.len() != data.len() {
            return domain(format!("{} labels for {} observations", labels.len(), data.len()));
        }
        let ids = Partition::from_assignments(labels).assignments();
        let k = ids.iter().map(|&b| b + 1).max().unwrap_or(0);
        let mut state = Self {
            assignments: ids,
            sizes: vec![0; k],
            stats: vec![M::Stats::default(); k],
            params,
        };
        for (i, &x) in data.iter().enumerate() {
            let b = state.assignments[i];
            state.sizes[b] += 1;
            model.add(&mut state.stats[b], x);
        }
        Ok(state)
    }

    /// Every observation in one block.
    pub fn single_block(params: CrpParams, model: &M, data: &[f64]) -> Result<Self> {
        Self::new(params, model, data, &vec![0; data.len()])
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block_stats(&self) -> &[M::Stats] {
        &self.stats
    }

    pub fn params(&self) -> &CrpParams {
        &self.params
    }

    pub fn partition(&self) -> Partition {
        Partition::from_assignments(&self.assignments)
    }

    /// No empty blocks, and sizes agree with the assignments.
    pub fn is_consistent(&self) -> bool {
        let mut counts = vec![0; self.sizes.len()];
        for &b in &self.assignments {
            if b >= counts.len() {
                return false;
            }
            counts[b] += 1;
        }
        counts == self.sizes && self.sizes.iter().all(|&s| s > 0) && self.stats.len() == self.sizes.len()
    }

    /// Takes observation `i` out of its block, deleting the block if it
    /// empties. Block ids stay contiguous.
    fn detach(&mut self, model: &M, i: usize, x: f64) {
        let b = self.assignments[i];
        self.sizes[b] -= 1;
        model.remove(&mut self.stats[b], x);
        if self.sizes[b] == 0 {
            let last = self.sizes.len() - 1;
            self.sizes.swap_remove(b);
            self.stats.swap_remove(b);
            if b != last {
                for a in &mut self.assignments {
                    if *a == last {
                        *a = b;
                    }
                }
            }
        }
        self.assignments[i] = usize::MAX;
    }

    fn attach(&mut self, model: &M, i: usize, x: f64, b: usize) {
        if b == self.sizes.len() {
            self.sizes.push(0);
            self.stats.push(M::Stats::default());
        }
        self.sizes[b] += 1;
        model.add(&mut self.stats[b], x);
        self.assignments[i] = b;
    }

    /// Unnormalized log weights for a detached observation: the prediction
    /// rule for it as the last index times the posterior predictive, one per
    /// existing block and one for a new block.
    fn log_weights(&self, model: &M, x: f64, opts: &SweepOptions) -> Result<Vec<f64>> {
        let prior = crp_predict(&self.params, &self.sizes);
        let empty = M::Stats::default();
        let mut out = Vec::with_capacity(prior.len());
        for (b, p) in prior.iter().enumerate() {
            let (stats, scale) = match self.stats.get(b) {
                Some(s) => (s, 1.0),
                None => (&empty, opts.new_block_scale),
            };
            out.push((p * scale).ln() + model.log_predictive(stats, x)?);
        }
        Ok(out)
    }

    /// `log p(partition) + Σ_blocks log marginal likelihood`.
    pub fn log_joint(&self, model: &M) -> Result<f64> {
        let mut lp = eppf_crp(&self.params, &self.sizes)?.log_prob;
        for s in &self.stats {
            lp += model.log_marginal(s)?;
        }
        Ok(lp)
    }
}

/// Knobs for the Gibbs transition. The default is the exact sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    /// Multiplies the new-block weight. Anything but 1 breaks the
    /// sampler; it exists to check that consistency tests notice.
    pub new_block_scale: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { new_block_scale: 1.0 }
    }
}

/// Full conditional of observation `i`: each candidate partition (joining
/// each block of the others, then a new block) with its log probability.
pub fn crp_conditional<M: ClusterModel>(
    state: &MixtureState<M>,
    data: &[f64],
    model: &M,
    i: usize,
) -> Result<Vec<(Partition, f64)>> {
    if i >= data.len() || data.len() != state.assignments.len() {
        return domain("observation index or data length does not match the state");
    }
    let mut s = state.clone();
    s.detach(model, i, data[i]);
    let lw = s.log_weights(model, data[i], &SweepOptions::default())?;
    let norm = crate::numeric::log_sum_exp(&lw);
    let mut out = Vec::with_capacity(lw.len());
    for (b, l) in lw.into_iter().enumerate() {
        let mut labels = s.assignments.clone();
        labels[i] = b;
        out.push((Partition::from_assignments(&labels), l - norm));
    }
    Ok(out)
}

/// One systematic-scan sweep over indices `1..n`.
pub fn crp_gibbs_sweep<M: ClusterModel, R: Rng + ?Sized>(
    state: &mut MixtureState<M>,
    data: &[f64],
    model: &M,
    rng: &mut R,
) -> Result<()> {
    crp_gibbs_sweep_with(state, data, model, rng, &SweepOptions::default())
}

pub fn crp_gibbs_sweep_with<M: ClusterModel, R: Rng + ?Sized>(
    state: &mut MixtureState<M>,
    data: &[f64],
    model: &M,
    rng: &mut R,
    opts: &SweepOptions,
) -> Result<()> {
    if data.len() != state.assignments.len() {
        return domain(format!(
            "{} observations for a state over {}",
            data.len(),
            state.assignments.len()
        ));
    }
    for (i, &x) in data.iter().enumerate() {
        state.detach(model, i, x);
        let lw = state.log_weights(model, x, opts)?;
        let b = sample_log_weights(&lw, rng);
        state.attach(model, i, x, b);
    }
    Ok(())
}

/// Draws a partition from the prior, block parameters from the base and
/// observations from the blocks.
pub fn forward_sample<M: ClusterModel, R: Rng + ?Sized>(
    params: &CrpParams,
    model: &M,
    n: usize,
    rng: &mut R,
) -> (Vec<usize>, Vec<f64>) {
    let part = crp_sample(params, n, rng);
    let ids = part.assignments();
    let block_params: Vec<M::Param> = (0..part.num_blocks()).map(|_| model.sample_prior(rng)).collect();
    let data = ids.iter().map(|&b| model.sample_observation(&block_params[b], rng)).collect();
    (ids, data)
}

/// New observations for a fixed partition: block parameters from their
/// posterior given the current data, then data given the parameters.
pub fn regenerate_data<M: ClusterModel, R: Rng + ?Sized>(
    state: &mut MixtureState<M>,
    data: &mut [f64],
    model: &M,
    rng: &mut R,
) -> Result<()> {
    let params = state
        .stats
        .iter()
        .map(|s| model.sample_posterior(s, rng))
        .collect::<Result<Vec<_>>>()?;
    for s in &mut state.stats {
        *s = M::Stats::default();
    }
    for (i, x) in data.iter_mut().enumerate() {
        let b = state.assignments[i];
        *x = model.sample_observation(&params[b], rng);
        model.add(&mut state.stats[b], *x);
    }
    Ok(())
}

/// Fraction of `samples` in which each pair of observations shares a block.
pub fn co_clustering(samples: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let n = samples.first().map_or(0, Vec::len);
    let mut m = vec![vec![0.0; n]; n];
    for s in samples {
        for i in 0..n {
            for j in 0..n {
                if s[i] == s[j] {
                    m[i][j] += 1.0;
                }
            }
        }
    }
    let total = samples.len().max(1) as f64;
    m.iter_mut().flatten().for_each(|x| *x /= total);
    m
}

/// The sampled assignment closest in squared distance to the
/// co-clustering matrix of all samples.
pub fn least_squares_clustering(samples: &[Vec<usize>]) -> Option<Vec<usize>> {
    let m = co_clustering(samples);
    let loss = |s: &Vec<usize>| {
        let mut l = 0.0;
        for (i, row) in m.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                let d = f64::from(u8::from(s[i] == s[j])) - p;
                l += d * d;
            }
        }
        l
    };
    samples
        .iter()
        .map(|s| (loss(s), s))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, s)| s.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::enumerate_partitions;
    use crate::harness::stats::adjusted_rand_index;
    use crate::rng::stream_rng;
    use rand_distr::StandardNormal;

    fn nig() -> NormalInverseGamma {
        NormalInverseGamma::new(0.0, 0.5, 2.0, 1.5).unwrap()
    }

    fn stats_of(model: &NormalInverseGamma, xs: &[f64]) -> NormalStats {
        let mut s = NormalStats::default();
        for &x in xs {
            model.add(&mut s, x);
        }
        s
    }

    #[test]
    fn stats_add_and_remove() {
        let m = nig();
        let xs = [1.0, -2.0, 3.5, 0.25];
        let mut s = stats_of(&m, &xs);
        let mean = xs.iter().sum::<f64>() / 4.0;
        let m2: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
        assert!((s.mean - mean).abs() < 1e-14 && (s.m2 - m2).abs() < 1e-12);
        m.remove(&mut s, 3.5);
        let rest = stats_of(&m, &[1.0, -2.0, 0.25]);
        assert!((s.mean - rest.mean).abs() < 1e-14 && (s.m2 - rest.m2).abs() < 1e-12);
        assert_eq!(s.n, 3);
    }

    #[test]
    fn predictive_is_ratio_of_marginals() {
        let m = nig();
        let xs = [0.3, 1.7, -0.4];
        for k in 0..=xs.len() {
            let s = stats_of(&m, &xs[..k]);
            for &x in &[-3.0, 0.0, 2.2] {
                let mut t = s;
                m.add(&mut t, x);
                let ratio = m.log_marginal(&t).unwrap() - m.log_marginal(&s).unwrap();
                assert!((m.log_predictive(&s, x).unwrap() - ratio).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn predictive_averages_the_prior() {
        // p(x) = E_prior[N(x | μ, σ²)], by Monte Carlo over prior draws.
        let m = nig();
        let mut rng = stream_rng(30, 0);
        let draws: Vec<NormalParam> = (0..200_000).map(|_| m.sample_prior(&mut rng)).collect();
        for &x in &[-2.0, 0.0, 1.0, 4.0] {
            let mc = draws.iter().map(|p| m.log_density(p, x).exp()).sum::<f64>() / draws.len() as f64;
            let exact = m.log_predictive(&NormalStats::default(), x).unwrap().exp();
            assert!((mc - exact).abs() < 0.02 * exact, "x={x}: {mc} vs {exact}");
        }
    }

    #[test]
    fn conditional_matches_brute_force() {
        let m = nig();
        let crp = CrpParams::new(0.8).unwrap();
        let data = [0.4, -1.2, 2.5, 0.9];
        for n in 1..=4 {
            let data = &data[..n];
            for part in enumerate_partitions(n).unwrap() {
                let state = MixtureState::new(crp, &m, data, &part.assignments()).unwrap();
                for i in 0..n {
                    let cond = crp_conditional(&state, data, &m, i).unwrap();
                    // Joint of each candidate from the EPPF and block marginals.
                    let joints: Vec<f64> = cond
                        .iter()
                        .map(|(p, _)| {
                            let mut lp = eppf_crp(&crp, &p.block_sizes()).unwrap().log_prob;
                            for block in p.blocks() {
                                let xs: Vec<f64> = block.iter().map(|&j| data[j - 1]).collect();
                                lp += m.log_marginal(&stats_of(&m, &xs)).unwrap();
                            }
                            lp
                        })
                        .collect();
                    let norm = crate::numeric::log_sum_exp(&joints);
                    for ((_, c), j) in cond.iter().zip(&joints) {
                        assert!((c - (j - norm)).abs() < 1e-10, "{part} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn conditional_under_the_prior_is_the_prediction_rule() {
        // Without data, the law of index i given the rest is the prediction
        // rule with i treated as the last index.
        let crp = CrpParams::new(1.7).unwrap();
        for part in enumerate_partitions(3).unwrap() {
            for i in 1..=3 {
                let rest: Vec<Vec<usize>> = part
                    .blocks()
                    .iter()
                    .map(|b| b.iter().copied().filter(|&j| j != i).collect::<Vec<_>>())
                    .filter(|b| !b.is_empty())
                    .collect();
                let mut options: Vec<Vec<usize>> = Vec::new();
                for k in 0..=rest.len() {
                    let mut sizes: Vec<usize> = rest.iter().map(Vec::len).collect();
                    if k == rest.len() {
                        sizes.push(1);
                    } else {
                        sizes[k] += 1;
                    }
                    options.push(sizes);
                }
                let joint: Vec<f64> = options.iter().map(|s| eppf_crp(&crp, s).unwrap().prob()).collect();
                let total: f64 = joint.iter().sum();
                let counts: Vec<usize> = rest.iter().map(Vec::len).collect();
                let rule = crp_predict(&crp, &counts);
                for (j, r) in joint.iter().zip(&rule) {
                    assert!((j / total - r).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn single_observation_stays_put() {
        let m = nig();
        let crp = CrpParams::new(1.0).unwrap();
        let mut state = MixtureState::single_block(crp, &m, &[0.7]).unwrap();
        let mut rng = stream_rng(31, 0);
        for _ in 0..20 {
            crp_gibbs_sweep(&mut state, &[0.7], &m, &mut rng).unwrap();
            assert_eq!(state.assignments(), &[0]);
        }
    }

    #[test]
    fn unsupported_model_is_refused() {
        #[derive(Debug)]
        struct Laplace;
        impl ClusterModel for Laplace {
            type Stats = Vec<f64>;
            type Param = f64;
            fn add(&self, s: &mut Vec<f64>, x: f64) {
                s.push(x);
            }
            fn remove(&self, s: &mut Vec<f64>, x: f64) {
                s.retain(|&y| y != x);
            }
            fn log_density(&self, p: &f64, x: f64) -> f64 {
                -(x - p).abs() - 2f64.ln()
            }
            fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
                rng.sample(StandardNormal)
            }
            fn sample_observation<R: Rng + ?Sized>(&self, p: &f64, rng: &mut R) -> f64 {
                p + rng.sample::<f64, _>(rand_distr::Exp1) * if rng.random() { 1.0 } else { -1.0 }
            }
        }
        let crp = CrpParams::new(1.0).unwrap();
        let data = [0.1, 0.2];
        let mut state = MixtureState::single_block(crp, &Laplace, &data).unwrap();
        let mut rng = stream_rng(32, 0);
        assert!(matches!(
            crp_gibbs_sweep(&mut state, &data, &Laplace, &mut rng),
            Err(Error::Unsupported(_))
        ));
    }

    fn two_clusters(seed: u64) -> (Vec<f64>, Vec<usize>) {
        let mut rng = stream_rng(seed, 0);
        let truth: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let data = truth
            .iter()
            .map(|&c| 10.0 * c as f64 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        (data, truth)
    }

    #[test]
    fn recovers_planted_clusters() {
        let m = NormalInverseGamma::new(5.0, 0.01, 2.0, 2.0).unwrap();
        let crp = CrpParams::new(1.0).unwrap();
        for seed in 0..5 {
            let (data, truth) = two_clusters(33 + 100 * seed);
            let mut state = MixtureState::single_block(crp, &m, &data).unwrap();
            let mut rng = stream_rng(34 + 100 * seed, 0);
            let mut samples = Vec::new();
            for sweep in 0..200 {
                crp_gibbs_sweep(&mut state, &data, &m, &mut rng).unwrap();
                assert!(state.is_consistent());
                if sweep >= 100 {
                    samples.push(state.assignments().to_vec());
                }
            }
            // Small splits of a true cluster carry real posterior mass, so
            // judge the co-clustering matrix rather than the last state.
            let co = co_clustering(&samples);
            let err = (0..50)
                .flat_map(|i| (0..50).map(move |j| (i, j)))
                .map(|(i, j)| (co[i][j] - f64::from(u8::from(truth[i] == truth[j]))).abs())
                .sum::<f64>()
                / 2500.0;
            assert!(err < 0.15, "seed {seed}: co-clustering off by {err} on average");
            let ari = adjusted_rand_index(&least_squares_clustering(&samples).unwrap(), &truth);
            assert!(ari >= 0.9, "seed {seed}: ARI {ari}");
            assert!(state.log_joint(&m).unwrap().is_finite());
        }
    }

    #[test]
    fn block_count_grows_with_concentration() {
        let (data, _) = two_clusters(35);
        let m = NormalInverseGamma::new(5.0, 0.01, 2.0, 2.0).unwrap();
        let means: Vec<f64> = [0.1, 1.0, 10.0]
            .iter()
            .map(|&theta| {
                let crp = CrpParams::new(theta).unwrap();
                let mut state = MixtureState::single_block(crp, &m, &data).unwrap();
                let mut rng = stream_rng(36, 0);
                let mut total = 0.0;
                for sweep in 0..400 {
                    crp_gibbs_sweep(&mut state, &data, &m, &mut rng).unwrap();
                    if sweep >= 100 {
                        total += state.num_blocks() as f64;
                    }
                }
                total / 300.0
            })
            .collect();
        assert!(means[0] < means[1] && means[1] < means[2], "{means:?}");
    }

    #[test]
    fn state_validation() {
        let m = nig();
        let crp = CrpParams::new(1.0).unwrap();
        assert!(MixtureState::new(crp, &m, &[1.0, 2.0], &[0]).is_err());
        let s = MixtureState::new(crp, &m, &[1.0, 2.0, 3.0], &[7, 3, 7]).unwrap();
        assert_eq!(s.assignments(), &[0, 1, 0]);
        assert_eq!(s.block_sizes(), &[2, 1]);
        assert!(s.is_consistent());
    }
}
