//! Gibbs sampling for an IBP latent-feature model with explicit feature
//! parameters.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::allocation::FeatureAllocation;
use crate::epf::{ibp_allocation_log_prob, ibp_predict, ibp_sample_columns, ordered_from_unordered_log, poisson, IbpParams};
use crate::error::{domain, Error, Result};

/// Observation model for rows given the sum of their features' parameters.
pub trait FeatureModel {
    /// `log p(row | mean)` up to a constant shared by all states.
    fn row_log_likelihood(&self, row: &[f64], mean: &[f64]) -> f64;
    /// Feature parameter from its prior.
    fn sample_feature<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64>;
    fn feature_log_prior(&self, a: &[f64]) -> f64;
    fn sample_row<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64>;

    /// Feature parameter from its full conditional, given the sum over its
    /// member rows of the rows minus every other feature's contribution.
    fn resample_feature<R: Rng + ?Sized>(
        &self,
        _residual_sum: &[f64],
        _members: usize,
        _rng: &mut R,
    ) -> Result<Vec<f64>> {
        Err(Error::Unsupported("model has no conditional feature update".into()))
    }

    /// Proposal for a new singleton feature of a row whose other features
    /// leave `residual` unexplained. Defaults to the prior.
    fn propose_feature<R: Rng + ?Sized>(&self, residual: &[f64], rng: &mut R) -> Vec<f64> {
        self.sample_feature(residual.len(), rng)
    }

    /// `log q(a | residual) - log p(a)` for [`FeatureModel::propose_feature`].
    fn proposal_log_ratio(&self, _residual: &[f64], _a: &[f64]) -> f64 {
        0.0
    }
}

/// `row ~ N(Σ_k z_k A_k, σ_x² I)` with `A_k ~ N(0, σ_a² I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearGaussian {
    pub sigma_x: f64,
    pub sigma_a: f64,
}

impl LinearGaussian {
    pub fn new(sigma_x: f64, sigma_a: f64) -> Result<Self> {
        if !(sigma_x > 0.0 && sigma_a > 0.0) {
            return domain("noise and feature scales must be positive");
        }
        Ok(Self { sigma_x, sigma_a })
    }
}

impl FeatureModel for LinearGaussian {
    fn row_log_likelihood(&self, row: &[f64], mean: &[f64]) -> f64 {
        let ss: f64 = row.iter().zip(mean).map(|(x, m)| (x - m) * (x - m)).sum();
        -0.5 * ss / (self.sigma_x * self.sigma_x)
    }

    fn sample_feature<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> Vec<f64> {
        let law = Normal::new(0.0, self.sigma_a).expect("valid normal");
        (0..dim).map(|_| law.sample(rng)).collect()
    }

    fn feature_log_prior(&self, a: &[f64]) -> f64 {
        let v = self.sigma_a * self.sigma_a;
        a.iter()
            .map(|x| -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * x * x / v)
            .sum()
    }

    fn sample_row<R: Rng + ?Sized>(&self, mean: &[f64], rng: &mut R) -> Vec<f64> {
        let law = Normal::new(0.0, self.sigma_x).expect("valid normal");
        mean.iter().map(|m| m + law.sample(rng)).collect()
    }

    fn resample_feature<R: Rng + ?Sized>(
        &self,
        residual_sum: &[f64],
        members: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let vx = self.sigma_x * self.sigma_x;
        let precision = members as f64 / vx + 1.0 / (self.sigma_a * self.sigma_a);
        let sd = precision.recip().sqrt();
        Ok(residual_sum
            .iter()
            .map(|r| r / vx / precision + sd * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect())
    }

    /// The feature's posterior given the residual alone.
    fn propose_feature<R: Rng + ?Sized>(&self, residual: &[f64], rng: &mut R) -> Vec<f64> {
        let (shrink, sd) = self.single_row_posterior();
        residual
            .iter()
            .map(|r| shrink * r + sd * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect()
    }

    fn proposal_log_ratio(&self, residual: &[f64], a: &[f64]) -> f64 {
        let (shrink, sd) = self.single_row_posterior();
        let q: f64 = residual
            .iter()
            .zip(a)
            .map(|(r, x)| {
                let d = (x - shrink * r) / sd;
                -0.5 * d * d - sd.ln()
            })
            .sum();
        let p: f64 = a
            .iter()
            .map(|x| {
                let d = x / self.sigma_a;
                -0.5 * d * d - self.sigma_a.ln()
            })
            .sum();
        q - p
    }
}

impl LinearGaussian {
    fn single_row_posterior(&self) -> (f64, f64) {
        let (vx, va) = (self.sigma_x * self.sigma_x, self.sigma_a * self.sigma_a);
        (va / (va + vx), (va * vx / (va + vx)).sqrt())
    }
}

/// Binary memberships with one parameter vector per feature.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureState {
    /// `z[i][k]`: row `i` has feature `k`.
    z: Vec<Vec<bool>>,
    features: Vec<Vec<f64>>,
    dim: usize,
    params: IbpParams,
}

impl FeatureState {
    pub fn new(params: IbpParams, dim: usize, z: Vec<Vec<bool>>, features: Vec<Vec<f64>>) -> Result<Self> {
        let k = features.len();
        if z.iter().any(|r| r.len() != k) {
            return domain("membership rows must have one entry per feature");
        }
        if features.iter().any(|a| a.len() != dim) {
            return domain(format!("feature parameters must have dimension {dim}"));
        }
        let mut s = Self { z, features, dim, params };
        s.prune();
        Ok(s)
    }

    /// No features at all.
    pub fn empty(params: IbpParams, n: usize, dim: usize) -> Self {
        Self {
            z: vec![Vec::new(); n],
            features: Vec::new(),
            dim,
            params,
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }

    pub fn memberships(&self) -> &[Vec<bool>] {
        &self.z
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn params(&self) -> &IbpParams {
        &self.params
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.z.iter().map(|r| r.iter().filter(|&&b| b).count()).collect()
    }

    pub fn allocation(&self) -> FeatureAllocation {
        FeatureAllocation::from_membership(self.n(), self.num_features(), |i, k| self.z[i][k])
    }

    /// Every feature has at least one member.
    pub fn is_consistent(&self) -> bool {
        (0..self.num_features()).all(|k| self.z.iter().any(|r| r[k]))
            && self.z.iter().all(|r| r.len() == self.features.len())
    }

    fn row_mean(&self, i: usize) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for (k, a) in self.features.iter().enumerate() {
            if self.z[i][k] {
                for (mj, aj) in m.iter_mut().zip(a) {
                    *mj += aj;
                }
            }
        }
        m
    }

    fn counts(&self) -> Vec<usize> {
        (0..self.num_features())
            .map(|k| self.z.iter().filter(|r| r[k]).count())
            .collect()
    }

    fn prune(&mut self) {
        let keep: Vec<bool> = (0..self.features.len())
            .map(|k| self.z.iter().any(|r| r[k]))
            .collect();
        if keep.iter().all(|&b| b) {
            return;
        }
        let mut it = keep.iter();
        self.features.retain(|_| *it.next().unwrap());
        for row in &mut self.z {
            let mut it = keep.iter();
            row.retain(|_| *it.next().unwrap());
        }
    }

    /// Log probability of the membership matrix with its columns labelled
    /// by their parameters, plus log likelihood and feature priors, up to a
    /// constant. Labelling divides the allocation's probability by its
    /// number of distinct orderings.
    pub fn log_joint<M: FeatureModel>(&self, data: &[Vec<f64>], model: &M) -> Result<f64> {
        let f = self.allocation();
        let mut lp = ordered_from_unordered_log(&f, ibp_allocation_log_prob(&self.params, &f)?.log_prob);
        for (i, row) in data.iter().enumerate() {
            lp += model.row_log_likelihood(row, &self.row_mean(i));
        }
        lp += self.features.iter().map(|a| model.feature_log_prior(a)).sum::<f64>();
        Ok(lp)
    }
}

/// Log odds of row `i` holding a feature that `others` other rows hold,
/// given the row's mean with and without it.
fn inclusion_log_odds<M: FeatureModel>(
    params: &IbpParams,
    n: usize,
    others: usize,
    model: &M,
    row: &[f64],
    with: &[f64],
    without: &[f64],
) -> Result<f64> {
    let p = ibp_predict(params, n, &[others])?.inclusion[0];
    Ok(p.ln() - (-p).ln_1p() + model.row_log_likelihood(row, with) - model.row_log_likelihood(row, without))
}

/// Probability that row `i` holds feature `k` given everything else, as
/// used by [`ibp_gibbs_sweep`]. `None` when no other row holds `k`; such
/// singletons are moved by Metropolis–Hastings instead.
pub fn membership_conditional<M: FeatureModel>(
    state: &FeatureState,
    data: &[Vec<f64>],
    model: &M,
    i: usize,
    k: usize,
) -> Result<Option<f64>> {
    if i >= state.n() || k >= state.num_features() || data.len() != state.n() {
        return domain("row or feature out of range");
    }
    let others = state.counts()[k] - usize::from(state.z[i][k]);
    if others == 0 {
        return Ok(None);
    }
    let mut with = state.row_mean(i);
    if !state.z[i][k] {
        add_into(&mut with, &state.features[k], 1.0);
    }
    let mut without = with.clone();
    add_into(&mut without, &state.features[k], -1.0);
    let log_odds = inclusion_log_odds(&state.params, state.n(), others, model, &data[i], &with, &without)?;
    Ok(Some(1.0 / (1.0 + (-log_odds).exp())))
}

fn add_into(acc: &mut [f64], a: &[f64], sign: f64) {
    for (x, y) in acc.iter_mut().zip(a) {
        *x += sign * y;
    }
}

/// One sweep: memberships of shared features row by row, a
/// Metropolis–Hastings move on each row's singleton features, then every
/// feature parameter from its full conditional.
///
/// Each row is treated as the last index. Shared features use the
/// prediction rule's inclusion probability times the likelihood ratio.
/// Singleton features are replaced by a proposal: a Poisson number of new
/// features at the prediction rule's new-feature rate, with parameters from
/// [`FeatureModel::propose_feature`], accepted with the likelihood ratio
/// times the prior-to-proposal density ratio.
pub fn ibp_gibbs_sweep<M: FeatureModel, R: Rng + ?Sized>(
    state: &mut FeatureState,
    data: &[Vec<f64>],
    model: &M,
    rng: &mut R,
) -> Result<()> {
    let n = state.n();
    if data.len() != n || data.iter().any(|r| r.len() != state.dim) {
        return domain(format!("data must be {n} rows of dimension {}", state.dim));
    }
    for i in 0..n {
        let row = &data[i];
        let mut counts = state.counts();
        let mut mean = state.row_mean(i);
        for k in 0..state.num_features() {
            let has = state.z[i][k];
            let others = counts[k] - usize::from(has);
            if others == 0 {
                continue;
            }
            let mut with = mean.clone();
            let mut without = mean.clone();
            if has {
                add_into(&mut without, &state.features[k], -1.0);
            } else {
                add_into(&mut with, &state.features[k], 1.0);
            }
            let log_odds = inclusion_log_odds(&state.params, n, others, model, row, &with, &without)?;
            let take = rng.random::<f64>() < 1.0 / (1.0 + (-log_odds).exp());
            if take != has {
                state.z[i][k] = take;
                counts[k] = others + usize::from(take);
            }
            mean = if take { with } else { without };
        }

        // Singleton features of row i.
        let singles: Vec<usize> = (0..state.num_features())
            .filter(|&k| state.z[i][k] && counts[k] == 1)
            .collect();
        let mut base = mean.clone();
        for &k in &singles {
            add_into(&mut base, &state.features[k], -1.0);
        }
        // Counts are proposed from their prior, so only the parameter
        // proposal needs correcting.
        let residual: Vec<f64> = row.iter().zip(&base).map(|(x, b)| x - b).collect();
        let rate = ibp_predict(&state.params, n, &[])?.new_rate;
        let fresh: Vec<Vec<f64>> = (0..poisson(rate, rng))
            .map(|_| model.propose_feature(&residual, rng))
            .collect();
        let mut proposed = base;
        let mut log_ratio = 0.0;
        for a in &fresh {
            add_into(&mut proposed, a, 1.0);
            log_ratio -= model.proposal_log_ratio(&residual, a);
        }
        for &k in &singles {
            log_ratio += model.proposal_log_ratio(&residual, &state.features[k]);
        }
        log_ratio += model.row_log_likelihood(row, &proposed) - model.row_log_likelihood(row, &mean);
        if log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp() {
            for &k in &singles {
                state.z[i][k] = false;
            }
            for a in fresh {
                state.features.push(a);
                for (j, r) in state.z.iter_mut().enumerate() {
                    r.push(j == i);
                }
            }
            state.prune();
        }
    }
    state.prune();

    for k in 0..state.num_features() {
        let mut residual = vec![0.0; state.dim];
        let mut members = 0;
        for i in 0..n {
            if state.z[i][k] {
                members += 1;
                let mut m = state.row_mean(i);
                add_into(&mut m, &state.features[k], -1.0);
                add_into(&mut residual, &data[i], 1.0);
                add_into(&mut residual, &m, -1.0);
            }
        }
        state.features[k] = model.resample_feature(&residual, members, rng)?;
    }
    Ok(())
}

/// Runs `starts` chains of `sweeps` sweeps from the empty state and returns
/// the final state with the highest log joint. Uncollapsed feature samplers
/// get stuck in representations such as `{a+b, -a, -b}` that fit as well
/// as `{a, b}`; this only picks a starting point, so later sweeps keep the
/// posterior as their stationary law.
pub fn multistart<M: FeatureModel, R: Rng + ?Sized>(
    params: &IbpParams,
    data: &[Vec<f64>],
    model: &M,
    starts: usize,
    sweeps: usize,
    rng: &mut R,
) -> Result<FeatureState> {
    let dim = data.first().map_or(0, Vec::len);
    let mut best: Option<(f64, FeatureState)> = None;
    for _ in 0..starts.max(1) {
        let mut state = FeatureState::empty(*params, data.len(), dim);
        for _ in 0..sweeps {
            ibp_gibbs_sweep(&mut state, data, model, rng)?;
        }
        let lj = state.log_joint(data, model)?;
        if best.as_ref().is_none_or(|(b, _)| lj > *b) {
            best = Some((lj, state));
        }
    }
    Ok(best.expect("at least one start").1)
}

/// Memberships from the IBP, feature parameters from the prior and rows
/// from the model.
pub fn forward_sample<M: FeatureModel, R: Rng + ?Sized>(
    params: &IbpParams,
    model: &M,
    n: usize,
    dim: usize,
    rng: &mut R,
) -> (FeatureState, Vec<Vec<f64>>) {
    let columns = ibp_sample_columns(params, n, rng);
    let features: Vec<Vec<f64>> = columns.iter().map(|_| model.sample_feature(dim, rng)).collect();
    let z: Vec<Vec<bool>> = (1..=n)
        .map(|i| columns.iter().map(|c| c.contains(&i)).collect())
        .collect();
    let state = FeatureState { z, features, dim, params: *params };
    let data = (0..n).map(|i| model.sample_row(&state.row_mean(i), rng)).collect();
    (state, data)
}

/// New rows given the current memberships and feature parameters.
pub fn regenerate_data<M: FeatureModel, R: Rng + ?Sized>(state: &FeatureState, model: &M, rng: &mut R) -> Vec<Vec<f64>> {
    (0..state.n()).map(|i| model.sample_row(&state.row_mean(i), rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn planted(seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = stream_rng(seed, 0);
        let a = [[3.0, 3.0, 3.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 3.0, 3.0, 3.0]];
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut data = Vec::new();
        let mut sums = Vec::new();
        for _ in 0..50 {
            let z = [rng.random::<bool>(), rng.random::<bool>()];
            let row = (0..6)
                .map(|d| (0..2).filter(|&k| z[k]).map(|k| a[k][d]).sum::<f64>() + noise.sample(&mut rng))
                .collect();
            data.push(row);
            sums.push(z.iter().filter(|&&b| b).count());
        }
        (data, sums)
    }

    /// Every 3-feature membership matrix on 3 rows with no empty column,
    /// duplicated columns included.
    #[test]
    fn membership_conditional_matches_brute_force() {
        let params = IbpParams::new(1.3, 0.7).unwrap();
        let model = LinearGaussian::new(0.8, 1.5).unwrap();
        let mut rng = stream_rng(4, 0);
        let features: Vec<Vec<f64>> = (0..3).map(|_| model.sample_feature(2, &mut rng)).collect();
        let data: Vec<Vec<f64>> = (0..3).map(|_| model.sample_feature(2, &mut rng)).collect();
        let mut checked = 0;
        for bits in 0u32..1 << 9 {
            let z: Vec<Vec<bool>> = (0..3).map(|i| (0..3).map(|k| bits >> (3 * i + k) & 1 == 1).collect()).collect();
            if (0..3).any(|k| z.iter().all(|r| !r[k])) {
                continue;
            }
            let state = FeatureState::new(params, 2, z.clone(), features.clone()).unwrap();
            for i in 0..3 {
                for k in 0..3 {
                    let Some(p) = membership_conditional(&state, &data, &model, i, k).unwrap() else {
                        continue;
                    };
                    let joint = |on: bool| {
                        let mut z = z.clone();
                        z[i][k] = on;
                        FeatureState::new(params, 2, z, features.clone()).unwrap().log_joint(&data, &model).unwrap()
                    };
                    let want = 1.0 / (1.0 + (joint(false) - joint(true)).exp());
                    assert!((p - want).abs() < 1e-12, "{z:?} ({i},{k}): {p} vs {want}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn validation_and_pruning() {
        let params = IbpParams::new(1.0, 1.0).unwrap();
        assert!(FeatureState::new(params, 2, vec![vec![true]], vec![vec![1.0]]).is_err());
        let s = FeatureState::new(
            params,
            1,
            vec![vec![true, false], vec![false, false]],
            vec![vec![1.0], vec![2.0]],
        )
        .unwrap();
        assert_eq!(s.num_features(), 1);
        assert_eq!(s.features(), &[vec![1.0]]);
        assert!(s.is_consistent());
        assert_eq!(s.allocation().to_string(), "[[1]]");
    }

    #[test]
    fn feature_update_is_the_conjugate_posterior() {
        let m = LinearGaussian::new(0.5, 2.0).unwrap();
        let mut rng = stream_rng(40, 0);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| m.resample_feature(&[3.0], 4, &mut rng).unwrap()[0])
            .collect();
        let (mean, var) = crate::harness::stats::mean_var(&draws);
        let precision = 4.0 / 0.25 + 1.0 / 4.0;
        assert!((mean - 3.0 / 0.25 / precision).abs() < 0.01);
        assert!((var - 1.0 / precision).abs() < 0.01 / precision);
    }

    #[test]
    fn tiny_mass_stays_empty() {
        let params = IbpParams::new(1e-8, 1.0).unwrap();
        let m = LinearGaussian::new(1.0, 1.0).unwrap();
        let (data, _) = planted(41);
        let mut state = FeatureState::empty(params, 50, 6);
        let mut rng = stream_rng(42, 0);
        for _ in 0..20 {
            ibp_gibbs_sweep(&mut state, &data, &m, &mut rng).unwrap();
            assert_eq!(state.num_features(), 0);
        }
    }

    #[test]
    fn recovers_two_planted_features() {
        let params = IbpParams::new(1.0, 1.0).unwrap();
        let m = LinearGaussian::new(0.5, 3.0).unwrap();
        let mut mode_two = 0;
        let mut worst_rel = 0.0f64;
        for run in 0..20 {
            let (data, sums) = planted(100 + run);
            let mut rng = stream_rng(200 + run, 0);
            let mut state = multistart(&params, &data, &m, 8, 40, &mut rng).unwrap();
            let mut k_hist = [0usize; 16];
            let mut row_total = 0.0;
            let kept = 150;
            for sweep in 0..300 {
                ibp_gibbs_sweep(&mut state, &data, &m, &mut rng).unwrap();
                assert!(state.is_consistent());
                if sweep >= 300 - kept {
                    k_hist[state.num_features().min(15)] += 1;
                    row_total += state.row_sums().iter().sum::<usize>() as f64;
                }
            }
            let mode = (0..16).max_by_key(|&k| k_hist[k]).unwrap();
            if mode == 2 {
                mode_two += 1;
                let planted_total = sums.iter().sum::<usize>() as f64;
                let rel = (row_total / kept as f64 - planted_total).abs() / planted_total;
                worst_rel = worst_rel.max(rel);
            }
        }
        assert!(mode_two >= 16, "K=2 mode in {mode_two}/20 runs");
        assert!(worst_rel <= 0.1, "row sums off by {worst_rel}");
    }
}
