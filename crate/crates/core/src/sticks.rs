//! Stick-breaking frequencies and paintbox sampling.
//!
//! GEM sticks give cluster frequencies whose paintbox partition is the CRP;
//! round-indexed beta sticks give feature frequencies whose Bernoulli
//! featurization is the IBP. Finite truncations always carry a bound on the
//! mass they leave out.

use rand::Rng;
use serde::Serialize;

use crate::allocation::{induced_partition, FeatureAllocation, Partition};
use crate::epf::{poisson, CrpParams, IbpParams};
use crate::error::{domain, Error, Result};

/// Default largest tail mass [`paintbox_partition`] accepts.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StickKind {
    /// Frequencies of disjoint blocks; they sum to at most one.
    Partition,
    /// Independent inclusion probabilities of features.
    Feature,
}

/// A finite, ordered list of block or feature frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StickWeights {
    weights: Vec<f64>,
    kind: StickKind,
    /// Number of sticks broken (partition) or rounds simulated (feature).
    truncation: usize,
    /// Partition kind: `1 - Σ weights`. Feature kind: expected total weight
    /// of features not yet represented.
    tail_mass_bound: f64,
    /// Feature kind only: the index that first exhibits each feature, when
    /// the sticks are listed in order of appearance.
    #[serde(skip_serializing_if = "Option::is_none")]
    first_index: Option<Vec<usize>>,
}

impl StickWeights {
    /// Partition-kind weights; the tail bound is `1 - Σ weights`.
    pub fn partition(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return domain("partition weights must lie in (0, 1]");
        }
        let total: f64 = weights.iter().sum();
        if total > 1.0 + 1e-12 {
            return domain(format!("partition weights sum to {total} > 1"));
        }
        let truncation = weights.len();
        Ok(Self {
            weights,
            kind: StickKind::Partition,
            truncation,
            tail_mass_bound: (1.0 - total).max(0.0),
            first_index: None,
        })
    }

    /// Feature-kind weights with no appearance metadata: every index draws
    /// every feature independently.
    pub fn feature(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|&w| !(w > 0.0 && w <= 1.0)) {
            return domain("feature weights must lie in (0, 1]");
        }
        let truncation = weights.len();
        Ok(Self {
            weights,
            kind: StickKind::Feature,
            truncation,
            tail_mass_bound: 0.0,
            first_index: None,
        })
    }

    pub(crate) fn from_parts(
        weights: Vec<f64>,
        kind: StickKind,
        truncation: usize,
        tail_mass_bound: f64,
        first_index: Option<Vec<usize>>,
    ) -> Self {
        Self {
            weights,
            kind,
            truncation,
            tail_mass_bound,
            first_index,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> StickKind {
        self.kind
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn tail_mass_bound(&self) -> f64 {
        self.tail_mass_bound
    }

    pub fn first_index(&self) -> Option<&[usize]> {
        self.first_index.as_deref()
    }

    /// The same sticks listed in another order (appearance metadata follows).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut out = self.clone();
        out.weights = order.iter().map(|&k| self.weights[k]).collect();
        out.first_index = self
            .first_index
            .as_ref()
            .map(|f| order.iter().map(|&k| f[k]).collect());
        out
    }
}

/// GEM(θ) stick-breaking with concentration `theta`.
pub type GemParams = CrpParams;

/// Draw from Beta(1, b) by inversion: `1 - U^{1/b}`. Returns `(v, 1 - v)`.
fn beta_one<R: Rng + ?Sized>(b: f64, rng: &mut R) -> (f64, f64) {
    // U in (0, 1]: keeps 1 - v strictly positive unless b underflows it.
    let u = 1.0 - rng.random::<f64>();
    let rest = u.powf(1.0 / b);
    (1.0 - rest, rest)
}

/// Breaks `k` GEM sticks: `V_j ~ Beta(1, θ)`, `p_j = V_j Π_{i<j} (1 - V_i)`.
pub fn gem_sticks<R: Rng + ?Sized>(params: &GemParams, k: usize, rng: &mut R) -> Result<StickWeights> {
    if k == 0 {
        return domain("at least one stick is required");
    }
    let mut weights = Vec::with_capacity(k);
    let mut rest = 1.0;
    for _ in 0..k {
        let (v, keep) = beta_one(params.theta(), rng);
        weights.push(rest * v);
        rest *= keep;
    }
    Ok(StickWeights::from_parts(
        weights,
        StickKind::Partition,
        k,
        rest,
        None,
    ))
}

/// Smallest `K` with expected GEM tail `(θ / (1 + θ))^K <= target`.
pub fn gem_default_truncation(params: &GemParams, target: f64) -> usize {
    let ratio = params.theta() / (1.0 + params.theta());
    ((target.ln() / ratio.ln()).ceil() as usize).max(1)
}

/// GEM sticks broken until the realized tail mass is at most `target`,
/// starting from [`gem_default_truncation`] sticks.
pub fn gem_sticks_to_tolerance<R: Rng + ?Sized>(
    params: &GemParams,
    target: f64,
    rng: &mut R,
) -> Result<StickWeights> {
    if !(target > 0.0 && target < 1.0) {
        return domain(format!("tail target must lie in (0, 1), got {target}"));
    }
    let mut sticks = gem_sticks(params, gem_default_truncation(params, target), rng)?;
    while sticks.tail_mass_bound > target {
        let (v, keep) = beta_one(params.theta(), rng);
        sticks.weights.push(sticks.tail_mass_bound * v);
        sticks.tail_mass_bound *= keep;
        sticks.truncation += 1;
    }
    Ok(sticks)
}

/// Paintbox partition of `[n]`: i.i.d. labels from the stick frequencies.
///
/// The tail mass left by truncation is spread over the kept sticks by
/// renormalizing them; sticks whose tail exceeds `tolerance` are refused with
/// an estimate of how many sticks would be needed.
pub fn paintbox_partition<R: Rng + ?Sized>(
    sticks: &StickWeights,
    n: usize,
    tolerance: f64,
    rng: &mut R,
) -> Result<Partition> {
    if sticks.kind != StickKind::Partition {
        return domain("paintbox partitions need partition-kind sticks");
    }
    if sticks.weights.is_empty() {
        return domain("no sticks to paint from");
    }
    if sticks.tail_mass_bound > tolerance {
        // Extrapolate the realized geometric decay of the tail.
        let per_stick = sticks.tail_mass_bound.ln() / sticks.truncation as f64;
        let required_k = if per_stick < 0.0 {
            (tolerance.ln() / per_stick).ceil() as usize
        } else {
            usize::MAX
        };
        return Err(Error::TailMassTooLarge {
            tail_mass: sticks.tail_mass_bound,
            tolerance,
            required_k,
        });
    }
    let labels = categorical_draws(&sticks.weights, n, rng);
    Ok(induced_partition(&labels))
}

/// `n` i.i.d. draws from the (renormalized) weights by inverse CDF.
pub(crate) fn categorical_draws<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let last = weights.len() - 1;
    (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

/// Exact probability that the paintbox with the (renormalized) frequencies
/// `weights` yields a given partition with the given block sizes:
/// `Σ over distinct atoms a_1..a_K of Π_k p_{a_k}^{N_k}`.
///
/// The sum over distinct atoms is written through power sums
/// `S_m = Σ p^m` by Möbius inversion over set partitions of the blocks.
pub fn paintbox_probability(weights: &[f64], block_sizes: &[usize]) -> Result<f64> {
    if weights.iter().any(|&w| !(w >= 0.0)) || weights.iter().sum::<f64>() <= 0.0 {
        return domain("weights must be nonnegative with positive sum");
    }
    if block_sizes.contains(&0) {
        return domain("block sizes must be positive");
    }
    let total: f64 = weights.iter().sum();
    let n: usize = block_sizes.iter().sum();
    let power_sums: Vec<f64> = (0..=n)
        .map(|m| weights.iter().map(|w| (w / total).powi(m as i32)).sum())
        .collect();
    let mut prob = 0.0;
    for merge in crate::harness::enumerate_partitions(block_sizes.len())? {
        let mut term = 1.0;
        for group in merge.blocks() {
            let len = group.len();
            let factorial: f64 = (1..len).map(|j| j as f64).product();
            let sign = if len % 2 == 1 { 1.0 } else { -1.0 };
            let size: usize = group.iter().map(|&k| block_sizes[k - 1]).sum();
            term *= sign * factorial * power_sums[size];
        }
        prob += term;
    }
    Ok(prob.max(0.0))
}

/// IBP sticks grouped by the round (index) on which they first appear:
/// round `m` holds `Poisson(γθ / (θ + m - 1))` sticks, each `Beta(1, θ + m - 1)`.
pub fn ibp_sticks_by_round<R: Rng + ?Sized>(
    params: &IbpParams,
    n_rounds: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    (1..=n_rounds)
        .map(|m| {
            let count = poisson(params.new_feature_rate(m), rng);
            let b = params.theta() + m as f64 - 1.0;
            (0..count).map(|_| beta_one(b, rng).0).collect()
        })
        .collect()
}

/// Feature-kind sticks for the first `n_rounds` indices of an IBP, in order
/// of appearance. The tail bound is the expected total weight of features
/// that no index in `[n_rounds]` exhibits, `γθ / (θ + n_rounds)`.
pub fn ibp_sticks<R: Rng + ?Sized>(
    params: &IbpParams,
    n_rounds: usize,
    rng: &mut R,
) -> Result<StickWeights> {
    if n_rounds == 0 {
        return domain("at least one round is required");
    }
    let rounds = ibp_sticks_by_round(params, n_rounds, rng);
    Ok(sticks_from_rounds(params, &rounds))
}

pub(crate) fn sticks_from_rounds(params: &IbpParams, rounds: &[Vec<f64>]) -> StickWeights {
    let mut weights = Vec::new();
    let mut first = Vec::new();
    for (m, round) in rounds.iter().enumerate() {
        weights.extend_from_slice(round);
        first.extend(std::iter::repeat_n(m + 1, round.len()));
    }
    let n = rounds.len();
    StickWeights::from_parts(
        weights,
        StickKind::Feature,
        n,
        params.gamma() * params.theta() / (params.theta() + n as f64),
        Some(first),
    )
}

/// Feature membership matrix (column per stick) for indices `1..=n`.
///
/// Without appearance metadata each index joins feature `k` independently
/// with probability `weights[k]`. Sticks listed in order of appearance were
/// selected by their first index: feature `k` excludes indices before
/// `first_index[k]`, contains `first_index[k]`, and later indices join with
/// probability `weights[k]`.
pub fn bernoulli_membership<R: Rng + ?Sized>(
    sticks: &StickWeights,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<usize>>> {
    if sticks.kind != StickKind::Feature {
        return domain("Bernoulli featurization needs feature-kind sticks");
    }
    if let Some(bad) = sticks.weights.iter().find(|&&w| !(w > 0.0 && w <= 1.0)) {
        return domain(format!("feature weight {bad} outside (0, 1]"));
    }
    if sticks.first_index.is_some() && n > sticks.truncation {
        return domain(format!(
            "sticks cover the first {} indices only, {n} requested",
            sticks.truncation
        ));
    }
    let mut columns = Vec::with_capacity(sticks.weights.len());
    for (k, &q) in sticks.weights.iter().enumerate() {
        let start = sticks.first_index.as_ref().map_or(1, |f| f[k]);
        let mut col = Vec::new();
        if start > n {
            columns.push(col);
            continue;
        }
        let from = if sticks.first_index.is_some() {
            col.push(start);
            start + 1
        } else {
            1
        };
        for i in from..=n {
            if rng.random::<f64>() < q {
                col.push(i);
            }
        }
        columns.push(col);
    }
    Ok(columns)
}

/// Bernoulli featurization of `[n]`; features no index joined are dropped.
pub fn bernoulli_featurize<R: Rng + ?Sized>(
    sticks: &StickWeights,
    n: usize,
    rng: &mut R,
) -> Result<FeatureAllocation> {
    let columns = bernoulli_membership(sticks, n, rng)?;
    FeatureAllocation::new(n, columns.into_iter().filter(|c| !c.is_empty()).collect())
}
