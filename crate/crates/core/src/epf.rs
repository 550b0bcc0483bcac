//! Exchangeable probability functions for the Chinese restaurant process
//! (partitions) and the Indian buffet process (feature allocations), the
//! prediction rules they induce, and sequential samplers built on them.
//!
//! All probabilities are carried on the natural-log scale.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::allocation::{FeatureAllocation, Partition};
use crate::error::{domain, Result};
use crate::harness::enumerate::enumerate_partitions;
use crate::numeric::{ln_factorial, ln_gamma};

/// Chinese restaurant process with concentration `theta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrpParams {
    theta: f64,
}

impl CrpParams {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return domain(format!("CRP concentration must be positive, got {theta}"));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Indian buffet process with mass `gamma > 0` and concentration `theta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IbpParams {
    gamma: f64,
    theta: f64,
}

impl IbpParams {
    pub fn new(gamma: f64, theta: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return domain(format!("IBP mass must be positive, got {gamma}"));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return domain(format!("IBP concentration must be positive, got {theta}"));
        }
        Ok(Self { gamma, theta })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Poisson rate of new features at customer `m` (1-based).
    pub fn new_feature_rate(&self, m: usize) -> f64 {
        self.gamma * self.theta / (self.theta + m as f64 - 1.0)
    }

    /// Expected number of features after `n` customers.
    pub fn expected_features(&self, n: usize) -> f64 {
        (1..=n).map(|m| self.new_feature_rate(m)).sum()
    }
}

/// A probability on the log scale; `-inf` marks an impossible configuration.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct EpfValue {
    pub log_prob: f64,
}

impl EpfValue {
    pub fn prob(&self) -> f64 {
        self.log_prob.exp()
    }
}

/// `log Π_{j=0}^{m-1} (x + j a)`.
pub fn rising_factorial_log(x: f64, m: usize, a: f64) -> f64 {
    debug_assert!(x > 0.0 && a >= 0.0);
    if a > 0.0 && m > 32 {
        let r = x / a;
        return m as f64 * a.ln() + ln_gamma(r + m as f64) - ln_gamma(r);
    }
    (0..m).map(|j| (x + j as f64 * a).ln()).sum()
}

/// CRP exchangeable partition probability function:
/// `θ^{K-1} Π (N_k - 1)! / (θ + 1)_{N-1↑1}`.
pub fn eppf_crp(params: &CrpParams, block_sizes: &[usize]) -> Result<EpfValue> {
    if block_sizes.is_empty() {
        return domain("EPPF needs at least one block");
    }
    if block_sizes.contains(&0) {
        return domain("EPPF block sizes must be positive");
    }
    let theta = params.theta;
    let n: usize = block_sizes.iter().sum();
    let k = block_sizes.len();
    let log_prob = (k - 1) as f64 * theta.ln()
        + block_sizes.iter().map(|&s| ln_factorial(s - 1)).sum::<f64>()
        - rising_factorial_log(theta + 1.0, n - 1, 1.0);
    Ok(EpfValue { log_prob })
}

/// Probability that the next customer joins each existing table (in the
/// order of `counts`) or, in the last entry, a new table.
pub fn crp_predict(params: &CrpParams, counts: &[usize]) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let norm = n as f64 + params.theta;
    counts
        .iter()
        .map(|&c| c as f64 / norm)
        .chain(std::iter::once(params.theta / norm))
        .collect()
}

/// Index of the category drawn by inverse CDF from (not necessarily
/// normalized) nonnegative weights.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return k;
        }
    }
    // Only reachable through rounding at the top end.
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Sequential CRP draw of a partition of `[n]`.
pub fn crp_sample<R: Rng + ?Sized>(params: &CrpParams, n: usize, rng: &mut R) -> Partition {
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for i in 1..=n {
        weights.clear();
        weights.extend(blocks.iter().map(|b| b.len() as f64));
        weights.push(params.theta);
        let k = sample_index(&weights, rng);
        if k == blocks.len() {
            blocks.push(vec![i]);
        } else {
            blocks[k].push(i);
        }
    }
    Partition::from_valid_blocks(n, blocks)
}

/// Log multinomial coefficient `K! / (ρ_1! ... ρ_H!)` counting the distinct
/// orderings of a feature allocation.
pub fn log_orderings(f: &FeatureAllocation) -> f64 {
    let (_, rho) = f.multiplicities();
    ln_factorial(f.num_blocks()) - rho.iter().map(|&r| ln_factorial(r)).sum::<f64>()
}

/// Probability of one uniformly random ordering given the probability of the
/// unordered allocation.
pub fn ordered_from_unordered_log(f: &FeatureAllocation, unordered_log_prob: f64) -> f64 {
    unordered_log_prob - log_orderings(f)
}

/// IBP exchangeable feature probability function: the probability of a
/// uniformly random ordering of a feature allocation of `[n]` whose blocks
/// have the given sizes.
pub fn efpf_ibp(params: &IbpParams, n: usize, block_sizes: &[usize]) -> Result<EpfValue> {
    if let Some(&bad) = block_sizes.iter().find(|&&s| s == 0 || s > n) {
        return domain(format!("feature size {bad} outside 1..={n}"));
    }
    let IbpParams { gamma, theta } = *params;
    let k = block_sizes.len();
    let harmonic: f64 = (1..=n).map(|m| 1.0 / (theta + m as f64 - 1.0)).sum();
    let log_norm = ln_gamma(n as f64 + theta);
    let log_prob = -ln_factorial(k) + k as f64 * (theta * gamma).ln() - theta * gamma * harmonic
        + block_sizes
            .iter()
            .map(|&s| ln_gamma(s as f64) + ln_gamma((n - s) as f64 + theta) - log_norm)
            .sum::<f64>();
    Ok(EpfValue { log_prob })
}

/// Probability of the unordered IBP feature allocation `f`.
pub fn ibp_allocation_log_prob(params: &IbpParams, f: &FeatureAllocation) -> Result<EpfValue> {
    let ordered = efpf_ibp(params, f.n(), &f.block_sizes())?;
    Ok(EpfValue {
        log_prob: ordered.log_prob + log_orderings(f),
    })
}

/// Conditional law of the next customer's dishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IbpPrediction {
    /// Probability of taking each existing dish, in the order of `counts`.
    pub inclusion: Vec<f64>,
    /// Poisson rate of brand-new dishes.
    pub new_rate: f64,
}

/// Prediction rule for customer `n_next` given the popularity of existing
/// dishes among the first `n_next - 1` customers.
pub fn ibp_predict(params: &IbpParams, n_next: usize, counts: &[usize]) -> Result<IbpPrediction> {
    if n_next == 0 {
        return domain("customers are numbered from 1");
    }
    if let Some(&bad) = counts.iter().find(|&&c| c >= n_next) {
        return domain(format!(
            "dish count {bad} exceeds the {} previous customers",
            n_next - 1
        ));
    }
    let denom = params.theta + n_next as f64 - 1.0;
    Ok(IbpPrediction {
        inclusion: counts.iter().map(|&c| c as f64 / denom).collect(),
        new_rate: params.theta * params.gamma / denom,
    })
}

pub(crate) fn poisson<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    // rand_distr's Poisson is exact for any positive rate.
    Poisson::new(rate).expect("positive rate").sample(rng) as usize
}

/// Sequential IBP draw of a feature allocation of `[n]`. Returns the
/// membership columns in order of appearance alongside the allocation.
pub fn ibp_sample_columns<R: Rng + ?Sized>(
    params: &IbpParams,
    n: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    let mut columns: Vec<Vec<usize>> = Vec::new();
    for i in 1..=n {
        let denom = params.theta + i as f64 - 1.0;
        for col in columns.iter_mut() {
            if rng.random::<f64>() * denom < col.len() as f64 {
                col.push(i);
            }
        }
        let fresh = poisson(params.new_feature_rate(i), rng);
        columns.extend(std::iter::repeat_n(vec![i], fresh));
    }
    columns
}

pub fn ibp_sample<R: Rng + ?Sized>(params: &IbpParams, n: usize, rng: &mut R) -> FeatureAllocation {
    let columns = ibp_sample_columns(params, n, rng);
    FeatureAllocation::new(n, columns).expect("sampled blocks are valid")
}

/// Which EPPF requirement a candidate violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Symmetry,
    Additivity,
    Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub n: usize,
    pub block_sizes: Vec<usize>,
    /// The value that should equal `expected`.
    pub observed: f64,
    pub expected: f64,
}

/// Outcome of [`eppf_validity_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub n_max: usize,
    pub tol: f64,
    pub max_symmetry_error: f64,
    pub max_additivity_error: f64,
    pub max_normalization_error: f64,
    pub first_violation: Option<Violation>,
}

impl ValidityReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// A symmetric function of block sizes that is not an EPPF:
/// `p(1) = 1`, `p(1,1) = 0.1`, `p(2) = 0.8`, zero elsewhere. The mass of `[1]`
/// is not the sum over its extensions.
pub fn inconsistent_eppf_example(block_sizes: &[usize]) -> f64 {
    let mut s = block_sizes.to_vec();
    s.sort_unstable();
    match s.as_slice() {
        [1] => 1.0,
        [1, 1] => 0.1,
        [2] => 0.8,
        _ => 0.0,
    }
}

/// Checks whether `candidate` (a probability, not a log-probability, as a
/// function of block sizes) behaves as an EPPF on partitions of `[n]` for
/// `n = 1..=n_max`: symmetric in its arguments, summing to one over all
/// partitions of `[n]`, and equal to the sum over the one-index extensions
/// of each partition to `[n + 1]`.
pub fn eppf_validity_check(
    candidate: &dyn Fn(&[usize]) -> f64,
    n_max: usize,
    tol: f64,
) -> Result<ValidityReport> {
    let mut report = ValidityReport {
        n_max,
        tol,
        max_symmetry_error: 0.0,
        max_additivity_error: 0.0,
        max_normalization_error: 0.0,
        first_violation: None,
    };
    let flag = |report: &mut ValidityReport, v: Violation| {
        if report.first_violation.is_none() {
            report.first_violation = Some(v);
        }
    };
    for n in 1..=n_max {
        let partitions = enumerate_partitions(n)?;
        let mut total = 0.0;
        for p in &partitions {
            let sizes = p.block_sizes();
            let value = candidate(&sizes);
            total += value;

            let orders = if sizes.len() <= 6 {
                permutations(&sizes)
            } else {
                let mut rev = sizes.clone();
                rev.reverse();
                vec![rev]
            };
            for order in orders {
                let other = candidate(&order);
                let err = (other - value).abs();
                report.max_symmetry_error = report.max_symmetry_error.max(err);
                if err > tol {
                    flag(
                        &mut report,
                        Violation {
                            kind: ViolationKind::Symmetry,
                            n,
                            block_sizes: order,
                            observed: other,
                            expected: value,
                        },
                    );
                }
            }

            let extended: f64 = p
                .extensions()
                .iter()
                .map(|e| candidate(&e.block_sizes()))
                .sum();
            let err = (extended - value).abs();
            report.max_additivity_error = report.max_additivity_error.max(err);
            if err > tol {
                flag(
                    &mut report,
                    Violation {
                        kind: ViolationKind::Additivity,
                        n,
                        block_sizes: sizes.clone(),
                        observed: extended,
                        expected: value,
                    },
                );
            }
        }
        let err = (total - 1.0).abs();
        report.max_normalization_error = report.max_normalization_error.max(err);
        if err > tol {
            flag(
                &mut report,
                Violation {
                    kind: ViolationKind::Normalization,
                    n,
                    block_sizes: Vec::new(),
                    observed: total,
                    expected: 1.0,
                },
            );
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use std::collections::HashMap;

    fn crp(theta: f64) -> CrpParams {
        CrpParams::new(theta).unwrap()
    }

    fn ibp(gamma: f64, theta: f64) -> IbpParams {
        IbpParams::new(gamma, theta).unwrap()
    }

    #[test]
    fn params_validate() {
        assert!(CrpParams::new(0.0).is_err());
        assert!(CrpParams::new(f64::NAN).is_err());
        assert!(IbpParams::new(1.0, -1.0).is_err());
        assert!(IbpParams::new(0.0, 1.0).is_err());
    }

    #[test]
    fn rising_factorial_examples() {
        assert_eq!(rising_factorial_log(2.0, 0, 1.0), 0.0);
        assert!((rising_factorial_log(2.0, 3, 1.0) - 24f64.ln()).abs() < 1e-15);
        let direct = 0.5 * 1.5 * 2.5 * 3.5;
        assert!((rising_factorial_log(0.5, 4, 1.0) - f64::ln(direct)).abs() < 1e-15);
        // The log-gamma path agrees with the direct product.
        let direct: f64 = (0..100).map(|j| (0.7 + j as f64 * 0.3).ln()).sum();
        assert!((rising_factorial_log(0.7, 100, 0.3) - direct).abs() < 1e-9);
        assert!((rising_factorial_log(3.0, 5, 0.0) - 5.0 * 3f64.ln()).abs() < 1e-15);
    }

    /// Probability of a partition as the product of CRP prediction
    /// probabilities along the given index order.
    fn sequential_probability(params: &CrpParams, p: &Partition, order: &[usize]) -> f64 {
        let z = p.assignments();
        let mut seen: Vec<usize> = Vec::new(); // block id of each open table
        let mut counts: Vec<usize> = Vec::new();
        let mut prob = 1.0;
        for &i in order {
            let block = z[i - 1];
            let probs = crp_predict(params, &counts);
            match seen.iter().position(|&b| b == block) {
                Some(t) => {
                    prob *= probs[t];
                    counts[t] += 1;
                }
                None => {
                    prob *= probs[counts.len()];
                    seen.push(block);
                    counts.push(1);
                }
            }
        }
        prob
    }

    #[test]
    fn eppf_crp_examples() {
        assert_eq!(eppf_crp(&crp(3.3), &[1]).unwrap().log_prob, 0.0);
        let oracle = sequential_probability(&crp(1.0), &"[[1,2],[3]]".parse().unwrap(), &[1, 2, 3]);
        assert!((oracle - 1.0 / 6.0).abs() < 1e-15);
        assert!((eppf_crp(&crp(1.0), &[2, 1]).unwrap().log_prob - (1f64 / 6.0).ln()).abs() < 1e-14);
        assert!((eppf_crp(&crp(1.0), &[3]).unwrap().log_prob - (1f64 / 3.0).ln()).abs() < 1e-14);
        assert!(eppf_crp(&crp(1.0), &[]).is_err());
        assert!(eppf_crp(&crp(1.0), &[2, 0]).is_err());
    }

    #[test]
    fn crp_predict_examples() {
        // Figure-1 style state: table 1 seats 5 of 11 customers.
        let theta = 0.7;
        let probs = crp_predict(&crp(theta), &[5, 3, 2, 1]);
        assert!((probs[0] - 5.0 / (11.0 + theta)).abs() < 1e-15);
        assert!((probs[4] - theta / (11.0 + theta)).abs() < 1e-15);
        assert_eq!(crp_predict(&crp(2.0), &[]), vec![1.0]);
        let probs = crp_predict(&crp(1.0), &[1, 1]);
        for p in &probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        // Ratio of EPPF values reproduces the new-table probability.
        let ratio = (eppf_crp(&crp(1.0), &[1, 1, 1]).unwrap().log_prob
            - eppf_crp(&crp(1.0), &[1, 1]).unwrap().log_prob)
            .exp();
        assert!((ratio - probs[2]).abs() < 1e-14);
    }

    #[test]
    fn prediction_product_matches_eppf_any_order() {
        let mut rng = stream_rng(11, 0);
        for &theta in &[0.3, 1.0, 4.5] {
            let params = crp(theta);
            for n in 1..=6 {
                for p in enumerate_partitions(n).unwrap() {
                    let exact = eppf_crp(&params, &p.block_sizes()).unwrap().prob();
                    let mut order: Vec<usize> = (1..=n).collect();
                    let forward = sequential_probability(&params, &p, &order);
                    order.shuffle(&mut rng);
                    let shuffled = sequential_probability(&params, &p, &order);
                    assert!((forward - exact).abs() < 1e-12 * exact.max(1e-300) + 1e-15);
                    assert!((shuffled - exact).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn crp_predict_sums_to_one() {
        let probs = crp_predict(&crp(0.37), &[4, 9, 1, 1, 2]);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn crp_sample_small_cases() {
        let mut rng = stream_rng(3, 0);
        assert_eq!(crp_sample(&crp(5.0), 1, &mut rng).to_string(), "[[1]]");
        let reps = 200_000;
        let together = (0..reps)
            .filter(|_| crp_sample(&crp(1.0), 2, &mut rng).num_blocks() == 1)
            .count();
        let se = (0.25 / reps as f64).sqrt();
        assert!((together as f64 / reps as f64 - 0.5).abs() < 4.0 * se);
        let apart = (0..10_000)
            .filter(|_| crp_sample(&crp(1e6), 2, &mut rng).num_blocks() == 2)
            .count();
        assert!(apart >= 9_990);
    }

    #[test]
    fn crp_sample_matches_eppf_on_four() {
        let params = crp(1.0);
        let mut rng = stream_rng(5, 0);
        let reps = 100_000;
        let mut counts: HashMap<Partition, usize> = HashMap::new();
        for _ in 0..reps {
            *counts.entry(crp_sample(&params, 4, &mut rng)).or_default() += 1;
        }
        let tvd: f64 = enumerate_partitions(4)
            .unwrap()
            .iter()
            .map(|p| {
                let emp = *counts.get(p).unwrap_or(&0) as f64 / reps as f64;
                (emp - eppf_crp(&params, &p.block_sizes()).unwrap().prob()).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tvd <= 0.02, "tvd = {tvd}");
    }

    #[test]
    fn multiplicity_correction_examples() {
        let same = FeatureAllocation::new(5, vec![vec![2, 3], vec![2, 3]]).unwrap();
        assert_eq!(ordered_from_unordered_log(&same, -1.25), -1.25);
        let diff = FeatureAllocation::new(5, vec![vec![2, 3], vec![2, 5]]).unwrap();
        assert!((ordered_from_unordered_log(&diff, -1.25) - (-1.25 - 2f64.ln())).abs() < 1e-15);
        assert_eq!(ordered_from_unordered_log(&FeatureAllocation::empty(3), -0.5), -0.5);
    }

    #[test]
    fn efpf_ibp_examples() {
        let g = 1.7;
        assert!((efpf_ibp(&ibp(g, 0.4), 1, &[]).unwrap().log_prob + g).abs() < 1e-14);
        // n = 1: K blocks {1} with Poisson(γ) probability.
        for k in 0..6 {
            let sizes = vec![1; k];
            let lp = efpf_ibp(&ibp(g, 2.3), 1, &sizes).unwrap().log_prob;
            let pmf = statrs::distribution::Discrete::pmf(
                &statrs::distribution::Poisson::new(g).unwrap(),
                k as u64,
            );
            // All blocks coincide, so the ordered and unordered laws agree.
            assert!((lp.exp() - pmf).abs() < 1e-14);
        }
        let lp = efpf_ibp(&ibp(1.0, 1.0), 2, &[2]).unwrap().log_prob;
        assert!((lp - (0.5 * (-1.5f64).exp()).ln()).abs() < 1e-14);
        assert!(efpf_ibp(&ibp(1.0, 1.0), 2, &[3]).is_err());
        assert!(efpf_ibp(&ibp(1.0, 1.0), 2, &[0]).is_err());
    }

    #[test]
    fn efpf_matches_monte_carlo_at_two() {
        let params = ibp(1.0, 1.0);
        let mut rng = stream_rng(21, 0);
        let reps = 1_000_000;
        let target = FeatureAllocation::new(2, vec![vec![1, 2]]).unwrap();
        let hits = (0..reps)
            .filter(|_| ibp_sample(&params, 2, &mut rng) == target)
            .count();
        let p = 0.5 * (-1.5f64).exp();
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((hits as f64 / reps as f64 - p).abs() < 3.0 * se);
    }

    /// All one-index extensions of an allocation of `[n-1]` to `[n]` with at
    /// most `max_new` new singleton features.
    fn feature_extensions(f: &FeatureAllocation, max_new: usize) -> Vec<FeatureAllocation> {
        let n = f.n() + 1;
        let mut partial: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
        for (block, mult) in f.unique_blocks() {
            let mut next = Vec::new();
            for acc in &partial {
                // Copies are indistinguishable: choose how many index n joins.
                for joined in 0..=*mult {
                    let mut blocks = acc.clone();
                    for c in 0..*mult {
                        let mut b = block.clone();
                        if c < joined {
                            b.push(n);
                        }
                        blocks.push(b);
                    }
                    next.push(blocks);
                }
            }
            partial = next;
        }
        let mut out = Vec::new();
        for blocks in partial {
            for new in 0..=max_new {
                let mut b = blocks.clone();
                b.extend(std::iter::repeat_n(vec![n], new));
                out.push(FeatureAllocation::new(n, b).unwrap());
            }
        }
        out
    }

    #[test]
    fn efpf_marginalizes_over_last_index() {
        let params = ibp(0.8, 1.6);
        // Truncate the new-feature count where the Poisson tail is < 1e-12.
        let max_new = 20;
        let mut frontier = vec![FeatureAllocation::empty(0)];
        for n in 1..=3 {
            let mut next = Vec::new();
            for f in &frontier {
                let total: f64 = feature_extensions(f, max_new)
                    .iter()
                    .map(|e| ibp_allocation_log_prob(&params, e).unwrap().prob())
                    .sum();
                if n > 1 {
                    let own = ibp_allocation_log_prob(&params, f).unwrap().prob();
                    assert!((total - own).abs() < 1e-12, "{f}: {total} vs {own}");
                } else {
                    assert!((total - 1.0).abs() < 1e-12);
                }
                next.extend(
                    feature_extensions(f, 3)
                        .into_iter()
                        .filter(|e| e.num_blocks() <= 3),
                );
            }
            frontier = next;
        }
    }

    #[test]
    fn ibp_predict_examples() {
        let p = ibp(2.0, 1.0);
        assert_eq!(ibp_predict(&p, 1, &[]).unwrap().new_rate, 2.0);
        assert_eq!(ibp_predict(&p, 2, &[]).unwrap().new_rate, 1.0);
        let q = ibp(1.0, 0.5);
        let pred = ibp_predict(&q, 4, &[3, 1]).unwrap();
        assert!((pred.inclusion[0] - 3.0 / 3.5).abs() < 1e-15);
        assert!((pred.inclusion[1] - 1.0 / 3.5).abs() < 1e-15);
        assert!(ibp_predict(&q, 4, &[4]).is_err());
        assert!(ibp_predict(&q, 0, &[]).is_err());
    }

    #[test]
    fn ibp_sample_first_customer_is_poisson() {
        let params = ibp(1.5, 0.7);
        let mut rng = stream_rng(8, 0);
        let reps = 100_000;
        let mut total = 0usize;
        for _ in 0..reps {
            let f = ibp_sample(&params, 1, &mut rng);
            assert!(f.blocks().all(|b| b == &vec![1]));
            total += f.num_blocks();
        }
        let se = (1.5 / reps as f64).sqrt();
        assert!((total as f64 / reps as f64 - 1.5).abs() < 4.0 * se);
        let empty = (0..1000)
            .filter(|_| ibp_sample(&ibp(1e-9, 1.0), 5, &mut rng).num_blocks() == 0)
            .count();
        assert_eq!(empty, 1000);
    }

    #[test]
    fn ibp_sample_mean_features_two_customers() {
        let params = ibp(1.3, 1.0);
        let mut rng = stream_rng(9, 0);
        let reps = 200_000;
        let ks: Vec<f64> = (0..reps)
            .map(|_| ibp_sample(&params, 2, &mut rng).num_blocks() as f64)
            .collect();
        let mean = ks.iter().sum::<f64>() / reps as f64;
        let expected = 1.3 * 1.5;
        assert!((params.expected_features(2) - expected).abs() < 1e-15);
        // K_2 is Poisson with this mean.
        assert!((mean - expected).abs() < 4.0 * (expected / reps as f64).sqrt());
    }

    #[test]
    fn validity_check_accepts_crp() {
        let params = crp(1.0);
        let f = |s: &[usize]| eppf_crp(&params, s).unwrap().prob();
        let report = eppf_validity_check(&f, 5, 1e-12).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.max_normalization_error < 1e-12);
    }

    #[test]
    fn validity_check_rejects_fake_eppf() {
        let report = eppf_validity_check(&inconsistent_eppf_example, 2, 1e-9).unwrap();
        let v = report.first_violation.unwrap();
        assert_eq!(v.kind, ViolationKind::Additivity);
        assert_eq!(v.n, 1);
        assert!((v.observed - 0.9).abs() < 1e-15);
    }

    #[test]
    fn validity_check_rejects_constant_and_asymmetric() {
        let one = |_: &[usize]| 1.0;
        let report = eppf_validity_check(&one, 3, 1e-9).unwrap();
        let v = report.first_violation.unwrap();
        // p(1) = 1 is fine, but 1 ≠ p(1,1) + p(2) = 2 comes first.
        assert_eq!(v.kind, ViolationKind::Additivity);
        // Two partitions of [2], each with mass 1.
        assert!(report.max_normalization_error >= 1.0);

        let lopsided = |s: &[usize]| if s.first() == Some(&1) { 0.6 } else { 0.4 };
        let report = eppf_validity_check(&lopsided, 3, 1e-9).unwrap();
        assert!(report.max_symmetry_error > 0.1);
    }

    /// The two-feature model in which each of two indices independently
    /// takes {A}, {B}, {A,B} or nothing. Orderings of {{2},{2}} and
    /// {{1},{2}} share N = 2 and block sizes (1, 1), yet their probabilities
    /// differ, so no exchangeable feature probability function exists.
    #[test]
    fn general_two_block_model_has_no_efpf() {
        let (p1, p2, p3, p4) = (0.1, 0.2, 0.3, 0.4);
        let outcomes = [(vec!['A'], p1), (vec!['B'], p2), (vec!['A', 'B'], p3), (vec![], p4)];
        let mut law: HashMap<FeatureAllocation, f64> = HashMap::new();
        for (y1, q1) in &outcomes {
            for (y2, q2) in &outcomes {
                let f = crate::allocation::induced_feature_allocation(&[y1.clone(), y2.clone()]);
                *law.entry(f).or_default() += q1 * q2;
            }
        }
        let both_on_two = FeatureAllocation::new(2, vec![vec![2], vec![2]]).unwrap();
        let split = FeatureAllocation::new(2, vec![vec![1], vec![2]]).unwrap();
        let ordered = |f: &FeatureAllocation| law[f].ln() - log_orderings(f);
        assert_eq!(both_on_two.block_sizes(), split.block_sizes());
        assert!((ordered(&both_on_two).exp() - p3 * p4).abs() < 1e-15);
        // Ordered {A}={1},{B}={2} or the swap: each with probability p1 p2 + p2 p1 split evenly.
        assert!((ordered(&split).exp() - p1 * p2).abs() < 1e-15);
        assert!((ordered(&both_on_two) - ordered(&split)).abs() > 0.1);
    }

    proptest! {
        #[test]
        fn eppf_symmetric(sizes in prop::collection::vec(1usize..6, 1..6), theta in 0.05f64..20.0, seed in any::<u64>()) {
            let params = crp(theta);
            let mut shuffled = sizes.clone();
            shuffled.shuffle(&mut stream_rng(seed, 0));
            let a = eppf_crp(&params, &sizes).unwrap().log_prob;
            let b = eppf_crp(&params, &shuffled).unwrap().log_prob;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn efpf_symmetric(sizes in prop::collection::vec(1usize..8, 0..6), gamma in 0.1f64..5.0, theta in 0.1f64..5.0, seed in any::<u64>()) {
            let params = ibp(gamma, theta);
            let mut shuffled = sizes.clone();
            shuffled.shuffle(&mut stream_rng(seed, 0));
            let a = efpf_ibp(&params, 8, &sizes).unwrap().log_prob;
            let b = efpf_ibp(&params, 8, &shuffled).unwrap().log_prob;
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
