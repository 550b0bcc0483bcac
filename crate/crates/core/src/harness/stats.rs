//! Distances between empirical and reference distributions.

use std::collections::HashMap;
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Result};

/// Histogram of hashable outcomes.
pub fn histogram<K: Hash + Eq, I: IntoIterator<Item = K>>(items: I) -> HashMap<K, usize> {
    let mut counts = HashMap::new();
    for item in items {
        *counts.entry(item).or_insert(0) += 1;
    }
    counts
}

/// Total variation distance between two empirical distributions.
pub fn empirical_tvd<K: Hash + Eq>(a: &HashMap<K, usize>, b: &HashMap<K, usize>) -> f64 {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    if na == 0 || nb == 0 {
        return if na == nb { 0.0 } else { 1.0 };
    }
    let (na, nb) = (na as f64, nb as f64);
    let mut sum = 0.0;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        sum += (ca as f64 / na - cb as f64 / nb).abs();
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            sum += cb as f64 / nb;
        }
    }
    0.5 * sum
}

/// Total variation distance between an empirical distribution and a
/// reference law given as `(outcome, probability)` pairs. Empirical mass on
/// outcomes absent from the reference counts fully.
pub fn tvd_to_reference<K: Hash + Eq>(
    counts: &HashMap<K, usize>,
    reference: impl IntoIterator<Item = (K, f64)>,
) -> f64 {
    let total: usize = counts.values().sum();
    let total = total.max(1) as f64;
    let mut covered = 0usize;
    let mut sum = 0.0;
    for (k, p) in reference {
        let c = counts.get(&k).copied().unwrap_or(0);
        covered += c;
        sum += (c as f64 / total - p).abs();
    }
    sum += (counts.values().sum::<usize>() - covered) as f64 / total;
    0.5 * sum
}

/// Kolmogorov–Smirnov distance `sup_x |F_n(x) - F(x)|` between the empirical
/// CDF of `samples` and the continuous reference `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.len() < 100 {
        return domain(format!(
            "KS distance needs at least 100 samples, got {}",
            samples.len()
        ));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return domain("KS distance: NaN sample");
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / m - f).max(f - i as f64 / m);
    }
    Ok(d)
}

/// CDF of Beta(a, b).
pub fn beta_cdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        statrs::function::beta::beta_reg(a, b, x)
    }
}

/// Pearson chi-square goodness-of-fit result.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Chi-square test of observed counts against category probabilities.
/// Categories with expected count below 5 are pooled into their neighbor
/// (from the right); the last category should hold the tail mass.
pub fn chi_square_gof(observed: &[usize], probs: &[f64]) -> Result<ChiSquare> {
    if observed.len() != probs.len() || observed.is_empty() {
        return domain("chi-square: observed and expected lengths differ");
    }
    let total: usize = observed.iter().sum();
    let total = total as f64;
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs).rev() {
        acc.0 += o as f64;
        acc.1 += p * total;
        if acc.1 >= 5.0 {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.1 > 0.0 || acc.0 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    if pooled.len() < 2 {
        return domain("chi-square: fewer than two categories after pooling");
    }
    let statistic: f64 = pooled.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive dof");
    Ok(ChiSquare {
        statistic,
        dof,
        p_value: 1.0 - dist.cdf(statistic),
    })
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var)
}

/// Adjusted Rand index between two clusterings given as label vectors.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let joint = histogram(a.iter().zip(b));
    let rows = histogram(a.iter());
    let cols = histogram(b.iter());
    let index: f64 = joint.values().map(|&c| choose2(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sum_a * sum_b / choose2(a.len());
    let max = 0.5 * (sum_a + sum_b);
    if (max - expected).abs() < 1e-300 {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn tvd_basics() {
        let a = histogram(["x", "x", "y", "y"]);
        let b = histogram(["x", "y", "y", "z"]);
        assert!((empirical_tvd(&a, &a)).abs() < 1e-15);
        assert!((empirical_tvd(&a, &b) - 0.25).abs() < 1e-15);
        assert!((empirical_tvd(&a, &b) - empirical_tvd(&b, &a)).abs() < 1e-15);
        let reference = vec![("x", 0.5), ("y", 0.5)];
        assert!((tvd_to_reference(&b, reference) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn self_comparison_noise_floor() {
        let mut rng = stream_rng(1, 0);
        let a = histogram((0..100_000).map(|_| rng.random_range(0..15u8)));
        let b = histogram((0..100_000).map(|_| rng.random_range(0..15u8)));
        assert!(empirical_tvd(&a, &b) <= 0.01);
    }

    #[test]
    fn ks_uniform_shrinks() {
        let mut rng = stream_rng(2, 0);
        let small: Vec<f64> = (0..400).map(|_| rng.random()).collect();
        let large: Vec<f64> = (0..40_000).map(|_| rng.random()).collect();
        let cdf = |x: f64| x.clamp(0.0, 1.0);
        let ds = ks_distance(&small, cdf).unwrap();
        let dl = ks_distance(&large, cdf).unwrap();
        assert!(ds < 1.63 / 20.0);
        assert!(dl < 1.63 / 200.0);
        assert!(ks_distance(&small[..50], cdf).is_err());
        // A wrong reference is detected.
        assert!(ks_distance(&large, |x: f64| x * x).unwrap() > 0.2);
    }

    #[test]
    fn beta_cdf_closed_form() {
        // Beta(1, b) has CDF 1 - (1 - x)^b.
        for &x in &[0.1, 0.5, 0.93] {
            assert!((beta_cdf(x, 1.0, 2.5) - (1.0 - (1.0 - x).powf(2.5))).abs() < 1e-12);
        }
    }

    #[test]
    fn chi_square_accepts_and_rejects() {
        let probs = [0.25; 4];
        let fair = chi_square_gof(&[250, 240, 260, 250], &probs).unwrap();
        assert_eq!(fair.dof, 3);
        assert!(fair.p_value > 0.5);
        let skewed = chi_square_gof(&[400, 200, 200, 200], &probs).unwrap();
        assert!(skewed.p_value < 1e-6);
    }

    #[test]
    fn ari_examples() {
        assert!((adjusted_rand_index(&[0, 0, 1, 1], &[5, 5, 3, 3]) - 1.0).abs() < 1e-15);
        assert!(adjusted_rand_index(&[0, 0, 1, 1], &[0, 1, 0, 1]) < 0.0);
    }
}
