//! Completely random measures: the gamma process and its normalization, the
//! Dirichlet process, and the beta process, with labeled draws from them.
//!
//! Labels are points of the base space, represented as `f64`. The default
//! base is the uniform distribution on the unit interval.

use std::collections::HashSet;

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::allocation::{induced_partition, FeatureAllocation, LabelSequence, Partition};
use crate::epf::IbpParams;
use crate::error::{domain, Error, Result};
use crate::sticks::{bernoulli_membership, categorical_draws, StickKind, StickWeights};
use crate::subord::{beta_round_simulation, ferguson_klass_jumps, JumpTruncation, LevySpec};

/// Default jump threshold for gamma-process truncation.
pub const DEFAULT_GAMMA_THRESHOLD: f64 = 1e-4;

/// Fresh draws allowed for one colliding label before the base is declared
/// to have atoms.
const MAX_RESAMPLES: usize = 64;

/// A continuous distribution on the label space.
pub trait BaseDistribution: Sync {
    fn name(&self) -> String;
    fn sample(&self, rng: &mut dyn RngCore) -> f64;
}

/// Uniform on `[0, 1)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformUnit;

impl BaseDistribution for UniformUnit {
    fn name(&self) -> String {
        "uniform(0,1)".into()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        rng.random()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub weight: f64,
    pub label: f64,
    /// Index (round) on which a beta-process atom is first selected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_index: Option<usize>,
}

/// A purely atomic random measure with finitely many atoms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
    normalized: bool,
    /// Atoms smaller than this were not simulated.
    truncation_threshold: f64,
    /// Expected mass of the atoms not simulated, on the measure's own scale.
    omitted_mass_mean: f64,
    /// Number of indices the atom set is exact for (beta process).
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds: Option<usize>,
    label_collisions: usize,
    base: String,
}

impl AtomicMeasure {
    /// A measure from explicit `(weight, label)` pairs with no truncation.
    pub fn new(atoms: Vec<(f64, f64)>, normalized: bool) -> Result<Self> {
        if atoms.iter().any(|&(w, l)| !(w > 0.0 && w.is_finite()) || !l.is_finite()) {
            return domain("atom weights must be positive and labels finite");
        }
        let mut seen = HashSet::new();
        if !atoms.iter().all(|&(_, l)| seen.insert(l.to_bits())) {
            return domain("atom labels must be distinct");
        }
        if normalized {
            let total: f64 = atoms.iter().map(|a| a.0).sum();
            if (total - 1.0).abs() > 1e-9 {
                return domain(format!("normalized measure has total mass {total}"));
            }
        }
        Ok(Self {
            atoms: atoms
                .into_iter()
                .map(|(weight, label)| Atom { weight, label, first_index: None })
                .collect(),
            normalized,
            truncation_threshold: 0.0,
            omitted_mass_mean: 0.0,
            rounds: None,
            label_collisions: 0,
            base: "explicit".into(),
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn weights(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.weight).collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.label).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Mass of the atoms with labels in `[lo, hi)`.
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.label >= lo && a.label < hi)
            .map(|a| a.weight)
            .sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn truncation_threshold(&self) -> f64 {
        self.truncation_threshold
    }

    pub fn omitted_mass_mean(&self) -> f64 {
        self.omitted_mass_mean
    }

    pub fn rounds(&self) -> Option<usize> {
        self.rounds
    }

    /// How many label draws had to be repeated because they hit an
    /// existing label.
    pub fn label_collisions(&self) -> usize {
        self.label_collisions
    }

    pub fn base(&self) -> &str {
        &self.base
    }
}

/// Draws `k` pairwise distinct labels, redrawing collisions.
fn distinct_labels<R: Rng>(base: &dyn BaseDistribution, k: usize, rng: &mut R) -> Result<(Vec<f64>, usize)> {
    let mut seen = HashSet::with_capacity(k);
    let mut labels = Vec::with_capacity(k);
    let mut collisions = 0;
    for _ in 0..k {
        let mut tries = 0;
        loop {
            let l = base.sample(rng);
            if seen.insert(l.to_bits()) {
                labels.push(l);
                break;
            }
            collisions += 1;
            tries += 1;
            if tries >= MAX_RESAMPLES {
                return Err(Error::Domain(format!(
                    "base distribution {} keeps repeating labels; it must be continuous",
                    base.name()
                )));
            }
        }
    }
    Ok((labels, collisions))
}

/// Gamma process with Lévy density `θ w^{-1} e^{-βw}`: Ferguson–Klass jumps
/// above `threshold` with i.i.d. labels from `base`.
pub fn gamma_process<R: Rng>(
    theta: f64,
    beta: f64,
    base: &dyn BaseDistribution,
    threshold: f64,
    rng: &mut R,
) -> Result<AtomicMeasure> {
    let spec = LevySpec::gamma(theta, beta)?;
    let jumps = ferguson_klass_jumps(&spec, JumpTruncation::Threshold(threshold), rng)?;
    let (labels, label_collisions) = distinct_labels(base, jumps.jumps().len(), rng)?;
    Ok(AtomicMeasure {
        atoms: jumps
            .jumps()
            .iter()
            .zip(labels)
            .map(|(&weight, label)| Atom { weight, label, first_index: None })
            .collect(),
        normalized: false,
        truncation_threshold: jumps.truncation_threshold(),
        omitted_mass_mean: jumps.omitted_mass_mean(),
        rounds: None,
        label_collisions,
        base: base.name(),
    })
}

/// Dirichlet process: the gamma process divided by its total mass.
pub fn dirichlet_process(gp: &AtomicMeasure) -> Result<AtomicMeasure> {
    if gp.normalized {
        return domain("measure is already normalized");
    }
    let total = gp.total_mass();
    if !(total > 0.0) {
        return domain("cannot normalize a measure with zero total mass");
    }
    let mut dp = gp.clone();
    for a in &mut dp.atoms {
        a.weight /= total;
    }
    dp.normalized = true;
    dp.truncation_threshold /= total;
    dp.omitted_mass_mean /= total;
    Ok(dp)
}

/// Dirichlet process from a truncated gamma process, redrawing the gamma
/// process in the rare event that no jump exceeds the threshold
/// (probability `exp(-θ E1(β threshold))`).
pub fn nonempty_dirichlet_process<R: Rng>(
    theta: f64,
    beta: f64,
    base: &dyn BaseDistribution,
    threshold: f64,
    rng: &mut R,
) -> Result<AtomicMeasure> {
    const MAX_REDRAWS: usize = 1000;
    for _ in 0..MAX_REDRAWS {
        let gp = gamma_process(theta, beta, base, threshold, rng)?;
        if !gp.atoms.is_empty() {
            return dirichlet_process(&gp);
        }
    }
    domain(format!(
        "no gamma-process jump above {threshold} in {MAX_REDRAWS} draws; lower the threshold"
    ))
}

/// Beta process with mass `gamma` and concentration `theta`, simulated round
/// by round: the atoms are exactly those that some index in `[n_rounds]`
/// selects, each tagged with the index that selects it first.
pub fn beta_process<R: Rng>(
    gamma: f64,
    theta: f64,
    base: &dyn BaseDistribution,
    n_rounds: usize,
    rng: &mut R,
) -> Result<AtomicMeasure> {
    let params = IbpParams::new(gamma, theta)?;
    let sim = beta_round_simulation(&params, n_rounds, rng)?;
    let count = sim.rounds.iter().map(Vec::len).sum();
    let (labels, label_collisions) = distinct_labels(base, count, rng)?;
    let atoms = sim
        .rounds
        .iter()
        .enumerate()
        .flat_map(|(m, r)| r.iter().map(move |&w| (m + 1, w)))
        .zip(labels)
        .map(|((m, weight), label)| Atom { weight, label, first_index: Some(m) })
        .collect();
    Ok(AtomicMeasure {
        atoms,
        normalized: false,
        truncation_threshold: 0.0,
        omitted_mass_mean: sim.residual.selection_mass(),
        rounds: Some(n_rounds),
        label_collisions,
        base: base.name(),
    })
}

/// `n` i.i.d. labels from a normalized measure and their induced partition.
pub fn dp_draw_labels<R: Rng>(dp: &AtomicMeasure, n: usize, rng: &mut R) -> Result<(LabelSequence<f64>, Partition)> {
    if !dp.normalized {
        return domain("labels can only be drawn from a normalized measure");
    }
    if dp.atoms.is_empty() {
        return domain("measure has no atoms");
    }
    let idx = categorical_draws(&dp.weights(), n, rng);
    let labels = idx.iter().map(|&k| dp.atoms[k].label).collect();
    Ok((LabelSequence::Cluster(labels), induced_partition(&idx)))
}

/// Bernoulli-process draws for indices `1..=n`: each index includes each atom
/// independently with probability equal to its weight, and the induced
/// feature allocation.
///
/// For a round-simulated beta process an atom's first selecting index is
/// already known, so that index includes it, earlier ones do not, and later
/// ones are Bernoulli; `n` may not exceed the simulated rounds.
pub fn bernoulli_process_draw<R: Rng>(
    bp: &AtomicMeasure,
    n: usize,
    rng: &mut R,
) -> Result<(LabelSequence<f64>, FeatureAllocation)> {
    if let Some(a) = bp.atoms.iter().find(|a| a.weight > 1.0) {
        return domain(format!("atom weight {} exceeds 1", a.weight));
    }
    let first: Option<Vec<usize>> = bp.atoms.iter().map(|a| a.first_index).collect();
    let truncation = bp.rounds.unwrap_or(bp.atoms.len());
    let sticks = StickWeights::from_parts(
        bp.weights(),
        StickKind::Feature,
        truncation,
        bp.omitted_mass_mean,
        first,
    );
    let columns = bernoulli_membership(&sticks, n, rng)?;
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (k, col) in columns.iter().enumerate() {
        for &i in col {
            rows[i - 1].push(bp.atoms[k].label);
        }
    }
    let allocation = FeatureAllocation::from_membership(n, columns.len(), |i, k| {
        columns[k].binary_search(&(i + 1)).is_ok()
    });
    Ok((LabelSequence::Feature(rows), allocation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epf::{crp_sample, eppf_crp, ibp_sample, CrpParams};
    use crate::harness::stats::{chi_square_gof, empirical_tvd, histogram};
    use crate::harness::{enumerate_partitions, tvd_equivalence, tvd_reference_check};
    use crate::rng::{stream_rng, StreamRng};

    #[test]
    fn gamma_process_mass_and_labels() {
        let mut rng = stream_rng(11, 0);
        let reps = 20_000;
        let mut total = 0.0;
        for _ in 0..reps {
            let gp = gamma_process(2.0, 4.0, &UniformUnit, 1e-4, &mut rng).unwrap();
            assert!(gp.atoms().iter().all(|a| a.weight > 1e-4));
            let mut labels = gp.labels();
            labels.sort_by(f64::total_cmp);
            assert!(labels.windows(2).all(|w| w[0] < w[1]));
            total += gp.total_mass() + gp.omitted_mass_mean();
        }
        let mean = total / reps as f64;
        // sd of the total is √θ / β.
        let se = 2f64.sqrt() / 4.0 / (reps as f64).sqrt();
        assert!((mean - 0.5).abs() < 4.0 * se, "{mean}");
    }

    #[test]
    fn dirichlet_process_normalizes() {
        let single = AtomicMeasure::new(vec![(3.0, 0.2)], false).unwrap();
        let dp = dirichlet_process(&single).unwrap();
        assert_eq!(dp.weights(), vec![1.0]);
        assert!(dirichlet_process(&dp).is_err());
        let empty = AtomicMeasure::new(vec![], false).unwrap();
        assert!(dirichlet_process(&empty).is_err());
        let mut rng = stream_rng(12, 0);
        let gp = gamma_process(1.0, 1.0, &UniformUnit, 1e-4, &mut rng).unwrap();
        let dp = dirichlet_process(&gp).unwrap();
        assert!((dp.total_mass() - 1.0).abs() < 1e-12);
        assert!(dp.is_normalized());
    }

    fn dp_partition(theta: f64, beta: f64) -> impl Fn(&mut StreamRng) -> Partition + Sync {
        move |rng| {
            let dp = nonempty_dirichlet_process(theta, beta, &UniformUnit, DEFAULT_GAMMA_THRESHOLD, rng).unwrap();
            dp_draw_labels(&dp, 4, rng).unwrap().1
        }
    }

    #[test]
    fn dirichlet_process_partitions_are_crp() {
        let crp = CrpParams::new(1.0).unwrap();
        let reference: Vec<(Partition, f64)> = enumerate_partitions(4)
            .unwrap()
            .into_iter()
            .map(|p| {
                let q = eppf_crp(&crp, &p.block_sizes()).unwrap().prob();
                (p, q)
            })
            .collect();
        let report = tvd_reference_check("dp", dp_partition(1.0, 1.0), "crp", reference, 100_000, 13, 0.03);
        assert!(report.passed, "{report:?}");
        let versus = tvd_equivalence(
            "crp",
            |rng: &mut StreamRng| crp_sample(&crp, 4, rng),
            "dp",
            dp_partition(1.0, 1.0),
            100_000,
            14,
            0.03,
        );
        assert!(versus.passed, "{versus:?}");
    }

    #[test]
    fn dirichlet_process_law_ignores_beta() {
        let report = tvd_equivalence("dp β=1", dp_partition(1.0, 1.0), "dp β=7", dp_partition(1.0, 7.0), 100_000, 15, 0.02);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn gamma_process_is_completely_random() {
        let mut rng = stream_rng(16, 0);
        let (a, b): (Vec<f64>, Vec<f64>) = (0..10_000)
            .map(|_| {
                let gp = gamma_process(1.0, 1.0, &UniformUnit, 1e-4, &mut rng).unwrap();
                (gp.mass_in(0.0, 0.4), gp.mass_in(0.5, 1.0))
            })
            .unzip();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() <= 0.03, "{corr}");
        // The normalized measure is not: its masses sum to one.
        let mut rng = stream_rng(16, 1);
        let (a, b): (Vec<f64>, Vec<f64>) = (0..10_000)
            .map(|_| {
                let dp = nonempty_dirichlet_process(1.0, 1.0, &UniformUnit, 1e-4, &mut rng).unwrap();
                (dp.mass_in(0.0, 0.5), dp.mass_in(0.5, 1.0))
            })
            .unzip();
        let (ma, mb) = (mean(&a), mean(&b));
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        assert!(cov < 0.0);
    }

    #[test]
    fn beta_process_atoms() {
        let mut rng = stream_rng(17, 0);
        let reps = 20_000;
        let mut counts = vec![0usize; 12];
        for _ in 0..reps {
            let bp = beta_process(2.0, 1.5, &UniformUnit, 4, &mut rng).unwrap();
            assert!(bp.atoms().iter().all(|a| a.weight > 0.0 && a.weight < 1.0));
            let mut labels = bp.labels();
            labels.sort_by(f64::total_cmp);
            assert!(labels.windows(2).all(|w| w[0] < w[1]));
            let first = bp.atoms().iter().filter(|a| a.first_index == Some(1)).count();
            counts[first.min(11)] += 1;
        }
        let pois = statrs::distribution::Poisson::new(2.0).unwrap();
        let mut probs: Vec<f64> = (0..11)
            .map(|k| statrs::distribution::Discrete::pmf(&pois, k as u64))
            .collect();
        probs.push(1.0 - probs.iter().sum::<f64>());
        let chi = chi_square_gof(&counts, &probs).unwrap();
        assert!(chi.p_value > 0.01, "{chi:?}");
    }

    #[test]
    fn label_collisions_are_resampled() {
        struct Coarse;
        impl BaseDistribution for Coarse {
            fn name(&self) -> String {
                "coarse".into()
            }
            fn sample(&self, rng: &mut dyn RngCore) -> f64 {
                (rng.random::<f64>() * 40.0).floor()
            }
        }
        struct Point;
        impl BaseDistribution for Point {
            fn name(&self) -> String {
                "point".into()
            }
            fn sample(&self, _: &mut dyn RngCore) -> f64 {
                0.5
            }
        }
        let mut rng = stream_rng(18, 0);
        let gp = gamma_process(2.0, 1.0, &Coarse, 1e-4, &mut rng).unwrap();
        assert!(gp.atoms().len() > 5);
        assert!(gp.label_collisions() > 0);
        let mut labels = gp.labels();
        labels.sort_by(f64::total_cmp);
        assert!(labels.windows(2).all(|w| w[0] < w[1]));
        assert!(gamma_process(5.0, 1.0, &Point, 1e-4, &mut rng).is_err());
    }

    #[test]
    fn dp_draw_examples() {
        let mut rng = stream_rng(19, 0);
        let one = AtomicMeasure::new(vec![(1.0, 0.7)], true).unwrap();
        let (labels, part) = dp_draw_labels(&one, 5, &mut rng).unwrap();
        assert_eq!(labels, LabelSequence::Cluster(vec![0.7; 5]));
        assert_eq!(part.num_blocks(), 1);
        let gp = gamma_process(1.0, 1.0, &UniformUnit, 1e-4, &mut rng).unwrap();
        assert!(dp_draw_labels(&gp, 3, &mut rng).is_err());
        let dp = dirichlet_process(&gp).unwrap();
        let (labels, part) = dp_draw_labels(&dp, 1, &mut rng).unwrap();
        assert_eq!(labels.len(), 1);
        assert_eq!(part.to_string(), "[[1]]");
        assert!(AtomicMeasure::new(vec![(0.5, 0.1), (0.5, 0.1)], true).is_err());
        assert!(AtomicMeasure::new(vec![(0.5, 0.1)], true).is_err());
    }

    #[test]
    fn dp_label_sequences_are_exchangeable() {
        let dp = AtomicMeasure::new(vec![(0.5, 0.1), (0.3, 0.2), (0.2, 0.3)], true).unwrap();
        let key = |l: &LabelSequence<f64>| match l {
            LabelSequence::Cluster(v) => v.iter().map(|x| (x * 10.0).round() as u8).collect::<Vec<_>>(),
            LabelSequence::Feature(_) => unreachable!(),
        };
        let mut rng = stream_rng(20, 0);
        let mut forward = Vec::new();
        let mut rotated = Vec::new();
        for _ in 0..100_000 {
            let (l, _) = dp_draw_labels(&dp, 3, &mut rng).unwrap();
            let k = key(&l);
            rotated.push(vec![k[2], k[0], k[1]]);
            forward.push(k);
        }
        let d = empirical_tvd(&histogram(forward), &histogram(rotated));
        assert!(d <= 0.015, "{d}");
    }

    #[test]
    fn bernoulli_examples() {
        let mut rng = stream_rng(21, 0);
        let ones = AtomicMeasure::new(vec![(1.0, 0.1), (1.0, 0.2)], false).unwrap();
        let (labels, fa) = bernoulli_process_draw(&ones, 3, &mut rng).unwrap();
        assert_eq!(fa.to_string(), "[[1,2,3],[1,2,3]]");
        assert_eq!(labels, LabelSequence::Feature(vec![vec![0.1, 0.2]; 3]));
        let heavy = AtomicMeasure::new(vec![(1.5, 0.1)], false).unwrap();
        assert!(bernoulli_process_draw(&heavy, 3, &mut rng).is_err());
        let bp = beta_process(1.0, 1.0, &UniformUnit, 3, &mut rng).unwrap();
        assert!(bernoulli_process_draw(&bp, 4, &mut rng).is_err());

        let fixed = AtomicMeasure::new(vec![(0.6, 0.1), (0.25, 0.2), (0.1, 0.3)], false).unwrap();
        let reps = 50_000;
        let mut members = 0usize;
        for _ in 0..reps {
            let (_, fa) = bernoulli_process_draw(&fixed, 2, &mut rng).unwrap();
            members += fa.blocks().filter(|b| b.contains(&1)).count();
        }
        let mean = members as f64 / reps as f64;
        assert!((mean - 0.95).abs() < 4.0 * (0.6f64 * 0.4 + 0.25 * 0.75 + 0.1 * 0.9).sqrt() / (reps as f64).sqrt());
    }

    #[test]
    fn bernoulli_process_matches_ibp() {
        let params = IbpParams::new(1.0, 1.0).unwrap();
        let report = tvd_equivalence(
            "ibp",
            |rng: &mut StreamRng| {
                let mut s = ibp_sample(&params, 3, rng).block_sizes();
                s.sort_unstable();
                s
            },
            "bernoulli(beta process)",
            |rng: &mut StreamRng| {
                let bp = beta_process(1.0, 1.0, &UniformUnit, 3, rng).unwrap();
                let mut s = bernoulli_process_draw(&bp, 3, rng).unwrap().1.block_sizes();
                s.sort_unstable();
                s
            },
            100_000,
            22,
            0.02,
        );
        assert!(report.passed, "{report:?}");
    }
}
