//! Named checks shared by the `check`/`equiv` subcommands and the acceptance
//! suite. Each returns one or more [`Outcome`]s; nothing here panics on a
//! failed tolerance.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use serde_json::{json, Value};

use csp_core::crm::{dp_draw_labels, nonempty_dirichlet_process, UniformUnit};
use csp_core::epf::{
    crp_predict, crp_sample, eppf_crp, eppf_validity_check, ibp_sample, inconsistent_eppf_example, CrpParams,
    IbpParams, ViolationKind,
};
use csp_core::harness::stats::{adjusted_rand_index, beta_cdf, chi_square_gof};
use csp_core::harness::{enumerate_partitions, ks_check, replicate, tvd_equivalence, EquivalenceReport};
use csp_core::infer::consistency::{crp_joint_consistency, ibp_joint_consistency};
use csp_core::infer::{
    co_clustering, crp_conditional, crp_gibbs_sweep, ibp_gibbs_sweep, least_squares_clustering, membership_conditional,
    multistart, FeatureModel, FeatureState, LinearGaussian, MixtureState, NormalInverseGamma, SweepOptions,
};
use csp_core::numeric::log_sum_exp;
use csp_core::rng::{stream_rng, StreamRng};
use csp_core::sticks::{
    bernoulli_featurize, gem_sticks_to_tolerance, ibp_sticks, ibp_sticks_by_round, paintbox_partition,
    DEFAULT_TAIL_TOLERANCE,
};
use csp_core::subord::{
    eppf_from_laplace, ferguson_klass_jumps, normalized_jumps_by_appearance, JumpTruncation, LevySpec,
};
use csp_core::Result;

/// Which side of the tolerance a passing statistic lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    AtLeast,
    Above,
}

impl Bound {
    pub fn holds(self, statistic: f64, tolerance: f64) -> bool {
        match self {
            Bound::AtMost => statistic <= tolerance,
            Bound::AtLeast => statistic >= tolerance,
            Bound::Above => statistic > tolerance,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
            Bound::Above => ">",
        }
    }
}

/// Result of one check: a headline statistic against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub check: String,
    pub passed: bool,
    pub statistic: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub detail: Value,
}

impl Outcome {
    pub fn new(check: impl Into<String>, statistic: f64, bound: Bound, tolerance: f64, detail: Value) -> Self {
        Self {
            check: check.into(),
            passed: bound.holds(statistic, tolerance),
            statistic,
            bound,
            tolerance,
            detail,
        }
    }

    pub fn at_most(check: impl Into<String>, statistic: f64, tolerance: f64, detail: Value) -> Self {
        Self::new(check, statistic, Bound::AtMost, tolerance, detail)
    }
}

impl From<EquivalenceReport> for Outcome {
    fn from(r: EquivalenceReport) -> Self {
        Self {
            check: format!("{} vs {}", r.sampler_a, r.sampler_b),
            passed: r.passed,
            statistic: r.distance,
            bound: Bound::AtMost,
            tolerance: r.tolerance,
            detail: serde_json::to_value(&r).expect("report serializes"),
        }
    }
}

fn crp(theta: f64) -> Result<CrpParams> {
    CrpParams::new(theta)
}

/// Largest `|Σ_π p(π) - 1|` over all partitions of `[n]`.
pub fn eppf_normalization(thetas: &[f64], ns: &[usize], tol: f64) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut cases = Vec::new();
    for &theta in thetas {
        let params = crp(theta)?;
        for &n in ns {
            let logs = enumerate_partitions(n)?
                .iter()
                .map(|p| eppf_crp(&params, &p.block_sizes()).map(|v| v.log_prob))
                .collect::<Result<Vec<_>>>()?;
            let err = log_sum_exp(&logs).exp_m1().abs();
            worst = worst.max(err);
            cases.push(json!({"theta": theta, "n": n, "error": err}));
        }
    }
    Ok(Outcome::at_most("eppf normalization", worst, tol, json!({ "cases": cases })))
}

/// The CRP EPPF passes the consistency check up to `n_max`, and the
/// inconsistent example fails it on additivity.
pub fn eppf_additivity(thetas: &[f64], n_max: usize, tol: f64) -> Result<Vec<Outcome>> {
    let mut out = Vec::new();
    for &theta in thetas {
        let params = crp(theta)?;
        let candidate = |s: &[usize]| eppf_crp(&params, s).map(|v| v.prob()).unwrap_or(f64::NAN);
        let report = eppf_validity_check(&candidate, n_max, tol)?;
        out.push(Outcome {
            check: format!("crp eppf additivity, theta {theta}"),
            passed: report.passed(),
            statistic: report.max_additivity_error,
            bound: Bound::AtMost,
            tolerance: tol,
            detail: serde_json::to_value(&report).expect("report serializes"),
        });
    }
    let report = eppf_validity_check(&inconsistent_eppf_example, n_max, tol)?;
    let caught = report
        .first_violation
        .as_ref()
        .is_some_and(|v| v.kind == ViolationKind::Additivity);
    out.push(Outcome {
        check: "inconsistent example is rejected".into(),
        passed: caught,
        statistic: report.max_additivity_error,
        bound: Bound::Above,
        tolerance: tol,
        detail: serde_json::to_value(&report).expect("report serializes"),
    });
    Ok(out)
}

/// Product of prediction-rule factors along index order against the EPPF,
/// for every partition of `[n]`.
pub fn prediction_round_trip(thetas: &[f64], n: usize, tol: f64) -> Result<Outcome> {
    let mut worst = 0.0f64;
    for &theta in thetas {
        let params = crp(theta)?;
        for p in enumerate_partitions(n)? {
            let ids = p.assignments();
            let mut counts: Vec<usize> = Vec::new();
            let mut prod = 1.0;
            for &b in &ids {
                prod *= crp_predict(&params, &counts)[b];
                if b == counts.len() {
                    counts.push(0);
                }
                counts[b] += 1;
            }
            let exact = eppf_crp(&params, &p.block_sizes())?.prob();
            worst = worst.max((prod - exact).abs());
        }
    }
    Ok(Outcome::at_most(
        "prediction rule product vs eppf",
        worst,
        tol,
        json!({"thetas": thetas, "n": n}),
    ))
}

/// Distinct block-size multisets of partitions of `[n]`.
fn size_profiles(n: usize) -> Result<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<usize>> = enumerate_partitions(n)?
        .iter()
        .map(|p| {
            let mut s = p.block_sizes();
            s.sort_unstable_by(|a, b| b.cmp(a));
            s
        })
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// EPPF by quadrature of the gamma-process Laplace exponent against the
/// closed form, and its spread across `betas`. Partitions of `[n]` with the
/// same block sizes share a value, so each size profile is computed once.
pub fn quadrature_vs_closed_form(thetas: &[f64], betas: &[f64], n: usize, tol: f64) -> Result<Vec<Outcome>> {
    let mut worst_closed = 0.0f64;
    let mut worst_spread = 0.0f64;
    let mut worst_reported = 0.0f64;
    for &theta in thetas {
        let params = crp(theta)?;
        for sizes in size_profiles(n)? {
            let exact = eppf_crp(&params, &sizes)?.log_prob;
            let mut values = Vec::new();
            for &beta in betas {
                let q = eppf_from_laplace(&LevySpec::gamma(theta, beta)?, &sizes, 1e-10)?;
                worst_closed = worst_closed.max((q.value.log_prob - exact).abs());
                worst_reported = worst_reported.max(q.log_error);
                values.push(q.value.log_prob);
            }
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            worst_spread = worst_spread.max(hi - lo);
        }
    }
    let detail = json!({"thetas": thetas, "betas": betas, "n": n, "max_reported_log_error": worst_reported});
    Ok(vec![
        Outcome::at_most("gamma quadrature eppf vs closed form (log)", worst_closed, tol, detail.clone()),
        Outcome::at_most("gamma quadrature eppf spread over beta (log)", worst_spread, tol, detail),
    ])
}

/// Sticks broken until the leftover mass is negligible next to sampling
/// noise; paintbox refuses anything coarser than the default tolerance.
const STICK_TAIL: f64 = 1e-9;

/// CRP against the paintbox of GEM sticks, TVD over partitions of `[n]`.
pub fn crp_vs_gem(theta: f64, n: usize, reps: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let params = crp(theta)?;
    let report = tvd_equivalence(
        "crp_sample",
        |r: &mut StreamRng| crp_sample(&params, n, r),
        "paintbox(gem_sticks)",
        |r: &mut StreamRng| {
            let sticks = gem_sticks_to_tolerance(&params, STICK_TAIL, r).expect("valid target");
            paintbox_partition(&sticks, n, DEFAULT_TAIL_TOLERANCE, r).expect("tail within tolerance")
        },
        reps,
        seed,
        tol,
    );
    Ok(report.into())
}

/// CRP against labels drawn from a normalized truncated gamma process.
pub fn crp_vs_gamma_crm(theta: f64, n: usize, threshold: f64, reps: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let params = crp(theta)?;
    // The samplers below cannot return errors, so check the inputs first.
    LevySpec::gamma(theta, 1.0)?;
    if !(threshold > 0.0) {
        return Err(csp_core::Error::Domain(format!("threshold must be positive, got {threshold}")));
    }
    let report = tvd_equivalence(
        "crp_sample",
        |r: &mut StreamRng| crp_sample(&params, n, r),
        "dp_draw_labels(dirichlet_process(gamma_process))",
        |r: &mut StreamRng| {
            let dp = nonempty_dirichlet_process(theta, 1.0, &UniformUnit, threshold, r).expect("valid process");
            dp_draw_labels(&dp, n, r).expect("normalized measure").1
        },
        reps,
        seed,
        tol,
    );
    let mut out: Outcome = report.into();
    out.detail["truncation_threshold"] = json!(threshold);
    Ok(out)
}

/// First appearance-ordered normalized gamma jump against Beta(1, θ).
pub fn gamma_first_stick_ks(theta: f64, threshold: f64, reps: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let spec = LevySpec::gamma(theta, 1.0)?;
    let draws = replicate(seed, 0, reps, |r| loop {
        let jumps = ferguson_klass_jumps(&spec, JumpTruncation::Threshold(threshold), r).expect("valid spec");
        if jumps.jumps().is_empty() {
            continue;
        }
        let (sticks, _) = normalized_jumps_by_appearance(&jumps, 1, r).expect("zero drift");
        break sticks.weights()[0];
    });
    let report = ks_check(
        "first normalized gamma jump by appearance",
        &draws,
        &format!("Beta(1, {theta})"),
        |x| beta_cdf(x, 1.0, theta),
        tol,
    )?;
    Ok(report.into())
}

fn sorted_sizes(sizes: Vec<usize>) -> Vec<usize> {
    let mut s = sizes;
    s.sort_unstable_by(|a, b| b.cmp(a));
    s
}

/// IBP against Bernoulli featurization of IBP sticks, TVD over block-size
/// histograms of allocations of `[n]`.
pub fn ibp_vs_sticks(gamma: f64, theta: f64, n: usize, reps: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let params = IbpParams::new(gamma, theta)?;
    let report = tvd_equivalence(
        "ibp_sample",
        |r: &mut StreamRng| sorted_sizes(ibp_sample(&params, n, r).block_sizes()),
        "bernoulli_featurize(ibp_sticks)",
        |r: &mut StreamRng| {
            let sticks = ibp_sticks(&params, n, r).expect("at least one round");
            sorted_sizes(bernoulli_featurize(&sticks, n, r).expect("feature sticks").block_sizes())
        },
        reps,
        seed,
        tol,
    );
    Ok(report.into())
}

/// Sticks first appearing on round `m` against Beta(1, θ + m - 1), pooled
/// over `reps` independent stick draws.
pub fn ibp_round_stick_ks(gamma: f64, theta: f64, m: usize, reps: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let params = IbpParams::new(gamma, theta)?;
    if m == 0 {
        return Err(csp_core::Error::Domain("rounds start at 1".into()));
    }
    let draws: Vec<f64> = replicate(seed, 0, reps, |r| ibp_sticks_by_round(&params, m, r).pop().unwrap_or_default())
        .into_iter()
        .flatten()
        .collect();
    let b = theta + m as f64 - 1.0;
    let mut out: Outcome = ks_check(
        &format!("round-{m} ibp sticks"),
        &draws,
        &format!("Beta(1, {b})"),
        |x| beta_cdf(x, 1.0, b),
        tol,
    )?
    .into();
    out.detail["stick_draws"] = json!(reps);
    Ok(out)
}

/// Mean number of features of an IBP on `[n]` against `γ Σ_m θ / (θ + m - 1)`,
/// as a relative error.
pub fn ibp_feature_count(gamma: f64, theta: f64, n: usize, reps: usize, seed: u64, rel_tol: f64) -> Result<Outcome> {
    let params = IbpParams::new(gamma, theta)?;
    let counts = replicate(seed, 0, reps, |r| ibp_sample(&params, n, r).num_blocks() as f64);
    let mean = counts.iter().sum::<f64>() / reps as f64;
    let expected: f64 = gamma * (1..=n).map(|m| theta / (theta + m as f64 - 1.0)).sum::<f64>();
    let rel = (mean - expected).abs() / expected;
    Ok(Outcome::at_most(
        format!("ibp mean feature count, gamma {gamma} theta {theta} n {n}"),
        rel,
        rel_tol,
        json!({"mean": mean, "expected": expected, "reps": reps}),
    ))
}

/// Frequency of the two-index allocation with a single shared feature
/// (γ = θ = 1) against `e^{-1} · 1/2 · e^{-1/2}`, in standard errors.
pub fn efpf_spot_value(reps: usize, seed: u64, max_se: f64) -> Result<Outcome> {
    let params = IbpParams::new(1.0, 1.0)?;
    let hits = replicate(seed, 0, reps, |r| {
        let f = ibp_sample(&params, 2, r);
        f.num_blocks() == 1 && f.block_sizes() == [2]
    })
    .into_iter()
    .filter(|&h| h)
    .count();
    let p = 0.5 * (-1.5f64).exp();
    let freq = hits as f64 / reps as f64;
    let se = (p * (1.0 - p) / reps as f64).sqrt();
    Ok(Outcome::at_most(
        "single shared feature on two indices (standard errors)",
        (freq - p).abs() / se,
        max_se,
        json!({"frequency": freq, "probability": p, "reps": reps}),
    ))
}

/// Number of features of the first index against Poisson(γ), by a
/// chi-square test; the statistic is the p-value.
pub fn first_index_poisson(gamma: f64, theta: f64, reps: usize, seed: u64, min_p: f64) -> Result<Outcome> {
    let params = IbpParams::new(gamma, theta)?;
    let counts = replicate(seed, 0, reps, |r| ibp_sample(&params, 1, r).num_blocks());
    let top = counts.iter().copied().max().unwrap_or(0).max(1) + 1;
    let mut observed = vec![0usize; top + 1];
    for c in counts {
        observed[c] += 1;
    }
    // Poisson pmf by recursion; the last category holds the tail.
    let mut probs = Vec::with_capacity(top + 1);
    let mut pmf = (-gamma).exp();
    for k in 0..top {
        probs.push(pmf);
        pmf *= gamma / (k + 1) as f64;
    }
    probs.push(1.0 - probs.iter().sum::<f64>());
    let chi = chi_square_gof(&observed, &probs)?;
    Ok(Outcome::new(
        format!("first-index feature count vs Poisson({gamma}), p-value"),
        chi.p_value,
        Bound::Above,
        min_p,
        serde_json::to_value(chi).expect("serializes"),
    ))
}

/// Occupancy fraction of the first table after `horizon` customers against
/// Beta(1, θ).
pub fn polya_urn_limit(theta: f64, horizon: usize, runs: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let params = crp(theta)?;
    let fractions = replicate(seed, 0, runs, |r| {
        let p = crp_sample(&params, horizon, r);
        p.blocks()[0].len() as f64 / horizon as f64
    });
    let mut out: Outcome = ks_check(
        &format!("first-table fraction at {horizon}"),
        &fractions,
        &format!("Beta(1, {theta})"),
        |x| beta_cdf(x, 1.0, theta),
        tol,
    )?
    .into();
    out.detail["horizon"] = json!(horizon);
    Ok(out)
}

/// Gibbs conditionals against normalizing the joint over the candidates:
/// the collapsed CRP conditional for every starting partition of `[n]` and
/// every index, and the IBP membership conditional for every 3-feature
/// matrix on `n` rows (no empty column) and every entry held by another row.
pub fn gibbs_conditional_brute_force(n: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let params = crp(0.7)?;
    let model = NormalInverseGamma::new(0.3, 0.5, 2.5, 1.5)?;
    let mut rng = stream_rng(seed, 0);
    let normal = Normal::new(0.0, 2.0).expect("valid normal");
    let data: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let mut worst_crp = 0.0f64;
    for start in enumerate_partitions(n)? {
        let state = MixtureState::new(params, &model, &data, &start.assignments())?;
        for i in 0..n {
            let cond = crp_conditional(&state, &data, &model, i)?;
            let joints = cond
                .iter()
                .map(|(p, _)| MixtureState::new(params, &model, &data, &p.assignments())?.log_joint(&model))
                .collect::<Result<Vec<_>>>()?;
            let norm = log_sum_exp(&joints);
            for ((_, lc), lj) in cond.iter().zip(&joints) {
                worst_crp = worst_crp.max((lc.exp() - (lj - norm).exp()).abs());
            }
        }
    }

    const K: usize = 3;
    let ibp_params = IbpParams::new(1.3, 0.7)?;
    let lg = LinearGaussian::new(0.8, 1.5)?;
    let features: Vec<Vec<f64>> = (0..K).map(|_| lg.sample_feature(2, &mut rng)).collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| lg.sample_feature(2, &mut rng)).collect();
    let mut worst_ibp = 0.0f64;
    let mut entries = 0usize;
    for bits in 0u64..1 << (n * K) {
        let z: Vec<Vec<bool>> = (0..n).map(|i| (0..K).map(|k| bits >> (K * i + k) & 1 == 1).collect()).collect();
        if (0..K).any(|k| z.iter().all(|r| !r[k])) {
            continue;
        }
        let state = FeatureState::new(ibp_params, 2, z.clone(), features.clone())?;
        for i in 0..n {
            for k in 0..K {
                let Some(p) = membership_conditional(&state, &rows, &lg, i, k)? else {
                    continue;
                };
                let joint = |on: bool| {
                    let mut z = z.clone();
                    z[i][k] = on;
                    FeatureState::new(ibp_params, 2, z, features.clone())?.log_joint(&rows, &lg)
                };
                let want = 1.0 / (1.0 + (joint(false)? - joint(true)?).exp());
                worst_ibp = worst_ibp.max((p - want).abs());
                entries += 1;
            }
        }
    }
    Ok(Outcome::at_most(
        format!("gibbs conditionals vs brute force, n {n}"),
        worst_crp.max(worst_ibp),
        tol,
        json!({"crp_max_error": worst_crp, "ibp_max_error": worst_ibp, "ibp_entries": entries, "data": data}),
    ))
}

/// Joint-distribution checks: exact CRP and IBP samplers within `max_z`,
/// and a CRP sampler with a wrong new-block weight beyond `fault_z`.
pub fn joint_consistency(reps: usize, steps: usize, seed: u64, max_z: f64, fault_z: f64) -> Result<Vec<Outcome>> {
    let crp_params = crp(1.0)?;
    let nig = NormalInverseGamma::new(0.0, 1.0, 3.0, 2.0)?;
    let good = crp_joint_consistency(&crp_params, &nig, 5, reps, steps, seed, &SweepOptions::default())?;
    let broken = SweepOptions { new_block_scale: 3.0 };
    let bad = crp_joint_consistency(&crp_params, &nig, 5, reps, steps, seed + 1, &broken)?;
    let ibp_params = IbpParams::new(1.0, 1.0)?;
    let lg = LinearGaussian::new(1.0, 1.0)?;
    let ibp = ibp_joint_consistency(&ibp_params, &lg, 4, 2, reps, steps, seed + 2)?;
    let fault = bad.statistics[0].z.abs();
    Ok(vec![
        Outcome::at_most("crp joint consistency |z|", good.max_abs_z(), max_z, serde_json::to_value(&good).unwrap()),
        Outcome::at_most("ibp joint consistency |z|", ibp.max_abs_z(), max_z, serde_json::to_value(&ibp).unwrap()),
        Outcome::new(
            "faulty crp sampler is caught (|z| on blocks)",
            fault,
            Bound::Above,
            fault_z,
            serde_json::to_value(&bad).unwrap(),
        ),
    ])
}

/// Two unit-variance clusters ten apart, alternating.
pub fn two_cluster_data(n: usize, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = stream_rng(seed, 0);
    let noise = Normal::new(0.0, 1.0).expect("valid normal");
    let truth: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let data = truth.iter().map(|&c| 10.0 * c as f64 + noise.sample(&mut rng)).collect();
    (data, truth)
}

/// CRP mixture on two separated clusters: ARI of the least-squares
/// clustering (posterior co-clustering summary) over the second half of
/// `sweeps`, for each seed. The statistic is the worst ARI.
pub fn crp_planted_recovery(seeds: &[u64], sweeps: usize, min_ari: f64) -> Result<Outcome> {
    let params = crp(1.0)?;
    let model = NormalInverseGamma::new(5.0, 0.01, 2.0, 2.0)?;
    let mut aris = Vec::new();
    let mut errors = Vec::new();
    for &seed in seeds {
        let (data, truth) = two_cluster_data(50, seed);
        let mut state = MixtureState::single_block(params, &model, &data)?;
        let mut rng = stream_rng(seed, 1);
        let mut samples = Vec::new();
        for sweep in 0..sweeps {
            crp_gibbs_sweep(&mut state, &data, &model, &mut rng)?;
            if sweep >= sweeps / 2 {
                samples.push(state.assignments().to_vec());
            }
        }
        let co = co_clustering(&samples);
        let n = data.len();
        let err: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (co[i][j] - f64::from(u8::from(truth[i] == truth[j]))).abs())
            .sum::<f64>()
            / (n * n) as f64;
        errors.push(err);
        let point = least_squares_clustering(&samples).unwrap_or_default();
        aris.push(adjusted_rand_index(&point, &truth));
    }
    let worst = aris.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Outcome::new(
        "crp planted clusters, worst ARI",
        worst,
        Bound::AtLeast,
        min_ari,
        json!({"seeds": seeds, "ari": aris, "mean_coclustering_error": errors, "sweeps": sweeps}),
    ))
}

/// Rows `z_1 a + z_2 b + noise` with disjoint `a = (3,3,3,0,0,0)` and
/// `b = (0,0,0,3,3,3)`, memberships Bernoulli(1/2). Returns the rows and
/// each row's number of features.
pub fn two_feature_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = stream_rng(seed, 0);
    let a = [[3.0, 3.0, 3.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 3.0, 3.0, 3.0]];
    let noise = Normal::new(0.0, 0.5).expect("valid normal");
    let mut data = Vec::with_capacity(n);
    let mut sums = Vec::with_capacity(n);
    for _ in 0..n {
        let z = [rng.random::<bool>(), rng.random::<bool>()];
        let row = (0..6)
            .map(|d| (0..2).filter(|&k| z[k]).map(|k| a[k][d]).sum::<f64>() + noise.sample(&mut rng))
            .collect();
        data.push(row);
        sums.push(z.iter().filter(|&&b| b).count());
    }
    (data, sums)
}

/// IBP linear-Gaussian model on two planted features, one run per seed:
/// 8 starts of 40 sweeps, then `sweeps` sweeps with K and memberships read
/// from the second half. Returns the share of runs whose posterior mode of
/// K is 2 and the worst relative error of the total membership count among
/// those runs.
pub fn ibp_planted_recovery(seeds: &[u64], sweeps: usize, min_share: f64, rel_tol: f64) -> Result<Vec<Outcome>> {
    let params = IbpParams::new(1.0, 1.0)?;
    let model = LinearGaussian::new(0.5, 3.0)?;
    let mut modes = Vec::new();
    let mut rels = Vec::new();
    for &seed in seeds {
        let (data, sums) = two_feature_data(50, seed);
        let mut rng = stream_rng(seed, 1);
        let mut state = multistart(&params, &data, &model, 8, 40, &mut rng)?;
        let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
        let mut total = 0.0;
        let kept = sweeps - sweeps / 2;
        for sweep in 0..sweeps {
            ibp_gibbs_sweep(&mut state, &data, &model, &mut rng)?;
            if sweep >= sweeps / 2 {
                *hist.entry(state.num_features()).or_default() += 1;
                total += state.row_sums().iter().sum::<usize>() as f64;
            }
        }
        let mode = hist.iter().max_by_key(|&(k, c)| (*c, std::cmp::Reverse(*k))).map_or(0, |(k, _)| *k);
        modes.push(mode);
        if mode == 2 {
            let planted = sums.iter().sum::<usize>() as f64;
            rels.push((total / kept as f64 - planted).abs() / planted);
        }
    }
    let share = modes.iter().filter(|&&m| m == 2).count() as f64 / seeds.len() as f64;
    let worst_rel = rels.iter().copied().fold(0.0, f64::max);
    Ok(vec![
        Outcome::new(
            "ibp planted features, share of runs with mode K = 2",
            share,
            Bound::AtLeast,
            min_share,
            json!({"modes": modes, "sweeps": sweeps}),
        ),
        Outcome::at_most(
            "ibp planted features, membership total relative error",
            worst_rel,
            rel_tol,
            json!({"relative_errors": rels}),
        ),
    ])
}

/// Self-comparison of a sampler: the TVD noise floor at `reps`.
pub fn crp_self_equivalence(theta: f64, n: usize, reps: usize, seed: u64, tol: f64) -> Result<Outcome> {
    let params = crp(theta)?;
    let sampler = |r: &mut StreamRng| crp_sample(&params, n, r);
    Ok(tvd_equivalence("crp_sample", sampler, "crp_sample", sampler, reps, seed, tol).into())
}
