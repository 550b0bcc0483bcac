//! Subordinators: Lévy specifications, Laplace exponents and their
//! derivatives, the partition probability function obtained from a Laplace
//! exponent, Ferguson–Klass jump simulation, Poisson thinning and the
//! round-by-round construction of beta-subordinator jumps.

use std::cell::RefCell;

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1};
use serde::Serialize;

use crate::allocation::{induced_partition, Partition};
use crate::epf::{poisson, EpfValue, IbpParams};
use crate::error::{domain, Error, Result};
use crate::numeric::{
    digamma, exp_integral_e1, integrate, invert_decreasing, ln_factorial, Estimate,
};
use crate::sticks::{categorical_draws, StickKind, StickWeights};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Lévy density families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LevyDensity {
    /// `ρ(w) = θ w^{-1} e^{-βw}` on `(0, ∞)`.
    Gamma { theta: f64, beta: f64 },
    /// `ρ(w) = γθ w^{-1} (1 - w)^{θ-1}` on `(0, 1)`.
    Beta { gamma: f64, theta: f64 },
}

/// A subordinator: drift plus a Poisson process of jumps with Lévy density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevySpec {
    drift: f64,
    density: LevyDensity,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be positive and finite, got {x}"))
    }
}

impl LevySpec {
    /// Gamma process with zero drift.
    pub fn gamma(theta: f64, beta: f64) -> Result<Self> {
        positive("gamma-process theta", theta)?;
        positive("gamma-process beta", beta)?;
        Ok(Self {
            drift: 0.0,
            density: LevyDensity::Gamma { theta, beta },
        })
    }

    /// Beta process with mass `gamma`, concentration `theta` and zero drift.
    pub fn beta(gamma: f64, theta: f64) -> Result<Self> {
        positive("beta-process mass", gamma)?;
        positive("beta-process theta", theta)?;
        Ok(Self {
            drift: 0.0,
            density: LevyDensity::Beta { gamma, theta },
        })
    }

    pub fn with_drift(mut self, drift: f64) -> Result<Self> {
        if !(drift >= 0.0 && drift.is_finite()) {
            return domain(format!("drift must be nonnegative, got {drift}"));
        }
        self.drift = drift;
        Ok(self)
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn density(&self) -> LevyDensity {
        self.density
    }

    /// Lévy density at `w`.
    pub fn levy_density(&self, w: f64) -> f64 {
        match self.density {
            LevyDensity::Gamma { theta, beta } if w > 0.0 => theta * (-beta * w).exp() / w,
            LevyDensity::Beta { gamma, theta } if w > 0.0 && w < 1.0 => {
                gamma * theta * (1.0 - w).powf(theta - 1.0) / w
            }
            _ => 0.0,
        }
    }

    /// Tail of the Lévy measure, `T(x) = ρ((x, ∞))`, for `x > 0`.
    pub fn tail(&self, x: f64) -> f64 {
        match self.density {
            LevyDensity::Gamma { theta, beta } => theta * exp_integral_e1(beta * x),
            LevyDensity::Beta { gamma, theta } => {
                if x >= 1.0 {
                    return 0.0;
                }
                gamma * theta * beta_tail_unit(x, theta)
            }
        }
    }

    /// Expected total size of jumps no larger than `x`: `∫_0^x w ρ(dw)`.
    pub fn mean_mass_below(&self, x: f64) -> f64 {
        match self.density {
            LevyDensity::Gamma { theta, beta } => -theta * (-beta * x).exp_m1() / beta,
            LevyDensity::Beta { gamma, theta } => {
                let x = x.min(1.0);
                // γ (1 - (1 - x)^θ)
                -gamma * (theta * (-x).ln_1p()).exp_m1()
            }
        }
    }

    /// Expected sum of all jumps, `∫ w ρ(dw)`.
    pub fn mean_total_mass(&self) -> f64 {
        self.mean_mass_below(f64::INFINITY)
    }

    fn upper_support(&self) -> f64 {
        match self.density {
            LevyDensity::Gamma { beta, .. } => 745.0 / beta,
            LevyDensity::Beta { .. } => 1.0 - f64::EPSILON / 2.0,
        }
    }
}

/// `∫_x^1 w^{-1} (1 - w)^{θ-1} dw` for `0 < x < 1`.
fn beta_tail_unit(x: f64, theta: f64) -> f64 {
    if x <= 0.5 {
        // -ln x - ψ(θ) - γ_E - Σ_{j≥1} c_j x^j / j with (1 - w)^{θ-1} = Σ c_j w^j.
        let mut c = 1.0;
        let mut pow = 1.0;
        let mut series = 0.0;
        for j in 1..200 {
            c *= (j as f64 - theta) / j as f64;
            pow *= x;
            let term = c * pow / j as f64;
            series += term;
            if term.abs() < 1e-17 * series.abs().max(1e-300) {
                break;
            }
        }
        -x.ln() - digamma(theta) - EULER_GAMMA - series
    } else {
        // Σ_{j≥0} (1 - x)^{θ+j} / (θ + j)
        let y = 1.0 - x;
        let mut pow = y.powf(theta);
        let mut sum = 0.0;
        for j in 0..400 {
            let term = pow / (theta + j as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
            pow *= y;
        }
        sum
    }
}

/// `w(u) = 1 - u^{1/θ}`, computed without cancellation near `u = 1`.
fn beta_substitution(u: f64, theta: f64) -> f64 {
    -(u.ln() / theta).exp_m1()
}

const QUAD_REL_TOL: f64 = 1e-11;

/// `∫_0^1 h(w) (1 - w)^{θ-1} dw / w`, given `h` and the exact integral of the
/// small-`w` remainder beyond `t_max` in the lower piece.
///
/// Split at `w = 1/2`. Below, `w = e^{-t}` resolves features near `w = 1/λ`
/// for any λ; above, `w = 1 - u^{1/θ}` absorbs the endpoint singularity.
fn beta_weighted_integral(
    theta: f64,
    h: impl Fn(f64) -> f64,
    t_max: f64,
    remainder: f64,
) -> Result<Estimate> {
    let low = integrate(
        |t| {
            let w = (-t).exp();
            h(w) * ((theta - 1.0) * (-w).ln_1p()).exp()
        },
        std::f64::consts::LN_2,
        t_max,
        0.0,
        QUAD_REL_TOL,
    )?;
    let high = integrate(
        |u| {
            let w = beta_substitution(u, theta);
            h(w) / w
        },
        0.0,
        0.5f64.powf(theta),
        0.0,
        QUAD_REL_TOL,
    )?;
    Ok(Estimate {
        value: low.value + high.value / theta + remainder,
        error: low.error + high.error / theta,
    })
}

/// Laplace exponent `Φ(λ) = cλ + ∫ (1 - e^{-λw}) ρ(dw)`.
///
/// Closed form for the gamma family; adaptive quadrature with its error
/// estimate for the beta family.
pub fn laplace_exponent(spec: &LevySpec, lambda: f64) -> Result<Estimate> {
    if !(lambda >= 0.0) {
        return domain(format!("Laplace exponent needs λ >= 0, got {lambda}"));
    }
    let drift = spec.drift * lambda;
    if lambda == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    match spec.density {
        LevyDensity::Gamma { theta, beta } => {
            Ok(Estimate::exact(drift + theta * (lambda / beta).ln_1p()))
        }
        LevyDensity::Beta { gamma, theta } => {
            // Below e^{-t_max}, 1 - e^{-λw} = λw to double precision.
            let t_max = lambda.ln().max(0.0) + 40.0;
            let est = beta_weighted_integral(
                theta,
                |w| -(-lambda * w).exp_m1(),
                t_max,
                lambda * (-t_max).exp(),
            )?;
            let est = Estimate {
                value: theta * est.value,
                error: theta * est.error,
            };
            Ok(Estimate {
                value: drift + gamma * est.value,
                error: gamma * est.error,
            })
        }
    }
}

/// `Φ` by direct quadrature of the Lévy–Khinchin integral, for any family.
pub fn laplace_exponent_by_quadrature(spec: &LevySpec, lambda: f64) -> Result<Estimate> {
    if !(lambda >= 0.0) {
        return domain(format!("Laplace exponent needs λ >= 0, got {lambda}"));
    }
    if lambda == 0.0 {
        return Ok(Estimate::exact(0.0));
    }
    let integrand = |w: f64| -(-lambda * w).exp_m1() * spec.levy_density(w);
    let est = match spec.density {
        // w = t / (1 - t) maps (0, 1) onto (0, ∞).
        LevyDensity::Gamma { .. } => integrate(
            |t| {
                let w = t / (1.0 - t);
                integrand(w) / ((1.0 - t) * (1.0 - t))
            },
            0.0,
            1.0,
            0.0,
            QUAD_REL_TOL,
        )?,
        LevyDensity::Beta { .. } => integrate(integrand, 0.0, 1.0, 0.0, 1e-10)?,
    };
    Ok(Estimate {
        value: spec.drift * lambda + est.value,
        error: est.error,
    })
}

/// `n`-th derivative of the Laplace exponent,
/// `Φ^{(n)}(λ) = (-1)^{n-1} ∫ w^n e^{-λw} ρ(dw)` (plus the drift for `n = 1`).
pub fn laplace_exponent_derivative(spec: &LevySpec, order: usize, lambda: f64) -> Result<Estimate> {
    if order == 0 {
        return laplace_exponent(spec, lambda);
    }
    if !(lambda >= 0.0) {
        return domain(format!("Laplace exponent needs λ >= 0, got {lambda}"));
    }
    let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
    let drift = if order == 1 { spec.drift } else { 0.0 };
    let magnitude = abs_derivative(spec, order, lambda)?;
    Ok(Estimate {
        value: drift + sign * magnitude.value,
        error: magnitude.error,
    })
}

/// `|Φ^{(n)}(λ)|` without drift, `n >= 1`.
fn abs_derivative(spec: &LevySpec, order: usize, lambda: f64) -> Result<Estimate> {
    match spec.density {
        LevyDensity::Gamma { theta, beta } => Ok(Estimate::exact(
            (ln_factorial(order - 1) + theta.ln() - order as f64 * (lambda + beta).ln()).exp(),
        )),
        LevyDensity::Beta { gamma, theta } => {
            let t_max = lambda.ln().max(0.0) + 40.0;
            let est = beta_weighted_integral(
                theta,
                |w| w.powi(order as i32) * (-lambda * w).exp(),
                t_max,
                0.0,
            )?;
            let est = Estimate {
                value: theta * est.value,
                error: theta * est.error,
            };
            Ok(Estimate {
                value: gamma * est.value,
                error: gamma * est.error,
            })
        }
    }
}

/// Result of [`eppf_from_laplace`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EppfQuadrature {
    pub value: EpfValue,
    /// Estimated absolute error of `value.log_prob`.
    pub log_error: f64,
}

/// Partition probability function of the normalized jumps of a subordinator,
///
/// `p(N_1..N_K) = (-1)^{N-K} / (N-1)! ∫_0^∞ λ^{N-1} e^{-Φ(λ)} Π_k Φ^{(N_k)}(λ) dλ`,
///
/// evaluated by adaptive quadrature in log space. The signs of the
/// derivatives cancel `(-1)^{N-K}`, so the integrand is handled through
/// `|Φ^{(n)}|`. With `λ = e^s` the integrand is unimodal in `s` with
/// exponential tails; it is integrated outward from its mode, centered at
/// `s = ln β` for the gamma family (that is, in the scaled variable `λ / β`).
pub fn eppf_from_laplace(spec: &LevySpec, block_sizes: &[usize], tol: f64) -> Result<EppfQuadrature> {
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return domain("block sizes must be a nonempty list of positive counts");
    }
    if spec.drift != 0.0 {
        return Err(Error::Unsupported(
            "partitions from normalized jumps require zero drift".into(),
        ));
    }
    let n: usize = block_sizes.iter().sum();
    let log_norm = ln_factorial(n - 1);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let log_integrand = |s: f64| -> f64 {
        let lambda = s.exp();
        let phi = match laplace_exponent(spec, lambda) {
            Ok(e) => e.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                return f64::NEG_INFINITY;
            }
        };
        let mut acc = n as f64 * s - phi - log_norm;
        for &size in block_sizes {
            match abs_derivative(spec, size, lambda) {
                Ok(d) => acc += d.value.ln(),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    return f64::NEG_INFINITY;
                }
            }
        }
        acc
    };

    let center = match spec.density {
        LevyDensity::Gamma { beta, .. } => beta.ln(),
        LevyDensity::Beta { .. } => 0.0,
    };
    // Coarse scan for the mode of the log-integrand.
    let (mut mode, mut peak) = (center, f64::NEG_INFINITY);
    for j in -25..=25 {
        let s = center + 2.0 * j as f64;
        let v = log_integrand(s);
        if v > peak {
            peak = v;
            mode = s;
        }
    }
    if let Some(e) = failure.borrow_mut().take() {
        return Err(e);
    }
    if !peak.is_finite() {
        return Err(Error::Divergent(format!(
            "integrand of the partition probability is not finite (peak {peak})"
        )));
    }

    const WIDTH: f64 = 2.0;
    const MAX_STEPS: usize = 5000;
    let scaled = |s: f64| (log_integrand(s) - peak).exp();
    let mut pieces: Vec<f64> = Vec::new();
    let mut error = 0.0;
    for direction in [-1.0, 1.0] {
        let mut steps = 0;
        loop {
            let a = mode + direction * WIDTH * steps as f64;
            let b = a + direction * WIDTH;
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let est = integrate(scaled, lo, hi, 1e-300, (0.01 * tol).clamp(1e-13, 1e-8))?;
            if let Some(e) = failure.borrow_mut().take() {
                return Err(e);
            }
            pieces.push(est.value);
            error += est.error;
            steps += 1;
            let total: f64 = pieces.iter().sum();
            let edge = log_integrand(b) - peak;
            if est.value < 1e-17 * total && edge < -40.0 {
                break;
            }
            if steps >= MAX_STEPS {
                return Err(Error::Divergent(
                    "λ^{N-1} e^{-Φ(λ)} Π Φ^{(N_k)}(λ) does not decay: \
                     the Lévy measure must have infinite total mass so that Φ(λ) → ∞"
                        .into(),
                ));
            }
        }
    }
    let total: f64 = pieces.iter().sum();
    let log_prob = peak + total.ln();
    let log_error = error / total;
    if log_error > tol {
        return Err(Error::Quadrature {
            achieved: log_error,
            requested: tol,
        });
    }
    Ok(EppfQuadrature {
        value: EpfValue { log_prob },
        log_error,
    })
}

/// Where to stop a Ferguson–Klass jump sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpTruncation {
    /// Keep every jump larger than this size.
    Threshold(f64),
    /// Keep this many of the largest jumps.
    Count(usize),
}

/// A finite set of subordinator jumps, largest first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpSet {
    jumps: Vec<f64>,
    /// Every kept jump exceeds this size; all smaller jumps were dropped.
    truncation_threshold: f64,
    /// Expected total size of the dropped jumps.
    omitted_mass_mean: f64,
    drift: f64,
}

impl JumpSet {
    /// Jumps supplied directly, e.g. from another simulator.
    pub fn new(mut jumps: Vec<f64>, truncation_threshold: f64, omitted_mass_mean: f64) -> Result<Self> {
        if jumps.iter().any(|&j| !(j > truncation_threshold && j.is_finite())) {
            return domain("every jump must be finite and exceed the truncation threshold");
        }
        if !(truncation_threshold >= 0.0) {
            return domain("truncation threshold must be nonnegative");
        }
        jumps.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            jumps,
            truncation_threshold,
            omitted_mass_mean,
            drift: 0.0,
        })
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn truncation_threshold(&self) -> f64 {
        self.truncation_threshold
    }

    pub fn omitted_mass_mean(&self) -> f64 {
        self.omitted_mass_mean
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn total(&self) -> f64 {
        self.jumps.iter().sum()
    }
}

/// Inverse of the tail Lévy measure: the jump size `x` with `T(x) = level`.
/// `None` when the jump is below the smallest representable size.
fn inverse_tail(spec: &LevySpec, level: f64) -> Result<Option<f64>> {
    let lo = 1e-300;
    let hi = spec.upper_support();
    if level >= spec.tail(lo) {
        return Ok(None);
    }
    if level <= spec.tail(hi) {
        return Ok(Some(hi));
    }
    invert_decreasing(
        |x| spec.tail(x),
        |x| -spec.levy_density(x),
        level,
        lo,
        hi,
        1e-12,
    )
    .map(Some)
}

/// Jumps of a subordinator by the Ferguson–Klass method: with standard
/// Poisson arrival times `Γ_1 < Γ_2 < ...`, the jumps are `T^{-1}(Γ_k)`,
/// produced in decreasing order.
pub fn ferguson_klass_jumps<R: Rng + ?Sized>(
    spec: &LevySpec,
    truncation: JumpTruncation,
    rng: &mut R,
) -> Result<JumpSet> {
    let mut arrival = 0.0;
    let mut next = |rng: &mut R| {
        let e: f64 = Exp1.sample(rng);
        arrival += e;
        arrival
    };
    let mut jumps = Vec::new();
    let threshold = match truncation {
        JumpTruncation::Threshold(eps) => {
            if !(eps > 0.0) {
                return domain(format!("jump threshold must be positive, got {eps}"));
            }
            let level = spec.tail(eps);
            loop {
                let g = next(rng);
                if g >= level {
                    break;
                }
                match inverse_tail(spec, g)? {
                    Some(x) if x > eps => jumps.push(x),
                    _ => break,
                }
            }
            eps
        }
        JumpTruncation::Count(k) => {
            for _ in 0..k {
                match inverse_tail(spec, next(rng))? {
                    Some(x) => jumps.push(x),
                    None => break,
                }
            }
            // The first dropped jump bounds the kept ones from below.
            inverse_tail(spec, next(rng))?.unwrap_or(0.0)
        }
    };
    // Inversion error can reorder jumps that are equal to within tolerance.
    jumps.sort_by(|a, b| b.total_cmp(a));
    Ok(JumpSet {
        jumps,
        truncation_threshold: threshold,
        omitted_mass_mean: spec.mean_mass_below(threshold),
        drift: spec.drift,
    })
}

/// Splits points into those kept (each independently with probability
/// `keep_prob(x)`) and those discarded.
pub fn thin_poisson_split<R: Rng + ?Sized>(
    points: &[f64],
    keep_prob: impl Fn(f64) -> f64,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for &x in points {
        let h = keep_prob(x);
        if !(0.0..=1.0).contains(&h) {
            return domain(format!("keep probability {h} at {x} outside [0, 1]"));
        }
        if rng.random::<f64>() < h {
            kept.push(x);
        } else {
            dropped.push(x);
        }
    }
    Ok((kept, dropped))
}

/// Poisson thinning: keeps each point independently with probability `keep_prob(x)`.
pub fn thin_poisson<R: Rng + ?Sized>(
    points: &[f64],
    keep_prob: impl Fn(f64) -> f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(thin_poisson_split(points, keep_prob, rng)?.0)
}

/// The beta-process Lévy intensity left after `rounds` rounds of selection,
/// `γθ w^{-1} (1 - w)^{θ + rounds - 1} dw`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualBetaLevy {
    pub gamma: f64,
    pub theta: f64,
    pub rounds: usize,
}

impl ResidualBetaLevy {
    /// Exponent of `(1 - w)` in the intensity.
    pub fn exponent(&self) -> f64 {
        self.theta + self.rounds as f64 - 1.0
    }

    pub fn density(&self, w: f64) -> f64 {
        if w <= 0.0 || w >= 1.0 {
            return 0.0;
        }
        self.gamma * self.theta * (1.0 - w).powf(self.exponent()) / w
    }

    /// Total mass of the selected (thinned by `w`) intensity `w · μ(dw)`:
    /// the Poisson mean of next round's new jumps.
    pub fn selection_mass(&self) -> f64 {
        self.gamma * self.theta / (self.exponent() + 1.0)
    }

    /// The discarded part after one more round of selection.
    pub fn after_round(&self) -> Self {
        Self {
            rounds: self.rounds + 1,
            ..*self
        }
    }
}

/// Output of [`beta_round_simulation`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaRounds {
    /// New jumps selected on each round, round 1 first.
    pub rounds: Vec<Vec<f64>>,
    /// Intensity of the jumps no round has selected.
    pub residual: ResidualBetaLevy,
}

/// Exact simulation of beta-subordinator jumps in order of appearance.
///
/// On each round, selecting jumps with probability equal to their size thins
/// the residual intensity `μ` to `w μ(dw)`: a Poisson number of jumps with
/// mean [`ResidualBetaLevy::selection_mass`] and sizes from the normalized
/// selected intensity, Beta(1, θ + m - 1) on round `m`. The unselected part
/// `(1 - w) μ(dw)` becomes the next residual.
pub fn beta_round_simulation<R: Rng + ?Sized>(
    params: &IbpParams,
    n_rounds: usize,
    rng: &mut R,
) -> Result<BetaRounds> {
    if n_rounds == 0 {
        return domain("at least one round is required");
    }
    let mut residual = ResidualBetaLevy {
        gamma: params.gamma(),
        theta: params.theta(),
        rounds: 0,
    };
    let mut rounds = Vec::with_capacity(n_rounds);
    for _ in 0..n_rounds {
        let count = poisson(residual.selection_mass(), rng);
        let law = Beta::new(1.0, residual.exponent() + 1.0)
            .map_err(|e| Error::Domain(format!("beta law: {e}")))?;
        rounds.push((0..count).map(|_| law.sample(rng)).collect());
        residual = residual.after_round();
    }
    Ok(BetaRounds { rounds, residual })
}

/// Normalizes the jumps to probabilities, draws `n` i.i.d. labels from them
/// and returns the induced partition with the normalized weights listed in
/// order of first appearance. Jumps not hit by the `n` draws follow in
/// size-biased random order, which is the order in which further draws
/// would reveal them.
///
/// Weights are jumps divided by `Σ jumps + omitted_mass_mean`, so the tail
/// bound is the expected share of the dropped small jumps; labels are drawn
/// from the kept jumps renormalized.
pub fn normalized_jumps_by_appearance<R: Rng + ?Sized>(
    jumps: &JumpSet,
    n: usize,
    rng: &mut R,
) -> Result<(StickWeights, Partition)> {
    if jumps.drift != 0.0 {
        return Err(Error::Unsupported(
            "normalized jumps define a partition only with zero drift".into(),
        ));
    }
    if jumps.jumps.is_empty() {
        return domain("no jumps to normalize");
    }
    let labels = categorical_draws(&jumps.jumps, n, rng);
    let partition = induced_partition(&labels);

    let mut order: Vec<usize> = Vec::with_capacity(jumps.jumps.len());
    let mut seen = vec![false; jumps.jumps.len()];
    for &l in &labels {
        if !seen[l] {
            seen[l] = true;
            order.push(l);
        }
    }
    // Size-biased order of the rest: ascending Exp(1) / weight.
    let mut rest: Vec<(f64, usize)> = (0..jumps.jumps.len())
        .filter(|&k| !seen[k])
        .map(|k| {
            let e: f64 = Exp1.sample(rng);
            (e / jumps.jumps[k], k)
        })
        .collect();
    rest.sort_by(|a, b| a.0.total_cmp(&b.0));
    order.extend(rest.into_iter().map(|(_, k)| k));

    let denom = jumps.total() + jumps.omitted_mass_mean;
    let weights = order.iter().map(|&k| jumps.jumps[k] / denom).collect();
    let sticks = StickWeights::from_parts(
        weights,
        StickKind::Partition,
        jumps.jumps.len(),
        jumps.omitted_mass_mean / denom,
        None,
    );
    Ok((sticks, partition))
}
