use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use csp_cli::experiments::{self as ex, Outcome};
use csp_cli::report::{write_report, Format};
use csp_core::crm::{
    beta_process, bernoulli_process_draw, dp_draw_labels, gamma_process, nonempty_dirichlet_process, UniformUnit,
};
use csp_core::epf::{
    crp_sample, eppf_crp, eppf_validity_check, efpf_ibp, ibp_allocation_log_prob, ibp_sample,
    inconsistent_eppf_example, CrpParams, IbpParams,
};
use csp_core::harness::{enumerate_partitions, replicate, ExperimentConfig};
use csp_core::infer::{
    co_clustering, crp_gibbs_sweep, ibp_gibbs_sweep, least_squares_clustering, multistart, FeatureState,
    LinearGaussian, MixtureState, NormalInverseGamma,
};
use csp_core::rng::stream_rng;
use csp_core::sticks::{gem_sticks, ibp_sticks};
use csp_core::subord::{eppf_from_laplace, ferguson_klass_jumps, JumpTruncation, LevySpec};
use csp_core::{FeatureAllocation, LabelSequence, Partition};

/// Samplers, probability functions and equivalence checks for exchangeable
/// partitions and feature allocations.
///
/// Exit status: 0 when every check passed, 1 when a tolerance failed,
/// 2 on a usage error.
#[derive(Parser)]
#[command(name = "csp", version)]
struct Cli {
    #[arg(long, global = true, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Seed for every random stream.
    #[arg(long, global = true, env = "CSP_SEED", default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw structures or random measures.
    #[command(subcommand)]
    Sample(SampleCmd),
    /// Exact probabilities of partitions and feature allocations.
    #[command(subcommand)]
    Prob(ProbCmd),
    /// Deterministic and Monte Carlo checks with pass/fail outcomes.
    #[command(subcommand)]
    Check(CheckCmd),
    /// Compare two representations of the same law.
    Equiv(EquivArgs),
    /// Gibbs sampling on data from a JSONL file.
    #[command(subcommand)]
    Infer(InferCmd),
    /// Partition probability from the Laplace exponent of a subordinator.
    EppfQuadrature(QuadratureArgs),
    /// Jumps of a subordinator by Ferguson–Klass inversion.
    Jumps(JumpsArgs),
    /// Labels drawn from random measures.
    #[command(subcommand)]
    Draw(DrawCmd),
}

#[derive(Args, Clone, Copy)]
struct Reps {
    #[arg(long, default_value_t = 10)]
    reps: usize,
}

#[derive(Subcommand)]
enum SampleCmd {
    /// Chinese restaurant process partitions of [n].
    Crp {
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// Indian buffet process feature allocations of [n].
    Ibp {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// GEM stick weights.
    Gem {
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// IBP stick weights in order of appearance over `rounds` indices.
    IbpSticks {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// Gamma process atoms above a threshold.
    GammaProcess {
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = csp_core::crm::DEFAULT_GAMMA_THRESHOLD)]
        threshold: f64,
        #[command(flatten)]
        reps: Reps,
    },
    /// Beta process atoms selected within `rounds` indices.
    BetaProcess {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[command(flatten)]
        reps: Reps,
    },
}

#[derive(Subcommand)]
enum ProbCmd {
    /// CRP partition probability: of given block sizes, of a partition, or
    /// of every partition of [n].
    Eppf {
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        /// Comma-separated block sizes, e.g. 2,1.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["partition", "n"])]
        sizes: Vec<usize>,
        /// A partition in text form, e.g. "[[1,2],[3]]".
        #[arg(long, conflicts_with = "n")]
        partition: Option<String>,
        /// Enumerate all partitions of [n].
        #[arg(long)]
        n: Option<usize>,
    },
    /// IBP feature probability of block sizes over [n], or of an
    /// allocation.
    Efpf {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', conflicts_with = "allocation")]
        sizes: Vec<usize>,
        /// A feature allocation in text form, e.g. "[[1,2],[2]]".
        #[arg(long)]
        allocation: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Candidate {
    Crp,
    /// Symmetric but not additive: p(1) = 1, p(1,1) = 0.1, p(2) = 0.8.
    InconsistentExample,
}

#[derive(Subcommand)]
enum CheckCmd {
    /// Symmetry, normalization and additivity of a candidate EPPF.
    Epf {
        #[arg(long, value_enum, default_value_t = Candidate::Crp)]
        candidate: Candidate,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 5)]
        n_max: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// EPPF sums to one over all partitions of [n] for n = 2..=n-max.
    Normalization {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        thetas: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        n_max: usize,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Product of prediction-rule factors equals the EPPF.
    Prediction {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        thetas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Gamma-process EPPF by quadrature against the closed form.
    Quadrature {
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        thetas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,7")]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Mean IBP feature count against its closed form (relative error).
    IbpCount {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 5)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        reps: usize,
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
    /// IBP spot values: the shared-feature allocation of [2] and the
    /// first index's feature count.
    EfpfSpot {
        #[arg(long, default_value_t = 1_000_000)]
        reps: usize,
    },
    /// Gibbs conditionals, joint-distribution consistency and planted
    /// structure recovery.
    Inference {
        #[arg(long, default_value_t = 50_000)]
        reps: usize,
    },
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Pairing {
    /// CRP vs paintbox of GEM sticks.
    CrpGem,
    /// CRP vs labels from a normalized gamma process.
    CrpGammaCrm,
    /// First appearance-ordered normalized gamma jump vs Beta(1, θ).
    GammaFirstStick,
    /// IBP vs Bernoulli featurization of IBP sticks.
    IbpSticks,
    /// Round-m IBP sticks vs Beta(1, θ + m - 1).
    IbpRoundSticks,
    /// First-table occupancy of the CRP vs Beta(1, θ).
    PolyaUrn,
    /// CRP against itself: the sampling noise floor.
    CrpSelf,
}

#[derive(Args)]
struct EquivArgs {
    #[arg(value_enum)]
    pairing: Pairing,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Size of the structures compared; defaults to 4 (partitions) or 3
    /// (feature allocations).
    #[arg(long)]
    n: Option<usize>,
    /// Replicates per sampler; defaults depend on the pairing.
    #[arg(long)]
    reps: Option<usize>,
    /// Defaults depend on the pairing.
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = csp_core::crm::DEFAULT_GAMMA_THRESHOLD)]
    threshold: f64,
    /// Round for ibp-round-sticks.
    #[arg(long, default_value_t = 1)]
    round: usize,
    /// Number of customers for polya-urn.
    #[arg(long, default_value_t = 2000)]
    horizon: usize,
}

#[derive(Subcommand)]
enum InferCmd {
    /// CRP mixture of univariate normals, collapsed Gibbs.
    Crp {
        /// JSONL, one number (or one-element array) per line.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 200)]
        sweeps: usize,
        /// Normal-inverse-gamma prior: mean, kappa, shape, scale.
        #[arg(long, value_delimiter = ',', num_args = 4, default_value = "0,0.01,2,2")]
        prior: Vec<f64>,
    },
    /// IBP linear-Gaussian feature model.
    Ibp {
        /// JSONL, one array of numbers per line.
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 200)]
        sweeps: usize,
        #[arg(long, default_value_t = 1.0)]
        sigma_x: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma_a: f64,
        /// Short chains from the empty state; the best is continued.
        #[arg(long, default_value_t = 1)]
        starts: usize,
        #[arg(long, default_value_t = 0)]
        start_sweeps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Gamma,
    Beta,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Gamma => "gamma",
            Family::Beta => "beta",
        }
    }
}

#[derive(Args)]
struct LevyArgs {
    #[arg(long, value_enum, default_value_t = Family::Gamma)]
    family: Family,
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Rate of the gamma family.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Mass of the beta family.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

impl LevyArgs {
    fn spec(&self) -> csp_core::Result<LevySpec> {
        match self.family {
            Family::Gamma => LevySpec::gamma(self.theta, self.beta),
            Family::Beta => LevySpec::beta(self.gamma, self.theta),
        }
    }

    fn params(&self) -> BTreeMap<String, f64> {
        match self.family {
            Family::Gamma => params(&[("theta", self.theta), ("beta", self.beta)]),
            Family::Beta => params(&[("gamma", self.gamma), ("theta", self.theta)]),
        }
    }
}

#[derive(Args)]
struct QuadratureArgs {
    #[command(flatten)]
    levy: LevyArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    /// Relative tolerance of the outer integral.
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
}

#[derive(Args)]
struct JumpsArgs {
    #[command(flatten)]
    levy: LevyArgs,
    /// Keep jumps above this size.
    #[arg(long, default_value_t = 1e-4, conflicts_with = "count")]
    threshold: f64,
    /// Keep this many of the largest jumps instead.
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Subcommand)]
enum DrawCmd {
    /// Labels of [n] drawn from a Dirichlet process built from a truncated
    /// gamma process.
    DpLabels {
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = csp_core::crm::DEFAULT_GAMMA_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        reps: Reps,
    },
    /// Label sets of [n] from a Bernoulli process on a beta process.
    BernoulliProcess {
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        reps: Reps,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<csp_core::Error> for Failure {
    fn from(e: csp_core::Error) -> Self {
        use csp_core::Error::*;
        match e {
            Domain(_) | InvalidStructure(_) | Parse { .. } | Unsupported(_) | TooLarge { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn settings(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

/// What a subcommand produced: its configuration, records, and whether all
/// of its checks passed.
struct Run {
    config: ExperimentConfig,
    records: Vec<Value>,
    passed: bool,
}

impl Run {
    fn new(cli: &Cli, subcommand: &str, params: BTreeMap<String, f64>, n: usize, reps: usize) -> Self {
        Self {
            config: ExperimentConfig {
                subcommand: subcommand.into(),
                params,
                settings: BTreeMap::new(),
                n,
                reps,
                seed: cli.seed,
                tolerance: None,
                output: cli.output.as_ref().map(|p| p.display().to_string()),
            },
            records: Vec::new(),
            passed: true,
        }
    }

    fn outcomes(mut self, outcomes: Vec<Outcome>) -> Self {
        self.passed = outcomes.iter().all(|o| o.passed);
        self.records = outcomes
            .iter()
            .map(|o| serde_json::to_value(o).expect("outcome serializes"))
            .collect();
        self
    }
}

fn sample(cli: &Cli, cmd: &SampleCmd) -> CliResult<Run> {
    let seed = cli.seed;
    Ok(match *cmd {
        SampleCmd::Crp { theta, n, reps: Reps { reps } } => {
            let p = CrpParams::new(theta)?;
            let mut run = Run::new(cli, "sample crp", params(&[("theta", theta)]), n, reps);
            let draws = replicate(seed, 0, reps, |r| crp_sample(&p, n, r));
            for (i, d) in draws.iter().enumerate() {
                let lp = eppf_crp(&p, &d.block_sizes()).map(|v| v.log_prob).ok();
                run.records.push(json!({"rep": i, "draw": d.to_string(), "log_prob": lp}));
            }
            run
        }
        SampleCmd::Ibp { gamma, theta, n, reps: Reps { reps } } => {
            let p = IbpParams::new(gamma, theta)?;
            let mut run = Run::new(cli, "sample ibp", params(&[("gamma", gamma), ("theta", theta)]), n, reps);
            let draws = replicate(seed, 0, reps, |r| ibp_sample(&p, n, r));
            for (i, d) in draws.iter().enumerate() {
                let lp = ibp_allocation_log_prob(&p, d)?.log_prob;
                run.records.push(json!({"rep": i, "draw": d.to_string(), "log_prob": lp}));
            }
            run
        }
        SampleCmd::Gem { theta, k, reps: Reps { reps } } => {
            let p = CrpParams::new(theta)?;
            gem_sticks(&p, k, &mut stream_rng(seed, 0))?;
            let mut run = Run::new(cli, "sample gem", params(&[("theta", theta)]), k, reps);
            let draws = replicate(seed, 0, reps, |r| gem_sticks(&p, k, r).expect("checked above"));
            for (i, s) in draws.iter().enumerate() {
                run.records.push(json!({"rep": i, "weights": s.weights(), "tail_mass": s.tail_mass_bound()}));
            }
            run
        }
        SampleCmd::IbpSticks { gamma, theta, rounds, reps: Reps { reps } } => {
            let p = IbpParams::new(gamma, theta)?;
            ibp_sticks(&p, rounds, &mut stream_rng(seed, 0))?;
            let mut run = Run::new(cli, "sample ibp-sticks", params(&[("gamma", gamma), ("theta", theta)]), rounds, reps);
            let draws = replicate(seed, 0, reps, |r| ibp_sticks(&p, rounds, r).expect("checked above"));
            for (i, s) in draws.iter().enumerate() {
                run.records.push(json!({
                    "rep": i,
                    "weights": s.weights(),
                    "first_index": s.first_index(),
                    "tail_mass": s.tail_mass_bound(),
                }));
            }
            run
        }
        SampleCmd::GammaProcess { theta, beta, threshold, reps: Reps { reps } } => {
            gamma_process(theta, beta, &UniformUnit, threshold, &mut stream_rng(seed, 0))?;
            let mut run = Run::new(
                cli,
                "sample gamma-process",
                params(&[("theta", theta), ("beta", beta), ("threshold", threshold)]),
                0,
                reps,
            );
            let draws = replicate(seed, 0, reps, |r| {
                gamma_process(theta, beta, &UniformUnit, threshold, r).expect("checked above")
            });
            for (i, m) in draws.iter().enumerate() {
                run.records.push(measure_record(i, m));
            }
            run
        }
        SampleCmd::BetaProcess { gamma, theta, rounds, reps: Reps { reps } } => {
            beta_process(gamma, theta, &UniformUnit, rounds, &mut stream_rng(seed, 0))?;
            let mut run =
                Run::new(cli, "sample beta-process", params(&[("gamma", gamma), ("theta", theta)]), rounds, reps);
            let draws = replicate(seed, 0, reps, |r| {
                beta_process(gamma, theta, &UniformUnit, rounds, r).expect("checked above")
            });
            for (i, m) in draws.iter().enumerate() {
                run.records.push(measure_record(i, m));
            }
            run
        }
    })
}

fn measure_record(rep: usize, m: &csp_core::crm::AtomicMeasure) -> Value {
    json!({
        "rep": rep,
        "atoms": m.atoms(),
        "total_mass": m.total_mass(),
        "omitted_mass_mean": m.omitted_mass_mean(),
        "truncation_threshold": m.truncation_threshold(),
    })
}

fn prob(cli: &Cli, cmd: &ProbCmd) -> CliResult<Run> {
    Ok(match cmd {
        ProbCmd::Eppf { theta, sizes, partition, n } => {
            let p = CrpParams::new(*theta)?;
            let structures: Vec<Option<Partition>> = if let Some(text) = partition {
                vec![Some(text.parse()?)]
            } else if let Some(n) = n {
                enumerate_partitions(*n)?.into_iter().map(Some).collect()
            } else if !sizes.is_empty() {
                vec![None]
            } else {
                return Err(Failure::Usage("give --sizes, --partition or --n".into()));
            };
            let size_of = structures.first().and_then(|s| s.as_ref()).map_or(sizes.iter().sum(), Partition::n);
            let mut run = Run::new(cli, "prob eppf", params(&[("theta", *theta)]), size_of, 0);
            if !sizes.is_empty() {
                run.config.settings = settings(&[("sizes", join(sizes))]);
            }
            for s in structures {
                let block_sizes = s.as_ref().map_or_else(|| sizes.clone(), Partition::block_sizes);
                let v = eppf_crp(&p, &block_sizes)?;
                run.records.push(json!({
                    "structure": s.map(|s| s.to_string()),
                    "block_sizes": block_sizes,
                    "log_prob": v.log_prob,
                    "prob": v.prob(),
                }));
            }
            run
        }
        ProbCmd::Efpf { gamma, theta, n, sizes, allocation } => {
            let p = IbpParams::new(*gamma, *theta)?;
            let mut run = Run::new(cli, "prob efpf", params(&[("gamma", *gamma), ("theta", *theta)]), *n, 0);
            if let Some(text) = allocation {
                let f = FeatureAllocation::parse(text, *n)?;
                let sizes = f.block_sizes();
                run.config.settings = settings(&[("allocation", text.clone())]);
                run.records.push(json!({
                    "structure": f.to_string(),
                    "block_sizes": sizes,
                    "log_efpf": efpf_ibp(&p, *n, &sizes)?.log_prob,
                    "log_prob": ibp_allocation_log_prob(&p, &f)?.log_prob,
                }));
            } else {
                run.config.settings = settings(&[("sizes", join(sizes))]);
                let v = efpf_ibp(&p, *n, sizes)?;
                run.records.push(json!({"block_sizes": sizes, "log_efpf": v.log_prob, "efpf": v.prob()}));
            }
            run
        }
    })
}

fn check(cli: &Cli, cmd: &CheckCmd) -> CliResult<Run> {
    let seed = cli.seed;
    Ok(match *cmd {
        CheckCmd::Epf { candidate, theta, n_max, tolerance } => {
            let p = CrpParams::new(theta)?;
            let crp = |s: &[usize]| eppf_crp(&p, s).map(|v| v.prob()).unwrap_or(f64::NAN);
            let (name, report) = match candidate {
                Candidate::Crp => ("crp", eppf_validity_check(&crp, n_max, tolerance)?),
                Candidate::InconsistentExample => (
                    "inconsistent-example",
                    eppf_validity_check(&inconsistent_eppf_example, n_max, tolerance)?,
                ),
            };
            let mut run = Run::new(cli, "check epf", params(&[("theta", theta)]), n_max, 0);
            run.config.settings = settings(&[("candidate", name.to_string())]);
            run.config.tolerance = Some(tolerance);
            let worst = report
                .max_symmetry_error
                .max(report.max_normalization_error)
                .max(report.max_additivity_error);
            let mut outcome = Outcome::at_most(
                format!("{name} eppf symmetry, normalization and additivity"),
                worst,
                tolerance,
                serde_json::to_value(&report).expect("report serializes"),
            );
            outcome.passed = report.passed();
            run.outcomes(vec![outcome])
        }
        CheckCmd::Normalization { ref thetas, n_max, tolerance } => {
            let ns: Vec<usize> = (2..=n_max).collect();
            let mut run = Run::new(cli, "check normalization", BTreeMap::new(), n_max, 0);
            run.config.settings = settings(&[("thetas", join(thetas))]);
            run.config.tolerance = Some(tolerance);
            run.outcomes(vec![ex::eppf_normalization(thetas, &ns, tolerance)?])
        }
        CheckCmd::Prediction { ref thetas, n, tolerance } => {
            let mut run = Run::new(cli, "check prediction", BTreeMap::new(), n, 0);
            run.config.settings = settings(&[("thetas", join(thetas))]);
            run.config.tolerance = Some(tolerance);
            run.outcomes(vec![ex::prediction_round_trip(thetas, n, tolerance)?])
        }
        CheckCmd::Quadrature { ref thetas, ref betas, n, tolerance } => {
            let mut run = Run::new(cli, "check quadrature", BTreeMap::new(), n, 0);
            run.config.settings = settings(&[("thetas", join(thetas)), ("betas", join(betas))]);
            run.config.tolerance = Some(tolerance);
            run.outcomes(ex::quadrature_vs_closed_form(thetas, betas, n, tolerance)?)
        }
        CheckCmd::IbpCount { gamma, theta, n, reps, tolerance } => {
            let mut run = Run::new(cli, "check ibp-count", params(&[("gamma", gamma), ("theta", theta)]), n, reps);
            run.config.tolerance = Some(tolerance);
            run.outcomes(vec![ex::ibp_feature_count(gamma, theta, n, reps, seed, tolerance)?])
        }
        CheckCmd::EfpfSpot { reps } => {
            let run = Run::new(cli, "check efpf-spot", params(&[("gamma", 1.0), ("theta", 1.0)]), 2, reps);
            run.outcomes(vec![
                ex::efpf_spot_value(reps, seed, 3.0)?,
                ex::first_index_poisson(1.0, 1.0, reps, seed + 1, 0.01)?,
            ])
        }
        CheckCmd::Inference { reps } => {
            let run = Run::new(cli, "check inference", BTreeMap::new(), 0, reps);
            let mut outcomes = vec![ex::gibbs_conditional_brute_force(4, seed, 1e-10)?];
            outcomes.extend(ex::joint_consistency(reps, reps, seed, 3.0, 5.0)?);
            let seeds: Vec<u64> = (0..5).map(|s| seed + s).collect();
            outcomes.push(ex::crp_planted_recovery(&seeds, 200, 0.9)?);
            let seeds: Vec<u64> = (0..20).map(|s| seed + s).collect();
            outcomes.extend(ex::ibp_planted_recovery(&seeds, 300, 0.8, 0.1)?);
            run.outcomes(outcomes)
        }
    })
}

fn equiv(cli: &Cli, a: &EquivArgs) -> CliResult<Run> {
    let seed = cli.seed;
    let feature = matches!(a.pairing, Pairing::IbpSticks | Pairing::IbpRoundSticks);
    let n = a.n.unwrap_or(if feature { 3 } else { 4 });
    let (reps, tol) = match a.pairing {
        Pairing::CrpGem | Pairing::IbpSticks | Pairing::IbpRoundSticks => (100_000, 0.02),
        Pairing::CrpGammaCrm => (100_000, 0.03),
        Pairing::GammaFirstStick | Pairing::PolyaUrn => (10_000, 0.02),
        Pairing::CrpSelf => (100_000, 0.01),
    };
    let reps = a.reps.unwrap_or(reps);
    let tol = a.tolerance.unwrap_or(tol);
    let (outcome, name, p) = match a.pairing {
        Pairing::CrpGem => (ex::crp_vs_gem(a.theta, n, reps, seed, tol)?, "crp-gem", params(&[("theta", a.theta)])),
        Pairing::CrpGammaCrm => (
            ex::crp_vs_gamma_crm(a.theta, n, a.threshold, reps, seed, tol)?,
            "crp-gamma-crm",
            params(&[("theta", a.theta), ("threshold", a.threshold)]),
        ),
        Pairing::GammaFirstStick => (
            ex::gamma_first_stick_ks(a.theta, a.threshold, reps, seed, tol)?,
            "gamma-first-stick",
            params(&[("theta", a.theta), ("threshold", a.threshold)]),
        ),
        Pairing::IbpSticks => (
            ex::ibp_vs_sticks(a.gamma, a.theta, n, reps, seed, tol)?,
            "ibp-sticks",
            params(&[("gamma", a.gamma), ("theta", a.theta)]),
        ),
        Pairing::IbpRoundSticks => (
            ex::ibp_round_stick_ks(a.gamma, a.theta, a.round, reps, seed, tol)?,
            "ibp-round-sticks",
            params(&[("gamma", a.gamma), ("theta", a.theta), ("round", a.round as f64)]),
        ),
        Pairing::PolyaUrn => (
            ex::polya_urn_limit(a.theta, a.horizon, reps, seed, tol)?,
            "polya-urn",
            params(&[("theta", a.theta), ("horizon", a.horizon as f64)]),
        ),
        Pairing::CrpSelf => (
            ex::crp_self_equivalence(a.theta, n, reps, seed, tol)?,
            "crp-self",
            params(&[("theta", a.theta)]),
        ),
    };
    let mut run = Run::new(cli, "equiv", p, n, reps);
    run.config.settings = settings(&[("pairing", name.to_string())]);
    run.config.tolerance = Some(tol);
    Ok(run.outcomes(vec![outcome]))
}

fn read_rows(path: &PathBuf) -> CliResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Failure::Usage(format!("{}:{}: {msg}", path.display(), line_no + 1));
        let v: Value = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
        let row = match v {
            Value::Number(x) => vec![x.as_f64().ok_or_else(|| bad("not a finite number"))?],
            Value::Array(xs) => xs
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad("rows must hold numbers")))
                .collect::<CliResult<Vec<f64>>>()?,
            _ => return Err(bad("expected a number or an array of numbers")),
        };
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Failure::Usage(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn infer(cli: &Cli, cmd: &InferCmd) -> CliResult<Run> {
    let mut rng = stream_rng(cli.seed, 0);
    Ok(match cmd {
        InferCmd::Crp { data, theta, sweeps, prior } => {
            let rows = read_rows(data)?;
            if rows.iter().any(|r| r.len() != 1) {
                return Err(Failure::Usage("crp inference takes one number per row".into()));
            }
            let xs: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
            let p = CrpParams::new(*theta)?;
            let model = NormalInverseGamma::new(prior[0], prior[1], prior[2], prior[3])?;
            let mut run = Run::new(cli, "infer crp", params(&[("theta", *theta)]), xs.len(), *sweeps);
            run.config.settings = settings(&[("data", data.display().to_string()), ("prior", join(prior))]);
            let mut state = MixtureState::single_block(p, &model, &xs)?;
            let mut kept = Vec::new();
            let mut blocks = 0.0;
            for sweep in 0..*sweeps {
                crp_gibbs_sweep(&mut state, &xs, &model, &mut rng)?;
                run.records.push(json!({
                    "sweep": sweep,
                    "blocks": state.num_blocks(),
                    "log_joint": state.log_joint(&model)?,
                    "assignments": state.assignments(),
                }));
                if sweep >= sweeps / 2 {
                    kept.push(state.assignments().to_vec());
                    blocks += state.num_blocks() as f64;
                }
            }
            if !kept.is_empty() {
                let co = co_clustering(&kept);
                run.records.push(json!({
                    "summary": "posterior",
                    "kept_sweeps": kept.len(),
                    "mean_blocks": blocks / kept.len() as f64,
                    "point_estimate": least_squares_clustering(&kept),
                    "co_clustering": co,
                }));
            }
            run
        }
        InferCmd::Ibp { data, gamma, theta, sweeps, sigma_x, sigma_a, starts, start_sweeps } => {
            let rows = read_rows(data)?;
            let dim = rows[0].len();
            if rows.iter().any(|r| r.len() != dim) {
                return Err(Failure::Usage("all rows must have the same length".into()));
            }
            let p = IbpParams::new(*gamma, *theta)?;
            let model = LinearGaussian::new(*sigma_x, *sigma_a)?;
            let mut run = Run::new(
                cli,
                "infer ibp",
                params(&[
                    ("gamma", *gamma),
                    ("theta", *theta),
                    ("sigma_x", *sigma_x),
                    ("sigma_a", *sigma_a),
                    ("starts", *starts as f64),
                    ("start_sweeps", *start_sweeps as f64),
                ]),
                rows.len(),
                *sweeps,
            );
            run.config.settings = settings(&[("data", data.display().to_string())]);
            let mut state = if *start_sweeps > 0 {
                multistart(&p, &rows, &model, *starts, *start_sweeps, &mut rng)?
            } else {
                FeatureState::empty(p, rows.len(), dim)
            };
            let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
            let mut sums = vec![0.0; rows.len()];
            let mut kept = 0usize;
            for sweep in 0..*sweeps {
                ibp_gibbs_sweep(&mut state, &rows, &model, &mut rng)?;
                let row_sums = state.row_sums();
                run.records.push(json!({
                    "sweep": sweep,
                    "features": state.num_features(),
                    "log_joint": state.log_joint(&rows, &model)?,
                    "row_sums": row_sums,
                }));
                if sweep >= sweeps / 2 {
                    kept += 1;
                    *hist.entry(state.num_features()).or_default() += 1;
                    for (acc, s) in sums.iter_mut().zip(&row_sums) {
                        *acc += *s as f64;
                    }
                }
            }
            if kept > 0 {
                let mode = hist.iter().max_by_key(|&(k, c)| (*c, std::cmp::Reverse(*k))).map(|(k, _)| *k);
                let mean = hist.iter().map(|(k, c)| (*k * *c) as f64).sum::<f64>() / kept as f64;
                run.records.push(json!({
                    "summary": "posterior",
                    "kept_sweeps": kept,
                    "mean_features": mean,
                    "mode_features": mode,
                    "feature_count_histogram": hist.iter().map(|(k, c)| json!([k, c])).collect::<Vec<_>>(),
                    "mean_row_sums": sums.iter().map(|s| s / kept as f64).collect::<Vec<_>>(),
                    "features_last": state.features(),
                }));
            }
            run
        }
    })
}

fn quadrature(cli: &Cli, a: &QuadratureArgs) -> CliResult<Run> {
    let spec = a.levy.spec()?;
    let q = eppf_from_laplace(&spec, &a.sizes, a.tolerance)?;
    let n = a.sizes.iter().sum();
    let mut run = Run::new(cli, "eppf-quadrature", a.levy.params(), n, 0);
    run.config.settings = settings(&[("family", a.levy.family.name().into()), ("sizes", join(&a.sizes))]);
    run.config.tolerance = Some(a.tolerance);
    let closed = match a.levy.family {
        Family::Gamma => Some(eppf_crp(&CrpParams::new(a.levy.theta)?, &a.sizes)?.log_prob),
        Family::Beta => None,
    };
    run.records.push(json!({
        "block_sizes": a.sizes,
        "log_prob": q.value.log_prob,
        "log_error": q.log_error,
        "closed_form_log_prob": closed,
    }));
    Ok(run)
}

fn jumps(cli: &Cli, a: &JumpsArgs) -> CliResult<Run> {
    let spec = a.levy.spec()?;
    let truncation = match a.count {
        Some(k) => JumpTruncation::Count(k),
        None => JumpTruncation::Threshold(a.threshold),
    };
    let set = ferguson_klass_jumps(&spec, truncation, &mut stream_rng(cli.seed, 0))?;
    let mut p = a.levy.params();
    match a.count {
        Some(k) => p.insert("count".into(), k as f64),
        None => p.insert("threshold".into(), a.threshold),
    };
    let mut run = Run::new(cli, "jumps", p, 0, 1);
    run.config.settings = settings(&[("family", a.levy.family.name().into())]);
    for (i, w) in set.jumps().iter().enumerate() {
        run.records.push(json!({"index": i, "size": w}));
    }
    run.records.push(json!({
        "summary": "jumps",
        "count": set.jumps().len(),
        "total": set.total(),
        "truncation_threshold": set.truncation_threshold(),
        "omitted_mass_mean": set.omitted_mass_mean(),
    }));
    Ok(run)
}

fn draw(cli: &Cli, cmd: &DrawCmd) -> CliResult<Run> {
    let seed = cli.seed;
    Ok(match *cmd {
        DrawCmd::DpLabels { theta, beta, threshold, n, reps: Reps { reps } } => {
            let dp = nonempty_dirichlet_process(theta, beta, &UniformUnit, threshold, &mut stream_rng(seed, 0))?;
            dp_draw_labels(&dp, n, &mut stream_rng(seed, 0))?;
            let mut run = Run::new(
                cli,
                "draw dp-labels",
                params(&[("theta", theta), ("beta", beta), ("threshold", threshold)]),
                n,
                reps,
            );
            let draws = replicate(seed, 0, reps, |r| {
                let dp = nonempty_dirichlet_process(theta, beta, &UniformUnit, threshold, r).expect("checked above");
                dp_draw_labels(&dp, n, r).expect("checked above")
            });
            for (i, (labels, partition)) in draws.iter().enumerate() {
                let LabelSequence::Cluster(labels) = labels else { unreachable!("cluster labels") };
                run.records.push(json!({"rep": i, "labels": labels, "partition": partition.to_string()}));
            }
            run
        }
        DrawCmd::BernoulliProcess { gamma, theta, n, reps: Reps { reps } } => {
            let bp = beta_process(gamma, theta, &UniformUnit, n, &mut stream_rng(seed, 0))?;
            bernoulli_process_draw(&bp, n, &mut stream_rng(seed, 0))?;
            let mut run =
                Run::new(cli, "draw bernoulli-process", params(&[("gamma", gamma), ("theta", theta)]), n, reps);
            let draws = replicate(seed, 0, reps, |r| {
                let bp = beta_process(gamma, theta, &UniformUnit, n, r).expect("checked above");
                bernoulli_process_draw(&bp, n, r).expect("checked above")
            });
            for (i, (labels, allocation)) in draws.iter().enumerate() {
                let LabelSequence::Feature(labels) = labels else { unreachable!("feature labels") };
                run.records.push(json!({"rep": i, "labels": labels, "allocation": allocation.to_string()}));
            }
            run
        }
    })
}

fn run(cli: &Cli) -> CliResult<Run> {
    match &cli.command {
        Command::Sample(c) => sample(cli, c),
        Command::Prob(c) => prob(cli, c),
        Command::Check(c) => check(cli, c),
        Command::Equiv(a) => equiv(cli, a),
        Command::Infer(c) => infer(cli, c),
        Command::EppfQuadrature(a) => quadrature(cli, a),
        Command::Jumps(a) => jumps(cli, a),
        Command::Draw(c) => draw(cli, c),
    }
}

fn emit(cli: &Cli, run: &Run) -> io::Result<()> {
    match &cli.output {
        Some(path) => write_report(BufWriter::new(File::create(path)?), cli.format, &run.config, &run.records),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_report(&mut lock, cli.format, &run.config, &run.records)?;
            lock.flush()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|r| {
        emit(&cli, &r)?;
        Ok(r.passed)
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("csp: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("csp: {msg}");
            ExitCode::from(1)
        }
    }
}
