//! Seeded replicate runner and cross-representation equivalence checks.

pub mod enumerate;
pub mod stats;

use std::collections::BTreeMap;
use std::hash::Hash;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

pub use enumerate::{enumerate_partitions, MAX_ENUMERATION};
pub use stats::{empirical_tvd, histogram, ks_distance, tvd_to_reference};

use crate::error::Result;
use crate::rng::{stream_rng, StreamRng};

/// Version tag written into every report header.
pub const REPORT_SCHEMA: &str = "csp-report/1";

/// Replicates per RNG stream. Fixed so that results do not depend on the
/// number of worker threads.
pub const CHUNK: usize = 4096;

/// Runs `f` `reps` times in parallel. Replicates are grouped into chunks of
/// [`CHUNK`]; chunk `c` draws from stream `stream_base + c` under `seed`.
/// The output order is the replicate order, whatever the thread count.
pub fn replicate<T, F>(seed: u64, stream_base: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync,
{
    let chunks = reps.div_ceil(CHUNK);
    let nested: Vec<Vec<T>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, stream_base + c as u64);
            let len = CHUNK.min(reps - c * CHUNK);
            (0..len).map(|_| f(&mut rng)).collect()
        })
        .collect();
    nested.into_iter().flatten().collect()
}

/// Stream offset separating the two samplers of an equivalence check.
pub const SECOND_SAMPLER_STREAMS: u64 = 1 << 32;

/// The reproducible description of one harness run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub subcommand: String,
    pub params: BTreeMap<String, f64>,
    /// Non-numeric options such as a family or a list of block sizes.
    pub settings: BTreeMap<String, String>,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub output: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Tvd,
    Ks,
}

/// Outcome of comparing two samplers, or a sampler with a reference law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub sampler_a: String,
    pub sampler_b: String,
    pub statistic: Statistic,
    pub distance: f64,
    pub reps_a: usize,
    pub reps_b: usize,
    pub tolerance: f64,
    pub passed: bool,
    /// Wall time; not serialized so reports stay byte-reproducible.
    #[serde(skip)]
    pub runtime: Duration,
}

/// Empirical TVD between the laws of two samplers of canonical structures.
pub fn tvd_equivalence<K, A, B>(
    name_a: &str,
    sampler_a: A,
    name_b: &str,
    sampler_b: B,
    reps: usize,
    seed: u64,
    tolerance: f64,
) -> EquivalenceReport
where
    K: Hash + Eq + Send,
    A: Fn(&mut StreamRng) -> K + Sync,
    B: Fn(&mut StreamRng) -> K + Sync,
{
    let start = Instant::now();
    let a = histogram(replicate(seed, 0, reps, sampler_a));
    let b = histogram(replicate(seed, SECOND_SAMPLER_STREAMS, reps, sampler_b));
    let distance = empirical_tvd(&a, &b);
    EquivalenceReport {
        sampler_a: name_a.into(),
        sampler_b: name_b.into(),
        statistic: Statistic::Tvd,
        distance,
        reps_a: reps,
        reps_b: reps,
        tolerance,
        passed: distance <= tolerance,
        runtime: start.elapsed(),
    }
}

/// Empirical TVD of a sampler against an exact reference law.
pub fn tvd_reference_check<K, A>(
    name: &str,
    sampler: A,
    reference_name: &str,
    reference: impl IntoIterator<Item = (K, f64)>,
    reps: usize,
    seed: u64,
    tolerance: f64,
) -> EquivalenceReport
where
    K: Hash + Eq + Send,
    A: Fn(&mut StreamRng) -> K + Sync,
{
    let start = Instant::now();
    let counts = histogram(replicate(seed, 0, reps, sampler));
    let distance = tvd_to_reference(&counts, reference);
    EquivalenceReport {
        sampler_a: name.into(),
        sampler_b: reference_name.into(),
        statistic: Statistic::Tvd,
        distance,
        reps_a: reps,
        reps_b: 0,
        tolerance,
        passed: distance <= tolerance,
        runtime: start.elapsed(),
    }
}

/// KS distance of scalar draws against a reference CDF.
pub fn ks_check(
    name: &str,
    samples: &[f64],
    reference_name: &str,
    cdf: impl Fn(f64) -> f64,
    tolerance: f64,
) -> Result<EquivalenceReport> {
    let start = Instant::now();
    let distance = ks_distance(samples, cdf)?;
    Ok(EquivalenceReport {
        sampler_a: name.into(),
        sampler_b: reference_name.into(),
        statistic: Statistic::Ks,
        distance,
        reps_a: samples.len(),
        reps_b: 0,
        tolerance,
        passed: distance <= tolerance,
        runtime: start.elapsed(),
    })
}
