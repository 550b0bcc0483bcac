//! Exchangeable random partitions and feature allocations at every
//! representation level: probability functions and prediction rules,
//! stick-breaking and paintbox constructions, subordinators, and completely
//! random measures, with Gibbs samplers and an equivalence-testing harness.

pub mod allocation;
pub mod crm;
pub mod epf;
pub mod error;
pub mod harness;
pub mod infer;
pub mod numeric;
pub mod rng;
pub mod sticks;
pub mod subord;

pub use allocation::{FeatureAllocation, LabelSequence, OrderedFeatureAllocation, Partition};
pub use error::{Error, Result};
