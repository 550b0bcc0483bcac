//! Harness behind the `csp` binary: report emission and the named checks
//! that the `check` and `equiv` subcommands run.

pub mod experiments;
pub mod report;
