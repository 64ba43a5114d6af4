//! Command-line harness around `slicebench-core`: JSON scenarios, CSV
//! output, a thread-pool executor, sweeps and the oracle suite.

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod exec;
pub mod experiment;
pub mod oracle_suite;
pub mod output;
