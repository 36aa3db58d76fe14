//! Library side of the `dcrbm` command-line tool.

pub mod dataset;
pub mod evaluate;
pub mod experiment;
pub mod failure;
pub mod oracle_suite;
pub mod spec;
