//! Configuration, verification suite and artifact commands behind the `s4gauge` binary.

pub mod commands;
pub mod config;
pub mod report;
pub mod suite;
