//! Configuration, orchestration and artifact output for the `catbranch` command.

pub mod config;
pub mod output;
pub mod plot;
pub mod runner;
