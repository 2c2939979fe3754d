//! Experiment runner behind the `augdfa` binary.

pub mod config;
pub mod output;
pub mod pso;
pub mod run;
pub mod sweep;
