//! Command-line runner for pseudo-label PINN experiments.

pub mod config;
pub mod run;
