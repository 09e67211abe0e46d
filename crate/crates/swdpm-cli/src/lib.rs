//! Experiment harness around the market simulator: TOML experiment specs,
//! deterministic multi-seed execution of the learned and baseline pricing
//! methods, CSV/plot-data artifacts, and integrity re-checking of written
//! runs.

pub mod logs;
pub mod runner;
pub mod spec;
