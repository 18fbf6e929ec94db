//! Scenario runner for the Wiener chaos solver.
//!
//! This crate holds everything that needs `std`: the TOML configuration
//! layer, CSV/JSON output, a rayon thread pool behind the core
//! [`wce_core::Executor`] trait, the scenario pipeline and the acceptance
//! checks driven by `wce verify`.

pub mod config;
pub mod io;
pub mod parallel;
pub mod scenario;
pub mod verify;

pub use wce_core as core;
