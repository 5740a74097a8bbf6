//! Experiment harness for the boundary-driven facilitated exclusion
//! process: configuration, replica orchestration, result tables, and the
//! verification presets driven by the `fep` binary.

pub mod checks;
pub mod commands;
pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;
