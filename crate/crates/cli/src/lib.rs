//! Experiment harness around the core simulator: plans, runs, artifacts,
//! CSV outputs, and reports. The `vecell` binary is a thin front end over
//! these modules.

pub mod artifact;
pub mod config;
pub mod csvout;
pub mod manifest;
pub mod report;
pub mod runner;
