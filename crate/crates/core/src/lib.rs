//! Production planning for district heating systems as a time-expanded,
//! scenario-expanded minimum-cost flow problem with unit commitment.
//!
//! The pipeline is: [`config::SystemSpec`] (TOML) and series data, then
//! [`scenario`] generation, [`network::FlowNetwork`] expansion, the MILP from
//! [`model::build_model`], and [`schedule::solve`]. [`evaluate`] and
//! [`rolling`] build on that for policy evaluation and receding-horizon runs.

pub mod config;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod network;
pub mod parallel;
pub mod rolling;
pub mod scenario;
pub mod schedule;
pub mod series;

pub use error::{Error, Result};
pub use heatflow_solver as solver;
