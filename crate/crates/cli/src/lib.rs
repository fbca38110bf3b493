//! IO companion for the grasp-affordance reasoning core: dataset manifests
//! and synthetic fixtures, pipeline training, model files, the evaluation
//! harness, and the `afford` command-line interface.

pub mod cli;
pub mod config;
pub mod datasets;
pub mod eval;
pub mod model_io;
pub mod pipeline;

pub use config::RunConfig;
