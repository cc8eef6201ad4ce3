//! Experiment orchestration and the review service on top of `topicbench`.

pub mod agreement;
pub mod api;
pub mod config;
pub mod experiment;
pub mod provider_http;
pub mod server;
pub mod store;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentError, ExperimentReport, RunOptions};
pub use store::Store;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/workbench.md")]
    mod workbench {}
}
