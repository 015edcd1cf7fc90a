//! Scenario documents, calibrated case studies, policies and reports.

mod calibration;
mod generate;
mod policy;
mod report;
mod repro;
mod scenario;

pub use calibration::{
    benchmark_microservice, harness_placement, paper_scenarios, text_scenario, video_scenario,
    ReferenceRow, TEXT_REFERENCE, VIDEO_REFERENCE,
};
pub use generate::{random_scenario, GeneratorConfig};
pub use policy::{
    compare, distribution, round_counts, round_percentages, run_all, run_policy, DistributionCell,
    MicroserviceRow, Policy, PolicyReport, Saving, SolveOptions,
};
pub use report::{emit, render, OutputFormat, RunReport, CSV_COLUMNS};
pub use repro::{paper_repro, Check, ReproOutcome};
pub use scenario::{load_scenario, load_scenario_file, Scenario, ScenarioDoc};

use thiserror::Error;

use crate::cost::CostError;
use crate::game::GameError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("scenario has no registry `{0}`")]
    UnknownRegistry(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
