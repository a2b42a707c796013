//! Generating scenarios, simulated samples and replication studies.

mod generate;
mod scenario;
mod study;

pub use generate::{categorize, generate_dataset, sample_rows, true_posterior, Dataset};
pub use scenario::{scenario_preset, ScenarioSpec, SCENARIO_NAMES};
pub use study::{
    quantile, replicate_study, summarize, ReplicateFailure, ReplicateOutcome, StudyModel,
    StudyTable, SummaryRow, STUDY_COLUMNS,
};
