//! Benchmark harness: synthetic instances, seeded experiment runs,
//! statistics and result export.

mod export;
mod generate;
mod report;
mod run;
mod stats;

use std::path::Path;

pub use export::{
    export_results, summarize, SummaryRow, RUNS_CSV, S2_DISPLAY_SCALE, SUMMARY_CSV, SUMMARY_JSON, TRAJECTORIES_CSV,
};
pub use generate::{calibrate_capacity, generate_instance, Shape, UnknownShape, AREA_SIDE_M, PAUSE_WINDOWS};
pub use report::{solution_report, SolutionReport};
pub use run::{
    load_problem, run_experiment, run_one, solve, Algorithm, ExperimentPlan, InstanceRef, RunRecord, SolveOptions,
    SolveOutcome,
};
pub use stats::{average_ranks, mean_std, wilcoxon_signed_rank, StatsError, WilcoxonResult, EXACT_MAX_N, MIN_PAIRS};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    BudgetExceeded(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 budget exceeded, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Invalid(_) => 2,
            HarnessError::BudgetExceeded(_) => 3,
            HarnessError::Io { .. } => 4,
        }
    }
}
