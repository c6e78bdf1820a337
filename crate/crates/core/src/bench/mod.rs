//! Declarative benchmark runs, score normalization and reports.

mod config;
mod report;
mod run;

pub use config::{
    AgentName, AgentSpec, BenchConfig, BenchGrid, DatasetRecipe, DatasetSource, GridVariant, OutputPaths, RecipeFile,
    ReferenceConfig,
};
pub use report::{aggregate, bandit_report, emit_report, format_cell, Aggregate, ReportFormat};
pub use run::{
    append_results, build_dataset, compute_reference_pair, plan, read_results, run_benchmark, run_job, BenchCache,
    BenchOutcome, ReferencePair, RunFailure, RunJob, RunResult, RESULTS_HEADER,
};

use crate::error::{Error, Result};

/// `100 (raw - random) / (expert - random)`; not clipped.
pub fn normalize_score(raw: f64, random_ref: f64, expert_ref: f64) -> Result<f64> {
    if !(expert_ref > random_ref) {
        return Err(Error::BadReferences { random: random_ref, expert: expert_ref });
    }
    Ok(100.0 * (raw - random_ref) / (expert_ref - random_ref))
}
