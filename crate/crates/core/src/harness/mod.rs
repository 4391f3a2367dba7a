//! Experiment configuration, orchestration and artifacts.

pub mod config;
pub mod output;
pub mod run;
pub mod verdict;

pub use config::{parse_pairs, ExperimentConfig, Mode};
pub use output::{emit_csv, emit_plot, CSV_HEADER};
pub use run::{run_experiment, simulate, RunArtifacts};
pub use verdict::{verdict, Status, Verdict};
