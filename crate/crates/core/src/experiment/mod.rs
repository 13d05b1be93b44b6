//! Configuration, run orchestration, summaries, plots and run comparison.

mod compare;
mod config;
mod plot;
mod run;

pub use compare::{compare_runs, convergence_round, training_alignment, Comparison, TrainingAlignment};
pub use config::{load_config, parse_config, write_config, RunConfig};
pub use plot::{emit_plots, render_line_chart, Series};
pub use run::{run_experiment, summarize, Mode, RunSummary, Summary};
