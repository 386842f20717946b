//! Experiment configuration, sweeps, result files and reporting.

mod accounting;
mod config;
mod plot;
mod sweep;

pub use accounting::{report_accounting, AccountingExpectations, AccountingLine, AccountingReport};
pub use config::{DatasetSource, EncoderConfig, ExperimentConfig};
pub use plot::{bar_groups, emit_plots, render_svg, Bar, BarGroup, Metric, PLOT_HEIGHT};
pub use sweep::{
    read_results, run_experiment, run_id, run_sweep, summary_markdown, write_results, ResultRow, SweepAxes,
    SweepOutcome, SweepSpec, RESULT_COLUMNS,
};
