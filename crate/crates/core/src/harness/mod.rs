//! Experiment harness: configuration, checkpoints, metrics, pipelines and
//! plots used by the command-line tool.

pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod pipeline;
pub mod plot;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use config::RunConfig;
pub use metrics::{
    metrics_to_csv, parse_metrics, read_metrics, write_metrics, MetricsRow, METRICS_HEADER,
};
pub use pipeline::{
    aggregate_csv, evaluate, evaluate_uniform, imitate, iterations_to_csv, normalized_score,
    record_demos, sweep, train_expert, EvalSummary, RunOutput, SweepReport, AGGREGATE_HEADER,
    ITERATIONS_HEADER,
};
pub use plot::{aggregate, plot_runs, render_svg, run_label, Series};
