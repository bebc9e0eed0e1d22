//! Declarative scenarios: loading, execution, logs and summary metrics.

mod config;
mod output;
mod run;

pub use config::{
    builtin, builtin_names, load_scenario, parse_angle, BodySpec, ChartSpec, ContactSpec, Disturbance,
    DisturbanceKind, IntegratorSpec, Mode, OutputSpec, Scenario, BUILTINS, DEFAULT_THRESHOLD,
};
pub use output::{csv_header, csv_line, resolve_output_dir, write_csv, write_outputs, OUT_DIR_ENV};
pub use run::{
    initial_slips, initial_state, run, ContactMetrics, CorollaryMetrics, ForceMetrics, LogRow, RunOutput,
    SummaryMetrics, TrajectoryLog, RELATIVE_REJECTION_LEVEL,
};
