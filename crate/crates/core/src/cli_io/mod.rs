//! Config files, metrics persistence, charts and the subcommands built on them.

mod commands;
pub mod config;
pub mod metrics;
pub mod plot;

pub use commands::{
    cmd_compare, cmd_gen_data, cmd_plot, cmd_run, compare, gen_data, parse_policies, plot, run,
    CompareOutput, RunOutput, MERGED_FILE, METRICS_FILE, RECORD_FILE, SNAPSHOT_FILE,
};
pub use config::{ConfigFile, OUT_DIR_ENV};
pub use metrics::{read_metrics, write_metrics, MetricsRow};
pub use plot::Series;
