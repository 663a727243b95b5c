use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vaoi_fl::cli_io;
use vaoi_fl::partitioner::SynthParams;

#[derive(Parser)]
#[command(name = "vaoi-fl", version, about = "Federated learning with version-age scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file.
    Run {
        #[arg(short, long)]
        config: PathBuf,
        /// Override a config value, e.g. `--set training.learning_rate=0.1`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (overrides the config and the environment).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the same experiment under several scheduling policies.
    Compare {
        #[arg(short, long)]
        config: PathBuf,
        /// Comma-separated list: vas, vas-linear, random, aoi, aoi-linear.
        #[arg(short, long, default_value = "vas,random")]
        policies: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw an SVG line chart from metrics files.
    Plot {
        /// `accuracy` or `avg_version_age`.
        #[arg(short, long, default_value = "avg_version_age")]
        series: String,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
    },
    /// Write a synthetic Gaussian-blob dataset as CSV.
    GenData {
        #[arg(long, default_value_t = 1000)]
        n_samples: usize,
        #[arg(long, default_value_t = 2)]
        n_features: usize,
        #[arg(long, default_value_t = 3)]
        n_classes: usize,
        #[arg(long, default_value_t = 1.0)]
        cluster_spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn with_out(mut overrides: Vec<String>, out: Option<PathBuf>) -> Vec<String> {
    if let Some(dir) = out {
        overrides.push(format!("output.dir={}", toml_string(&dir)));
    }
    overrides
}

fn toml_string(p: &std::path::Path) -> String {
    let s = p.display().to_string();
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(tracing::Level::WARN)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let code = match cli.command {
        Command::Run {
            config,
            overrides,
            out,
        } => cli_io::cmd_run(config, &with_out(overrides, out)),
        Command::Compare {
            config,
            policies,
            overrides,
            out,
        } => cli_io::cmd_compare(config, &policies, &with_out(overrides, out)),
        Command::Plot {
            series,
            out,
            metrics,
        } => cli_io::cmd_plot(&metrics, &series, out),
        Command::GenData {
            n_samples,
            n_features,
            n_classes,
            cluster_spread,
            seed,
            out,
        } => cli_io::cmd_gen_data(
            &SynthParams {
                n_samples,
                n_features,
                n_classes,
                cluster_spread,
                seed,
            },
            out,
        ),
    };
    ExitCode::from(code as u8)
}
