use std::path::{Path, PathBuf};

use super::config::{ConfigFile, OutputFormat};
use super::metrics::{read_metrics, write_metrics, MetricsRow};
use super::plot::{mean_lines, render_svg, Series};
use crate::error::{Error, Result};
use crate::orchestrator::{compare_policies, run_experiment, PolicyChoice, RunRecord};
use crate::partitioner::{synth_classification, write_csv_dataset, SynthParams};

pub const METRICS_FILE: &str = "metrics.csv";
pub const SNAPSHOT_FILE: &str = "config.snapshot.toml";
pub const RECORD_FILE: &str = "run.json";
pub const MERGED_FILE: &str = "metrics-merged.csv";

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub metrics: PathBuf,
    pub snapshot: PathBuf,
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub dir: PathBuf,
    pub per_policy: Vec<PathBuf>,
    pub merged: PathBuf,
    pub snapshot: PathBuf,
}

fn rows_of(record: &RunRecord, label: &str) -> Vec<MetricsRow> {
    record
        .trials
        .iter()
        .enumerate()
        .flat_map(|(k, trial)| {
            trial.iter().map(move |m| MetricsRow {
                trial: k as u64,
                policy: label.to_string(),
                metrics: m.clone(),
            })
        })
        .collect()
}

fn prepare_dir(cfg: &ConfigFile) -> Result<(PathBuf, PathBuf)> {
    let dir = cfg.output.dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let snapshot = dir.join(SNAPSHOT_FILE);
    std::fs::write(&snapshot, cfg.to_toml_string()?).map_err(|e| Error::io(&snapshot, e))?;
    Ok((dir, snapshot))
}

fn write_record(path: &Path, cfg: &ConfigFile, label: &str, record: &RunRecord) -> Result<()> {
    let doc = serde_json::json!({
        "config": cfg,
        "policy": label,
        "trials": record.trials,
        "mean": record.mean,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Other(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Runs the experiment described by `config_path` and writes the metrics and
/// a resolved config snapshot into the output directory.
pub fn run(config_path: impl AsRef<Path>, overrides: &[String]) -> Result<RunOutput> {
    let cfg = ConfigFile::load(config_path, overrides)?.resolved();
    let exp = cfg.experiment_config()?;
    let label = PolicyChoice {
        policy: exp.scheduler.policy,
        h_kind: exp.scheduler.h_kind,
    }
    .label();
    let (dir, snapshot) = prepare_dir(&cfg)?;
    let record = run_experiment(&exp)?;
    let metrics = dir.join(METRICS_FILE);
    write_metrics(&metrics, &rows_of(&record, &label))?;
    if cfg.output.format == OutputFormat::Json {
        write_record(&dir.join(RECORD_FILE), &cfg, &label, &record)?;
    }
    Ok(RunOutput {
        dir,
        metrics,
        snapshot,
    })
}

pub fn parse_policies(list: &str) -> Result<Vec<PolicyChoice>> {
    let choices = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(PolicyChoice::parse)
        .collect::<Result<Vec<_>>>()?;
    if choices.is_empty() {
        return Err(Error::config("policies", "at least one policy is required"));
    }
    let mut labels: Vec<String> = choices.iter().map(|c| c.label()).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::config("policies", "duplicate policy"));
    }
    Ok(choices)
}

/// Runs the experiment once per policy, writing one metrics file per policy
/// and a merged file ordered by trial, round, then policy list order.
pub fn compare(
    config_path: impl AsRef<Path>,
    policies: &str,
    overrides: &[String],
) -> Result<CompareOutput> {
    let choices = parse_policies(policies)?;
    let cfg = ConfigFile::load(config_path, overrides)?.resolved();
    let exp = cfg.experiment_config()?;
    let (dir, snapshot) = prepare_dir(&cfg)?;
    let comparison = compare_policies(&exp, &choices)?;

    let mut per_policy = Vec::new();
    let mut all_rows = Vec::new();
    for (label, record) in comparison.labels.iter().zip(&comparison.records) {
        let rows = rows_of(record, label);
        let path = dir.join(format!("metrics-{label}.csv"));
        write_metrics(&path, &rows)?;
        if cfg.output.format == OutputFormat::Json {
            write_record(&dir.join(format!("run-{label}.json")), &cfg, label, record)?;
        }
        per_policy.push(path);
        all_rows.push(rows);
    }

    // All records share trials × rounds, so interleave row by row.
    let len = all_rows[0].len();
    if all_rows.iter().any(|r| r.len() != len) {
        return Err(Error::Other("policy runs are not aligned".into()));
    }
    let merged_rows: Vec<MetricsRow> = (0..len)
        .flat_map(|i| all_rows.iter().map(move |rows| rows[i].clone()))
        .collect();
    let merged = dir.join(MERGED_FILE);
    write_metrics(&merged, &merged_rows)?;

    Ok(CompareOutput {
        dir,
        per_policy,
        merged,
        snapshot,
    })
}

/// Renders the cross-trial mean of `series` for every policy found in the
/// given metrics files.
pub fn plot(metrics_paths: &[PathBuf], series: Series, out_path: impl AsRef<Path>) -> Result<()> {
    if metrics_paths.is_empty() {
        return Err(Error::NoData);
    }
    let mut rows = Vec::new();
    for p in metrics_paths {
        rows.extend(read_metrics(p)?);
    }
    if rows.is_empty() {
        return Err(Error::NoData);
    }
    let svg = render_svg(&mean_lines(&rows, series), series)?;
    let out = out_path.as_ref();
    std::fs::write(out, svg).map_err(|e| Error::io(out, e))
}

pub fn gen_data(params: &SynthParams, out_path: impl AsRef<Path>) -> Result<()> {
    let data = synth_classification(params)?;
    write_csv_dataset(&data, out_path)
}

fn report<T>(result: Result<T>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn cmd_run(config_path: impl AsRef<Path>, overrides: &[String]) -> i32 {
    report(run(config_path, overrides).map(|out| {
        println!("wrote {}", out.metrics.display());
    }))
}

pub fn cmd_compare(config_path: impl AsRef<Path>, policies: &str, overrides: &[String]) -> i32 {
    report(compare(config_path, policies, overrides).map(|out| {
        for p in &out.per_policy {
            println!("wrote {}", p.display());
        }
        println!("wrote {}", out.merged.display());
    }))
}

pub fn cmd_plot(metrics_paths: &[PathBuf], series: &str, out_path: impl AsRef<Path>) -> i32 {
    let out_path = out_path.as_ref();
    report(Series::parse(series).and_then(|s| plot(metrics_paths, s, out_path)))
}

pub fn cmd_gen_data(params: &SynthParams, out_path: impl AsRef<Path>) -> i32 {
    report(gen_data(params, out_path))
}
