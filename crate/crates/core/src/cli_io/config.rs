//! TOML experiment configuration.
//!
//! Every section and key is optional and falls back to a default; unknown keys
//! are rejected. The fully resolved document is written next to each run's
//! metrics so the run can be repeated from it alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl_core::{BatchSize, Hyperparams, ModelKind};
use crate::orchestrator::{
    DataSource, ExperimentConfig, ModelSettings, SchedulerSettings, ThresholdRule,
};
use crate::partitioner::SynthParams;
use crate::scheduler::{HKind, Policy};

/// Environment variable that overrides `output.dir`.
pub const OUT_DIR_ENV: &str = "VAOI_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub model: ModelSection,
    pub training: TrainingSection,
    pub data: DataSection,
    pub partition: PartitionSection,
    pub scheduler: SchedulerSection,
    pub experiment: ExperimentSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    pub init_scale: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::LogisticRegression,
            hidden_dim: None,
            init_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullBatch {
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BatchSetting {
    Size(usize),
    Named(FullBatch),
}

impl From<BatchSetting> for BatchSize {
    fn from(b: BatchSetting) -> Self {
        match b {
            BatchSetting::Size(n) => BatchSize::Size(n),
            BatchSetting::Named(FullBatch::Full) => BatchSize::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub local_steps: usize,
    pub batch_size: BatchSetting,
}

impl Default for TrainingSection {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            local_steps: 5,
            batch_size: BatchSetting::Size(32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub source: SourceKind,
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub cluster_spread: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub label_column: String,
    pub test_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            source: SourceKind::Synthetic,
            n_samples: 20_000,
            n_features: 20,
            n_classes: 10,
            cluster_spread: 1.0,
            seed: 0,
            path: None,
            label_column: "label".into(),
            test_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionSection {
    pub num_clients: usize,
    pub concentration: f64,
}

impl Default for PartitionSection {
    fn default() -> Self {
        Self {
            num_clients: 100,
            concentration: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SchedulerSection {
    pub policy: Policy,
    pub h_kind: HKind,
    /// Absolute `τ`; takes precedence over `threshold_fraction`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub threshold_fraction: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub num_selected: Option<usize>,
}

impl Default for SchedulerSection {
    fn default() -> Self {
        Self {
            policy: Policy::Vas,
            h_kind: HKind::Exp,
            threshold: None,
            threshold_fraction: 0.05,
            num_selected: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub rounds: u64,
    pub eval_every: u64,
    pub trials: u64,
    pub master_seed: u64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            rounds: 300,
            eval_every: 1,
            trials: 3,
            master_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    /// Metrics CSV only.
    Csv,
    /// Metrics CSV plus a JSON dump of the full run record.
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("runs/default"),
            format: OutputFormat::Csv,
        }
    }
}

fn toml_error(e: toml::de::Error) -> Error {
    let message = e.message().to_string();
    let key = message
        .strip_prefix("unknown field `")
        .and_then(|rest| rest.split('`').next())
        .map(str::to_string)
        .unwrap_or_else(|| "<config>".into());
    Error::config(key, e.to_string().trim_end())
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `section.key=value` overrides to a raw document.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::config(spec, "override must look like `section.key=value`"))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::config(path, "empty key in override"));
    }
    let (last, parents) = keys.split_last().expect("split yields at least one key");
    let mut cursor = table;
    for key in parents {
        let entry = cursor
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(*key, "is not a section"))?;
    }
    cursor.insert(last.to_string(), parse_override_value(raw.trim()));
    Ok(())
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_parts(text, &[], None)
    }

    fn from_parts(text: &str, overrides: &[String], out_dir: Option<&Path>) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(toml_error)?;
        if let Some(dir) = out_dir {
            let value = format!("output.dir={}", toml::Value::String(dir.display().to_string()));
            apply_override(&mut table, &value)?;
        }
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let text = toml::to_string(&table).map_err(|e| Error::Other(e.to_string()))?;
        toml::from_str(&text).map_err(toml_error)
    }

    /// Reads `path`, then applies (in increasing precedence) the output
    /// directory environment variable and `overrides`. A relative CSV data
    /// path is resolved against the config file's directory.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let env_dir = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
        let mut cfg = Self::from_parts(&text, overrides, env_dir.as_deref())?;
        if let Some(data_path) = &cfg.data.path {
            if data_path.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.data.path = Some(base.join(data_path));
            }
        }
        Ok(cfg)
    }

    /// Copy with derived defaults filled in, as written to the run snapshot.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.scheduler.num_selected = Some(
            self.scheduler
                .num_selected
                .unwrap_or_else(|| self.partition.num_clients.div_ceil(10)),
        );
        out
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Other(e.to_string()))
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let data = match self.data.source {
            SourceKind::Synthetic => DataSource::Synthetic(SynthParams {
                n_samples: self.data.n_samples,
                n_features: self.data.n_features,
                n_classes: self.data.n_classes,
                cluster_spread: self.data.cluster_spread,
                seed: self.data.seed,
            }),
            SourceKind::Csv => DataSource::Csv {
                path: self
                    .data
                    .path
                    .clone()
                    .ok_or_else(|| Error::config("data.path", "required when source = \"csv\""))?,
                label_column: self.data.label_column.clone(),
            },
        };
        if self.model.kind == ModelKind::Mlp && self.model.hidden_dim.is_none() {
            return Err(Error::config("model.hidden_dim", "required for kind = \"mlp\""));
        }
        let threshold = match self.scheduler.threshold {
            Some(t) if !(t.is_finite() && t > 0.0) => {
                return Err(Error::config("scheduler.threshold", "must be positive"))
            }
            Some(t) => ThresholdRule::Absolute(t),
            None if self.scheduler.threshold_fraction.is_nan() || self.scheduler.threshold_fraction <= 0.0 => {
                return Err(Error::config("scheduler.threshold_fraction", "must be positive"))
            }
            None => ThresholdRule::NormFraction(self.scheduler.threshold_fraction),
        };
        let cfg = ExperimentConfig {
            model: ModelSettings {
                kind: self.model.kind,
                hidden_dim: self.model.hidden_dim,
                init_scale: self.model.init_scale,
            },
            hyperparams: Hyperparams {
                learning_rate: self.training.learning_rate,
                local_steps: self.training.local_steps,
                batch_size: self.training.batch_size.into(),
            },
            data,
            test_fraction: self.data.test_fraction,
            num_clients: self.partition.num_clients,
            concentration: self.partition.concentration,
            scheduler: SchedulerSettings {
                policy: self.scheduler.policy,
                h_kind: self.scheduler.h_kind,
                threshold,
                num_selected: self.scheduler.num_selected,
            },
            rounds: self.experiment.rounds,
            eval_every: self.experiment.eval_every,
            trials: self.experiment.trials,
            master_seed: self.experiment.master_seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
