//! Round loop and multi-trial experiment driver.
//!
//! A round is: schedule against the current global model, train the selected
//! clients from that model (in parallel), record their uploads, aggregate in
//! ascending client-id order, then report metrics using the post-round ages.
//!
//! Trial `k` uses seed `master_seed + k`; every random stream inside the trial
//! (partition, model init, scheduler, per-client training shuffles) is derived
//! from it, so a run is a pure function of its config.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use crate::aggregator::{fedavg_aggregate, AggregationEntry};
use crate::error::{Error, Result};
use crate::fl_core::{
    evaluate, init_model, local_update, Dataset, Hyperparams, ModelKind, ModelSpec,
    ParameterVector,
};
use crate::partitioner::{
    dirichlet_partition, load_csv_dataset, synth_classification, DirichletConfig, SynthParams,
};
use crate::scheduler::{schedule, HKind, Policy, SchedulerConfig, SelectionOutcome, VersionAgeState};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthParams),
    Csv { path: PathBuf, label_column: String },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdRule {
    Absolute(f64),
    /// Fraction of the L1 norm of the initial global model.
    NormFraction(f64),
}

impl ThresholdRule {
    pub fn resolve(self, initial_global: &ParameterVector) -> Result<f64> {
        let tau = match self {
            ThresholdRule::Absolute(t) => t,
            ThresholdRule::NormFraction(f) => f * initial_global.iter().map(|v| v.abs()).sum::<f64>(),
        };
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::config(
                "scheduler.threshold",
                format!("resolved staleness threshold must be positive, got {tau}"),
            ));
        }
        Ok(tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub kind: ModelKind,
    pub hidden_dim: Option<usize>,
    pub init_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulerSettings {
    pub policy: Policy,
    pub h_kind: HKind,
    pub threshold: ThresholdRule,
    /// Defaults to `⌈0.1·N⌉`.
    pub num_selected: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSettings,
    pub hyperparams: Hyperparams,
    pub data: DataSource,
    /// Fraction of the loaded data held out as the global test set.
    pub test_fraction: f64,
    pub num_clients: usize,
    pub concentration: f64,
    pub scheduler: SchedulerSettings,
    pub rounds: u64,
    pub eval_every: u64,
    pub trials: u64,
    pub master_seed: u64,
}

impl ExperimentConfig {
    pub fn num_selected(&self) -> usize {
        self.scheduler
            .num_selected
            .unwrap_or_else(|| self.num_clients.div_ceil(10))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::config("experiment.rounds", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(Error::config("experiment.trials", "must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("experiment.eval_every", "must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("data.test_fraction", "must lie strictly between 0 and 1"));
        }
        if self.num_clients == 0 {
            return Err(Error::config("partition.num_clients", "must be at least 1"));
        }
        if !(self.concentration.is_finite() && self.concentration > 0.0) {
            return Err(Error::config("partition.concentration", "must be positive"));
        }
        let m = self.num_selected();
        if m == 0 || m > self.num_clients {
            return Err(Error::config(
                "scheduler.num_selected",
                format!("must lie in 1..={}, got {m}", self.num_clients),
            ));
        }
        self.hyperparams
            .validate()
            .map_err(|e| Error::config("training", e.to_string()))
    }
}

/// Loaded data, shared by every trial and policy of an experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: Dataset,
    pub test: Dataset,
    pub num_classes: usize,
}

/// Loads the configured data and holds out a test set. The split depends only
/// on `master_seed`, not on the trial.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    cfg.validate()?;
    let full = match &cfg.data {
        DataSource::Synthetic(p) => synth_classification(p)?,
        DataSource::Csv { path, label_column } => load_csv_dataset(path, label_column)?,
    };
    let n = full.len();
    let n_test = ((n as f64) * cfg.test_fraction).round() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::config(
            "data.test_fraction",
            format!("leaves an empty train or test split of {n} samples"),
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(
        order.as_mut_slice(),
        &mut seed::rng(seed::stream_seed(cfg.master_seed, Stream::TestSplit)),
    );
    let (test_idx, train_idx) = order.split_at(n_test);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(PreparedData {
        train: full.subset(&train_idx),
        test: full.subset(&test_idx),
        num_classes: full.num_classes(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: u64,
    /// `None` on rounds skipped by `eval_every`.
    pub test_accuracy: Option<f64>,
    /// Sample-weighted training loss `Σ n_i/n · f_i(w_g)`.
    pub global_loss: Option<f64>,
    pub avg_version_age: f64,
    pub max_version_age: u64,
    pub selected: Vec<usize>,
}

/// Everything needed to run rounds of one trial.
#[derive(Debug, Clone)]
pub struct Federation {
    pub spec: ModelSpec,
    pub hyperparams: Hyperparams,
    pub clients: Vec<Dataset>,
    pub train: Dataset,
    pub test: Dataset,
    pub scheduler: SchedulerConfig,
    pub trial_seed: u64,
    pub eval_every: u64,
    pub rounds: u64,
}

#[derive(Debug, Clone)]
pub struct RoundOutput {
    pub global: ParameterVector,
    pub state: VersionAgeState,
    pub outcome: SelectionOutcome,
    pub metrics: RoundMetrics,
}

impl Federation {
    /// Partitions the data and initializes the model for trial `trial_seed`.
    /// Returns the federation and the initial global model.
    pub fn build(
        cfg: &ExperimentConfig,
        data: &PreparedData,
        trial_seed: u64,
    ) -> Result<(Self, ParameterVector)> {
        let plan = dirichlet_partition(
            data.train.labels(),
            &DirichletConfig {
                num_clients: cfg.num_clients,
                concentration: cfg.concentration,
                seed: seed::stream_seed(trial_seed, Stream::Partition),
            },
        )?;
        let clients = plan.assignments().iter().map(|idx| data.train.subset(idx)).collect();
        let spec = ModelSpec {
            kind: cfg.model.kind,
            input_dim: data.train.num_features(),
            num_classes: data.num_classes,
            hidden_dim: cfg.model.hidden_dim,
            init_scale: cfg.model.init_scale,
            init_seed: seed::stream_seed(trial_seed, Stream::ModelInit),
        };
        let global = init_model(&spec)?;
        let scheduler = SchedulerConfig {
            policy: cfg.scheduler.policy,
            h_kind: cfg.scheduler.h_kind,
            threshold: cfg.scheduler.threshold.resolve(&global)?,
            num_selected: cfg.num_selected(),
            rng_seed: seed::stream_seed(trial_seed, Stream::Scheduler),
        };
        Ok((
            Self {
                spec,
                hyperparams: cfg.hyperparams,
                clients,
                train: data.train.clone(),
                test: data.test.clone(),
                scheduler,
                trial_seed,
                eval_every: cfg.eval_every,
                rounds: cfg.rounds,
            },
            global,
        ))
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    fn should_evaluate(&self, round: u64) -> bool {
        round.is_multiple_of(self.eval_every) || round == self.rounds
    }

    /// Runs round `state.round + 1`.
    pub fn run_round(
        &self,
        state: &VersionAgeState,
        global: &ParameterVector,
    ) -> Result<RoundOutput> {
        let round = state.round + 1;
        let outcome = schedule(state, global, &self.scheduler)?;

        let uploads: Vec<(usize, ParameterVector)> = outcome
            .selected
            .par_iter()
            .map(|&id| {
                let shuffle_seed = seed::training_seed(self.trial_seed, round, id);
                local_update(global, &self.spec, &self.clients[id], &self.hyperparams, shuffle_seed)
                    .map(|w| (id, w))
            })
            .collect::<Result<_>>()?;

        let entries: Vec<AggregationEntry> = uploads
            .iter()
            .map(|(id, w)| AggregationEntry {
                client_id: *id,
                params: w.clone(),
                num_samples: self.clients[*id].len(),
            })
            .collect();
        let new_global = fedavg_aggregate(&entries)?;

        let mut new_state = state.clone();
        new_state.advance(&outcome, uploads)?;

        let (test_accuracy, global_loss) = if self.should_evaluate(round) {
            let test = evaluate(&new_global, &self.spec, &self.test)?;
            let train = evaluate(&new_global, &self.spec, &self.train)?;
            (Some(test.accuracy), Some(train.loss))
        } else {
            (None, None)
        };
        let n = new_state.num_clients() as f64;
        let metrics = RoundMetrics {
            round,
            test_accuracy,
            global_loss,
            avg_version_age: new_state.ages.iter().sum::<u64>() as f64 / n,
            max_version_age: new_state.ages.iter().copied().max().unwrap_or(0),
            selected: outcome.selected.clone(),
        };
        tracing::debug!(
            round,
            avg_age = metrics.avg_version_age,
            accuracy = ?metrics.test_accuracy,
            "round complete"
        );
        Ok(RoundOutput {
            global: new_global,
            state: new_state,
            outcome,
            metrics,
        })
    }

    /// Runs all rounds from `initial`, returning the per-round metrics and the
    /// sequence of global models after each round.
    pub fn run(&self, initial: ParameterVector) -> Result<(Vec<RoundMetrics>, Vec<ParameterVector>)> {
        let mut state = VersionAgeState::new(self.num_clients(), &initial);
        let mut global = initial;
        let mut metrics = Vec::with_capacity(self.rounds as usize);
        let mut trajectory = Vec::with_capacity(self.rounds as usize);
        for _ in 0..self.rounds {
            let out = self.run_round(&state, &global)?;
            state = out.state;
            global = out.global;
            metrics.push(out.metrics);
            trajectory.push(global.clone());
        }
        Ok((metrics, trajectory))
    }
}

/// Cross-trial mean of one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanMetrics {
    pub round: u64,
    pub test_accuracy: Option<f64>,
    pub global_loss: Option<f64>,
    pub avg_version_age: f64,
    pub max_version_age: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    /// `trials[k][r]` is round `r + 1` of trial `k`.
    pub trials: Vec<Vec<RoundMetrics>>,
    pub mean: Vec<MeanMetrics>,
}

fn mean_option(values: impl Iterator<Item = Option<f64>>, count: usize) -> Option<f64> {
    let mut sum = 0.0;
    for v in values {
        sum += v?;
    }
    Some(sum / count as f64)
}

/// Per-round means across trials, summed in trial order.
pub fn cross_trial_means(trials: &[Vec<RoundMetrics>]) -> Vec<MeanMetrics> {
    let Some(first) = trials.first() else {
        return Vec::new();
    };
    let k = trials.len();
    (0..first.len())
        .map(|r| MeanMetrics {
            round: first[r].round,
            test_accuracy: mean_option(trials.iter().map(|t| t[r].test_accuracy), k),
            global_loss: mean_option(trials.iter().map(|t| t[r].global_loss), k),
            avg_version_age: trials.iter().map(|t| t[r].avg_version_age).sum::<f64>() / k as f64,
            max_version_age: trials.iter().map(|t| t[r].max_version_age as f64).sum::<f64>()
                / k as f64,
        })
        .collect()
}

pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    master_seed.wrapping_add(trial)
}

/// Runs every trial of `cfg` on already-prepared data.
pub fn run_prepared(cfg: &ExperimentConfig, data: &PreparedData) -> Result<RunRecord> {
    cfg.validate()?;
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|k| {
            let (fed, initial) = Federation::build(cfg, data, trial_seed(cfg.master_seed, k))?;
            let (metrics, _) = fed.run(initial)?;
            tracing::info!(trial = k, policy = cfg.scheduler.policy.name(), "trial complete");
            Ok(metrics)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = cross_trial_means(&trials);
    Ok(RunRecord {
        config: cfg.clone(),
        trials,
        mean,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunRecord> {
    let data = prepare_data(cfg)?;
    run_prepared(cfg, &data)
}

/// A scheduling variant in a comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyChoice {
    pub policy: Policy,
    pub h_kind: HKind,
}

impl PolicyChoice {
    /// `vas`, `vas-linear`, `random`, `aoi`, `aoi-linear` (an explicit `-exp`
    /// suffix is also accepted).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, h) = match s.split_once('-') {
            Some((name, h)) => (name, Some(h)),
            None => (s, None),
        };
        let policy = match name {
            "vas" => Policy::Vas,
            "random" => Policy::Random,
            "aoi" => Policy::Aoi,
            _ => return Err(Error::config("policies", format!("unknown policy `{s}`"))),
        };
        let h_kind = match h {
            None | Some("exp") => HKind::Exp,
            Some("linear") => HKind::Linear,
            Some(_) => return Err(Error::config("policies", format!("unknown policy `{s}`"))),
        };
        if policy == Policy::Random && h_kind == HKind::Linear {
            return Err(Error::config("policies", "`random` takes no cost function"));
        }
        Ok(Self { policy, h_kind })
    }

    pub fn label(self) -> String {
        match (self.policy, self.h_kind) {
            (Policy::Random, _) | (_, HKind::Exp) => self.policy.name().to_string(),
            (p, HKind::Linear) => format!("{}-linear", p.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub labels: Vec<String>,
    pub records: Vec<RunRecord>,
}

/// Runs `base` once per policy. Data, partitions and every seed are shared, so
/// only the scheduling decisions differ between the runs.
pub fn compare_policies(base: &ExperimentConfig, policies: &[PolicyChoice]) -> Result<Comparison> {
    if policies.is_empty() {
        return Err(Error::config("policies", "at least one policy is required"));
    }
    let data = prepare_data(base)?;
    let mut labels = Vec::with_capacity(policies.len());
    let mut records = Vec::with_capacity(policies.len());
    for choice in policies {
        let mut cfg = base.clone();
        cfg.scheduler.policy = choice.policy;
        cfg.scheduler.h_kind = choice.h_kind;
        labels.push(choice.label());
        records.push(run_prepared(&cfg, &data)?);
    }
    Ok(Comparison { labels, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl_core::BatchSize;

    pub(crate) fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            model: ModelSettings {
                kind: ModelKind::LogisticRegression,
                hidden_dim: None,
                init_scale: 0.1,
            },
            hyperparams: Hyperparams {
                learning_rate: 0.1,
                local_steps: 2,
                batch_size: BatchSize::Size(8),
            },
            data: DataSource::Synthetic(SynthParams {
                n_samples: 300,
                n_features: 4,
                n_classes: 3,
                cluster_spread: 1.0,
                seed: 1,
            }),
            test_fraction: 0.2,
            num_clients: 6,
            concentration: 0.5,
            scheduler: SchedulerSettings {
                policy: Policy::Vas,
                h_kind: HKind::Exp,
                threshold: ThresholdRule::NormFraction(0.05),
                num_selected: Some(2),
            },
            rounds: 5,
            eval_every: 1,
            trials: 1,
            master_seed: 9,
        }
    }

    #[test]
    fn policy_labels_round_trip() {
        for s in ["vas", "vas-linear", "random", "aoi", "aoi-linear"] {
            assert_eq!(PolicyChoice::parse(s).unwrap().label(), s);
        }
        assert_eq!(PolicyChoice::parse("vas-exp").unwrap().label(), "vas");
        assert!(PolicyChoice::parse("bandit").is_err());
        assert!(PolicyChoice::parse("vas-cubic").is_err());
    }

    #[test]
    fn default_selection_is_ten_percent_rounded_up() {
        let mut cfg = small_config();
        cfg.scheduler.num_selected = None;
        cfg.num_clients = 100;
        assert_eq!(cfg.num_selected(), 10);
        cfg.num_clients = 15;
        assert_eq!(cfg.num_selected(), 2);
    }

    #[test]
    fn validation_names_keys() {
        let mut cfg = small_config();
        cfg.rounds = 0;
        assert!(cfg.validate().unwrap_err().to_string().contains("experiment.rounds"));
        let mut cfg = small_config();
        cfg.scheduler.num_selected = Some(7);
        assert!(cfg.validate().unwrap_err().to_string().contains("scheduler.num_selected"));
    }

    #[test]
    fn threshold_resolution() {
        let w = ParameterVector::new(vec![1.0, -3.0]).unwrap();
        assert_eq!(ThresholdRule::NormFraction(0.5).resolve(&w).unwrap(), 2.0);
        assert_eq!(ThresholdRule::Absolute(0.7).resolve(&w).unwrap(), 0.7);
        assert!(ThresholdRule::NormFraction(0.5)
            .resolve(&ParameterVector::zeros(2))
            .is_err());
    }

    #[test]
    fn eval_every_skips_rounds_but_keeps_last() {
        let mut cfg = small_config();
        cfg.eval_every = 2;
        let rec = run_experiment(&cfg).unwrap();
        let acc: Vec<bool> = rec.trials[0].iter().map(|m| m.test_accuracy.is_some()).collect();
        assert_eq!(acc, vec![false, true, false, true, true]);
    }

    #[test]
    fn only_selected_clients_upload() {
        let cfg = small_config();
        let data = prepare_data(&cfg).unwrap();
        let (fed, w0) = Federation::build(&cfg, &data, 9).unwrap();
        let mut state = VersionAgeState::new(fed.num_clients(), &w0);
        let mut global = w0;
        for _ in 0..5 {
            let out = fed.run_round(&state, &global).unwrap();
            for i in 0..fed.num_clients() {
                if !out.outcome.indicators[i] {
                    assert_eq!(out.state.last_uploaded[i], state.last_uploaded[i]);
                }
            }
            state = out.state;
            global = out.global;
        }
    }

    #[test]
    fn means_recompute_from_rows() {
        let mut cfg = small_config();
        cfg.trials = 3;
        let rec = run_experiment(&cfg).unwrap();
        assert_eq!(rec.trials.len(), 3);
        for (r, m) in rec.mean.iter().enumerate() {
            let acc: f64 = rec.trials.iter().map(|t| t[r].test_accuracy.unwrap()).sum::<f64>() / 3.0;
            assert_eq!(m.test_accuracy, Some(acc));
        }
    }
}
