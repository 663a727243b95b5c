//! Version-age bookkeeping and client selection.
//!
//! A client's version age grows by one each round in which its last upload
//! sits at least `τ` (in L1) away from the current global model, and drops to
//! zero whenever the client is selected. Selection probabilities are
//! `h(X_i) / Σ_j h(X_j)` with `h` either `exp` or the identity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl_core::{l1_distance, ParameterVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Policy {
    /// Version-age-weighted sampling.
    Vas,
    /// Uniform sampling (plain FedAvg).
    Random,
    /// Baseline weighting by rounds since last selection, ignoring content.
    Aoi,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Vas => "vas",
            Policy::Random => "random",
            Policy::Aoi => "aoi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HKind {
    Exp,
    Linear,
}

impl HKind {
    pub fn name(self) -> &'static str {
        match self {
            HKind::Exp => "exp",
            HKind::Linear => "linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub policy: Policy,
    pub h_kind: HKind,
    /// Absolute staleness threshold `τ`.
    pub threshold: f64,
    pub num_selected: usize,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VersionAgeState {
    /// Version ages `X_i(t)`.
    pub ages: Vec<u64>,
    /// Rounds since last selection; drives the `aoi` baseline only.
    pub timeliness_ages: Vec<u64>,
    /// Each client's most recently uploaded model.
    pub last_uploaded: Vec<ParameterVector>,
    /// Number of completed scheduling steps.
    pub round: u64,
}

impl VersionAgeState {
    /// All ages zero; every client starts from `initial` as its last upload.
    pub fn new(num_clients: usize, initial: &ParameterVector) -> Self {
        Self {
            ages: vec![0; num_clients],
            timeliness_ages: vec![0; num_clients],
            last_uploaded: vec![initial.clone(); num_clients],
            round: 0,
        }
    }

    pub fn num_clients(&self) -> usize {
        self.ages.len()
    }

    /// Commits a scheduling outcome and the models uploaded by the selected
    /// clients. Uploads from unselected clients are rejected.
    pub fn advance(
        &mut self,
        outcome: &SelectionOutcome,
        uploads: impl IntoIterator<Item = (usize, ParameterVector)>,
    ) -> Result<()> {
        for (id, model) in uploads {
            if !outcome.indicators.get(id).copied().unwrap_or(false) {
                return Err(Error::Other(format!("client {id} uploaded without being selected")));
            }
            self.last_uploaded[id] = model;
        }
        self.ages.clone_from(&outcome.new_ages);
        self.timeliness_ages.clone_from(&outcome.new_timeliness_ages);
        self.round += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    /// Selected client ids, ascending.
    pub selected: Vec<usize>,
    pub indicators: Vec<bool>,
    pub stale: Vec<bool>,
    pub new_ages: Vec<u64>,
    pub new_timeliness_ages: Vec<u64>,
    pub probabilities: Vec<f64>,
}

/// True iff `‖w_i − w_g‖₁ ≥ τ`.
pub fn staleness_indicator(
    client: &ParameterVector,
    global: &ParameterVector,
    threshold: f64,
) -> Result<bool> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::InvalidThreshold(threshold));
    }
    Ok(l1_distance(client, global)? >= threshold)
}

/// Age update: selected clients reset to 0, stale unselected ones gain one
/// version, fresh unselected ones keep their age.
pub fn update_version_ages(ages: &[u64], stale: &[bool], selected: &[bool]) -> Result<Vec<u64>> {
    for len in [stale.len(), selected.len()] {
        if len != ages.len() {
            return Err(Error::DimensionMismatch {
                expected: ages.len(),
                found: len,
            });
        }
    }
    Ok(ages
        .iter()
        .zip(stale)
        .zip(selected)
        .map(|((&x, &s), &sel)| match (sel, s) {
            (true, _) => 0,
            (false, true) => x + 1,
            (false, false) => x,
        })
        .collect())
}

/// Normalized cost weights `h(X_i) / Σ_j h(X_j)`.
///
/// For `exp`, the maximum age is subtracted before exponentiating, which
/// leaves the ratios unchanged and cannot overflow. For `linear` with every
/// age zero the result is uniform.
pub fn selection_probabilities(ages: &[u64], h_kind: HKind) -> Result<Vec<f64>> {
    if ages.is_empty() {
        return Err(Error::InvalidSelection {
            requested: 1,
            available: 0,
        });
    }
    let weights: Vec<f64> = match h_kind {
        HKind::Exp => {
            let max = *ages.iter().max().expect("non-empty");
            ages.iter()
                .map(|&x| (-((max - x) as f64)).exp())
                .collect()
        }
        HKind::Linear => ages.iter().map(|&x| x as f64).collect(),
    };
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Ok(uniform(ages.len()));
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Draws `m` distinct ids by successive weighted draws, removing each pick and
/// renormalizing. Once no positive weight remains, the rest are filled
/// uniformly from the unpicked ids. Returns ids in ascending order.
pub fn sample_clients(probabilities: &[f64], m: usize, rng_seed: u64) -> Result<Vec<usize>> {
    let n = probabilities.len();
    if m > n {
        return Err(Error::InvalidSelection {
            requested: m,
            available: n,
        });
    }
    if let Some(bad) = probabilities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Other(format!("invalid selection probability {bad}")));
    }
    if m == n {
        return Ok((0..n).collect());
    }

    let mut rng = crate::seed::rng(rng_seed);
    let mut weights = probabilities.to_vec();
    let mut picked = vec![false; n];
    let mut selected = Vec::with_capacity(m);
    while selected.len() < m {
        let total: f64 = weights.iter().sum();
        let choice = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut last_positive = None;
            let mut hit = None;
            for (i, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                last_positive = Some(i);
                acc += w;
                if target < acc {
                    hit = Some(i);
                    break;
                }
            }
            hit.or(last_positive).expect("positive total implies a positive weight")
        } else {
            let remaining: Vec<usize> = (0..n).filter(|&i| !picked[i]).collect();
            remaining[rng.random_range(0..remaining.len())]
        };
        picked[choice] = true;
        weights[choice] = 0.0;
        selected.push(choice);
    }
    selected.sort_unstable();
    Ok(selected)
}

/// One scheduling step: probabilities from the current ages, sampling, then the
/// age update using staleness measured against `global` (the model at the
/// start of the round).
pub fn schedule(
    state: &VersionAgeState,
    global: &ParameterVector,
    cfg: &SchedulerConfig,
) -> Result<SelectionOutcome> {
    let n = state.num_clients();
    if state.last_uploaded.len() != n || state.timeliness_ages.len() != n {
        return Err(Error::Other("inconsistent version-age state".into()));
    }
    if cfg.num_selected == 0 || cfg.num_selected > n {
        return Err(Error::InvalidSelection {
            requested: cfg.num_selected,
            available: n,
        });
    }

    let probabilities = match cfg.policy {
        Policy::Vas => selection_probabilities(&state.ages, cfg.h_kind)?,
        Policy::Random => uniform(n),
        Policy::Aoi => selection_probabilities(&state.timeliness_ages, cfg.h_kind)?,
    };
    let seed = crate::seed::derive(&[cfg.rng_seed, state.round]);
    let selected = sample_clients(&probabilities, cfg.num_selected, seed)?;

    let mut indicators = vec![false; n];
    selected.iter().for_each(|&i| indicators[i] = true);
    let stale = state
        .last_uploaded
        .iter()
        .map(|w| staleness_indicator(w, global, cfg.threshold))
        .collect::<Result<Vec<_>>>()?;
    let new_ages = update_version_ages(&state.ages, &stale, &indicators)?;
    let all_stale = vec![true; n];
    let new_timeliness_ages = update_version_ages(&state.timeliness_ages, &all_stale, &indicators)?;

    Ok(SelectionOutcome {
        selected,
        indicators,
        stale,
        new_ages,
        new_timeliness_ages,
        probabilities,
    })
}
