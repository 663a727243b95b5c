use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletConfig {
    pub num_clients: usize,
    pub concentration: f64,
    pub seed: u64,
}

/// Disjoint assignment of sample indices to clients. Each client's index list
/// is sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionPlan {
    assignments: Vec<Vec<usize>>,
}

impl PartitionPlan {
    /// Validates that `assignments` exactly covers `0..total`.
    pub fn new(mut assignments: Vec<Vec<usize>>, total: usize) -> Result<Self> {
        let mut seen = vec![false; total];
        for idx in assignments.iter().flatten() {
            match seen.get_mut(*idx) {
                None => {
                    return Err(Error::InvalidPartition(format!(
                        "index {idx} outside dataset of {total} samples"
                    )))
                }
                Some(true) => {
                    return Err(Error::InvalidPartition(format!("index {idx} assigned twice")))
                }
                Some(s) => *s = true,
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("index {missing} not assigned")));
        }
        assignments.iter_mut().for_each(|a| a.sort_unstable());
        Ok(Self { assignments })
    }

    pub fn num_clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn client(&self, i: usize) -> &[usize] {
        &self.assignments[i]
    }

    pub fn client_sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }
}

/// Draws a point from the symmetric Dirichlet distribution over `n` coordinates.
///
/// Works in log space so that very small concentrations do not underflow to
/// an all-zero Gamma vector: for `α < 1`, `G(α) = G(α + 1) · U^{1/α}`.
fn sample_symmetric_dirichlet(rng: &mut impl Rng, n: usize, alpha: f64) -> Vec<f64> {
    let boost = alpha < 1.0;
    let shape = if boost { alpha + 1.0 } else { alpha };
    let gamma = Gamma::new(shape, 1.0).expect("shape is positive and finite");
    let logs: Vec<f64> = (0..n)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let mut log_g = g.ln();
            if boost {
                let u: f64 = 1.0 - rng.random::<f64>();
                log_g += u.ln() / alpha;
            }
            log_g
        })
        .collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Integer counts summing to `total`, proportional to `proportions`, with the
/// rounding remainder handed to the largest fractional parts (lowest index
/// first on ties).
pub(crate) fn largest_remainder(proportions: &[f64], total: usize) -> Vec<usize> {
    let quotas: Vec<f64> = proportions.iter().map(|p| p * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..proportions.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    // Floors never exceed the total since the proportions sum to one (up to
    // rounding); clamp anyway so a pathological sum cannot underflow.
    let mut remaining = total.saturating_sub(assigned);
    for &i in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        counts[i] += 1;
        remaining -= 1;
    }
    let mut excess = counts.iter().sum::<usize>().saturating_sub(total);
    for &i in order.iter().rev() {
        while excess > 0 && counts[i] > 0 {
            counts[i] -= 1;
            excess -= 1;
        }
    }
    counts
}

/// Label-skewed split: for every class, client shares are drawn from
/// `Dirichlet(ρ·1_N)` and the class's (shuffled) samples are dealt out by
/// largest-remainder rounding. Clients left empty then take one sample each
/// from the currently largest client.
pub fn dirichlet_partition(labels: &[usize], cfg: &DirichletConfig) -> Result<PartitionPlan> {
    let n = labels.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if cfg.num_clients == 0 {
        return Err(Error::InvalidPartition("num_clients must be at least 1".into()));
    }
    if !(cfg.concentration.is_finite() && cfg.concentration > 0.0) {
        return Err(Error::InvalidPartition(format!(
            "concentration must be positive, got {}",
            cfg.concentration
        )));
    }
    if cfg.num_clients > n {
        return Err(Error::TooManyClients {
            clients: cfg.num_clients,
            samples: n,
        });
    }

    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut rng = crate::seed::rng(cfg.seed);
    let mut assignments: Vec<Vec<usize>> = vec![Vec::new(); cfg.num_clients];
    for mut members in by_class.into_iter().filter(|m| !m.is_empty()) {
        let shares = sample_symmetric_dirichlet(&mut rng, cfg.num_clients, cfg.concentration);
        members.shuffle(&mut rng);
        let counts = largest_remainder(&shares, members.len());
        let mut start = 0;
        for (client, count) in counts.into_iter().enumerate() {
            assignments[client].extend_from_slice(&members[start..start + count]);
            start += count;
        }
    }

    for empty in 0..cfg.num_clients {
        if !assignments[empty].is_empty() {
            continue;
        }
        let donor = (0..cfg.num_clients)
            .max_by(|&a, &b| assignments[a].len().cmp(&assignments[b].len()).then(b.cmp(&a)))
            .expect("at least one client");
        let moved = assignments[donor].pop().expect("donor holds at least two samples");
        assignments[empty].push(moved);
    }

    PartitionPlan::new(assignments, n)
}
