//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

use rand::Rng;
use vaoi_fl::fl_core::{loss_and_grad, Dataset, ModelSpec, ParameterVector};

pub const FD_STEP: f64 = 1e-5;

/// Central finite-difference gradient of the mean loss.
pub fn finite_difference_grad(params: &ParameterVector, spec: &ModelSpec, batch: &Dataset) -> Vec<f64> {
    let base = params.as_slice().to_vec();
    (0..base.len())
        .map(|k| {
            let mut plus = base.clone();
            let mut minus = base.clone();
            plus[k] += FD_STEP;
            minus[k] -= FD_STEP;
            let lp = loss_and_grad(&ParameterVector::new(plus).unwrap(), spec, batch).unwrap().0;
            let lm = loss_and_grad(&ParameterVector::new(minus).unwrap(), spec, batch).unwrap().0;
            (lp - lm) / (2.0 * FD_STEP)
        })
        .collect()
}

/// Random (spec, params, batch) instance for gradient checking.
pub fn random_instance(rng: &mut impl Rng, mlp: bool) -> (ModelSpec, ParameterVector, Dataset) {
    let f = rng.random_range(1..=6);
    let c = rng.random_range(2..=5);
    let mut spec = if mlp {
        ModelSpec::mlp(f, rng.random_range(1..=6), c)
    } else {
        ModelSpec::logistic(f, c)
    };
    spec.init_scale = 1.0;
    let d = spec.param_dim().unwrap();
    let params = ParameterVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let n = rng.random_range(1..=8);
    let features = (0..n * f).map(|_| rng.random_range(-2.0..2.0)).collect();
    let labels = (0..n).map(|_| rng.random_range(0..c)).collect();
    (spec, params, Dataset::new(features, f, labels).unwrap())
}

/// Largest relative deviation between an analytic and a numeric gradient.
/// The 1e-8 floor only guards against dividing by exact zeros.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Direct `exp(X_i) / Σ exp(X_j)` with no max shift. `None` if it overflows.
pub fn naive_exp_probabilities(ages: &[u64]) -> Option<Vec<f64>> {
    let weights: Vec<f64> = ages.iter().map(|&x| (x as f64).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !total.is_finite() {
        return None;
    }
    Some(weights.iter().map(|w| w / total).collect())
}

/// Coordinate-wise `Σ β_i w_i` with `β_i = n_i / Σ n_j`, visiting clients in
/// ascending id order.
pub fn brute_force_fedavg(entries: &[(usize, Vec<f64>, usize)]) -> Vec<f64> {
    let mut sorted: Vec<&(usize, Vec<f64>, usize)> = entries.iter().collect();
    sorted.sort_by_key(|e| e.0);
    let mut total = 0usize;
    for e in &sorted {
        total += e.2;
    }
    let dim = sorted[0].1.len();
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim {
        let mut acc = 0.0;
        for e in &sorted {
            acc += (e.2 as f64 / total as f64) * e.1[k];
        }
        out.push(acc);
    }
    out
}
