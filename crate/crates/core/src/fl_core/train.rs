use rand::seq::SliceRandom;

use super::model::loss_and_grad_rows;
use super::{Dataset, ModelSpec, ParameterVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Full,
    Size(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub local_steps: usize,
    pub batch_size: BatchSize,
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        // A zero step size is accepted: it turns training into a no-op.
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidHyperparams(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if self.local_steps == 0 {
            return Err(Error::InvalidHyperparams("local_steps must be at least 1".into()));
        }
        if self.batch_size == BatchSize::Size(0) {
            return Err(Error::InvalidHyperparams("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Runs `local_steps` SGD steps from `global` on `data`.
///
/// Sample order is a single shuffle of the client's rows (seeded by
/// `shuffle_seed`), walked cyclically in batches of `batch_size`. Full-batch
/// steps use the rows in their stored order and consume no randomness.
pub fn local_update(
    global: &ParameterVector,
    spec: &ModelSpec,
    data: &Dataset,
    hp: &Hyperparams,
    shuffle_seed: u64,
) -> Result<ParameterVector> {
    hp.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.num_features() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            found: data.num_features(),
        });
    }
    data.check_labels(spec.num_classes)?;

    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let batch = match hp.batch_size {
        BatchSize::Size(b) if b < n => {
            order.shuffle(&mut crate::seed::rng(shuffle_seed));
            b
        }
        _ => n,
    };

    let mut w = global.clone().into_inner();
    let mut cursor = 0usize;
    let mut rows = Vec::with_capacity(batch);
    for _ in 0..hp.local_steps {
        rows.clear();
        rows.extend((0..batch).map(|j| order[(cursor + j) % n]));
        cursor = (cursor + batch) % n;
        let params = ParameterVector::new(w)?;
        let (_, grad) = loss_and_grad_rows(&params, spec, data, &rows)?;
        w = params.into_inner();
        for (wi, gi) in w.iter_mut().zip(grad.iter()) {
            *wi -= hp.learning_rate * gi;
        }
    }
    ParameterVector::new(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl_core::{init_model, loss_and_grad};
    use rand::Rng;

    fn toy(seed: u64, n: usize) -> (ModelSpec, ParameterVector, Dataset) {
        let mut rng = crate::seed::rng(seed);
        let mut spec = ModelSpec::mlp(3, 4, 3);
        spec.init_scale = 0.5;
        spec.init_seed = seed;
        let w = init_model(&spec).unwrap();
        let features = (0..n * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = (0..n).map(|_| rng.random_range(0..3)).collect();
        (spec, w, Dataset::new(features, 3, labels).unwrap())
    }

    fn full(lr: f64, steps: usize) -> Hyperparams {
        Hyperparams {
            learning_rate: lr,
            local_steps: steps,
            batch_size: BatchSize::Full,
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let (spec, w, data) = toy(1, 20);
        for batch_size in [BatchSize::Full, BatchSize::Size(3)] {
            let hp = Hyperparams {
                learning_rate: 0.0,
                local_steps: 4,
                batch_size,
            };
            assert_eq!(local_update(&w, &spec, &data, &hp, 5).unwrap(), w);
        }
    }

    #[test]
    fn single_full_batch_step_is_gradient_step() {
        let (spec, w, data) = toy(2, 15);
        let (_, g) = loss_and_grad(&w, &spec, &data).unwrap();
        let expected: Vec<f64> = w.iter().zip(g.iter()).map(|(a, b)| a - 0.3 * b).collect();
        let out = local_update(&w, &spec, &data, &full(0.3, 1), 0).unwrap();
        assert_eq!(out.as_slice(), expected.as_slice());
    }

    #[test]
    fn two_full_steps_compose() {
        let (spec, w, data) = toy(3, 15);
        let once = local_update(&w, &spec, &data, &full(0.2, 1), 0).unwrap();
        let twice = local_update(&once, &spec, &data, &full(0.2, 1), 0).unwrap();
        assert_eq!(local_update(&w, &spec, &data, &full(0.2, 2), 0).unwrap(), twice);
    }

    #[test]
    fn minibatch_is_seed_deterministic() {
        let (spec, w, data) = toy(4, 30);
        let hp = Hyperparams {
            learning_rate: 0.1,
            local_steps: 5,
            batch_size: BatchSize::Size(4),
        };
        let a = local_update(&w, &spec, &data, &hp, 42).unwrap();
        assert_eq!(a, local_update(&w, &spec, &data, &hp, 42).unwrap());
        assert_ne!(a, local_update(&w, &spec, &data, &hp, 43).unwrap());
    }

    #[test]
    fn empty_dataset_rejected() {
        let (spec, w, data) = toy(5, 4);
        let empty = data.subset(&[]);
        assert!(matches!(
            local_update(&w, &spec, &empty, &full(0.1, 1), 0),
            Err(Error::EmptyDataset)
        ));
    }
}
