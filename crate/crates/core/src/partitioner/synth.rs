use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fl_core::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthParams {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub cluster_spread: f64,
    pub seed: u64,
}

/// Gaussian blobs, one per class. Class means are standard-normal vectors drawn
/// from `seed`; sample `i` belongs to class `i mod C`, so class counts are equal
/// up to one extra sample for the lowest class ids.
pub fn synth_classification(p: &SynthParams) -> Result<Dataset> {
    if p.n_samples == 0 || p.n_features == 0 || p.n_classes == 0 {
        return Err(Error::Other(
            "n_samples, n_features and n_classes must all be positive".into(),
        ));
    }
    if !(p.cluster_spread.is_finite() && p.cluster_spread >= 0.0) {
        return Err(Error::Other(format!(
            "cluster_spread must be finite and non-negative, got {}",
            p.cluster_spread
        )));
    }
    let mut rng = crate::seed::rng(p.seed);
    let means: Vec<f64> = (0..p.n_classes * p.n_features)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut features = Vec::with_capacity(p.n_samples * p.n_features);
    let mut labels = Vec::with_capacity(p.n_samples);
    for i in 0..p.n_samples {
        let class = i % p.n_classes;
        let mean = &means[class * p.n_features..(class + 1) * p.n_features];
        for &m in mean {
            let noise: f64 = rng.sample(StandardNormal);
            features.push(m + p.cluster_spread * noise);
        }
        labels.push(class);
    }
    Dataset::new(features, p.n_features, labels)
}
