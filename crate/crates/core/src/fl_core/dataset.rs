use crate::error::{Error, Result};

/// Row-major feature matrix with one integer class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    num_features: usize,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(features: Vec<f64>, num_features: usize, labels: Vec<usize>) -> Result<Self> {
        if num_features == 0 {
            return Err(Error::Other("dataset needs at least one feature".into()));
        }
        if features.len() != labels.len() * num_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * num_features,
                found: features.len(),
            });
        }
        Ok(Self {
            features,
            num_features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    /// One more than the largest label present, or 0 for an empty dataset.
    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.num_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            num_features: self.num_features,
            labels,
        }
    }

    pub(crate) fn check_labels(&self, num_classes: usize) -> Result<()> {
        match self.labels.iter().position(|&l| l >= num_classes) {
            Some(index) => Err(Error::LabelOutOfRange {
                index,
                label: self.labels[index],
                num_classes,
            }),
            None => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_and_subset() {
        let ds = Dataset::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 2, vec![0, 1, 2]).unwrap();
        assert_eq!(ds.row(1), &[3.0, 4.0]);
        let sub = ds.subset(&[2, 0]);
        assert_eq!(sub.features(), &[5.0, 6.0, 1.0, 2.0]);
        assert_eq!(sub.labels(), &[2, 0]);
        assert_eq!(ds.num_classes(), 3);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(matches!(
            Dataset::new(vec![1.0, 2.0, 3.0], 2, vec![0, 1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
