//! Sample-size-weighted averaging over the clients selected in a round.

use crate::error::{Error, Result};
use crate::fl_core::ParameterVector;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationEntry {
    pub client_id: usize,
    pub params: ParameterVector,
    pub num_samples: usize,
}

/// Entry order sorted by client id, after checking the input invariants.
fn sorted_order(entries: &[AggregationEntry]) -> Result<Vec<usize>> {
    let first = entries
        .first()
        .ok_or_else(|| Error::InvalidAggregation("no entries".into()))?;
    let dim = first.params.dim();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by_key(|&i| entries[i].client_id);
    for pair in order.windows(2) {
        if entries[pair[0]].client_id == entries[pair[1]].client_id {
            return Err(Error::InvalidAggregation(format!(
                "client {} appears twice",
                entries[pair[0]].client_id
            )));
        }
    }
    for e in entries {
        if e.num_samples == 0 {
            return Err(Error::InvalidAggregation(format!(
                "client {} has no samples",
                e.client_id
            )));
        }
        e.params.check_dim(dim)?;
    }
    Ok(order)
}

/// `β_i = n_i / Σ_j n_j` over the given entries, aligned with the input order.
pub fn beta_weights(entries: &[AggregationEntry]) -> Result<Vec<f64>> {
    let order = sorted_order(entries)?;
    let total: usize = order.iter().map(|&i| entries[i].num_samples).sum();
    Ok(entries
        .iter()
        .map(|e| e.num_samples as f64 / total as f64)
        .collect())
}

/// `Σ β_i w_i`, accumulated in ascending client-id order so the bit pattern
/// does not depend on input order. When all sample counts are equal the
/// weights are uniform and the result is computed as a plain mean.
pub fn fedavg_aggregate(entries: &[AggregationEntry]) -> Result<ParameterVector> {
    let order = sorted_order(entries)?;
    let dim = entries[order[0]].params.dim();
    let mut out = vec![0.0; dim];

    let uniform = entries.iter().all(|e| e.num_samples == entries[0].num_samples);
    if uniform {
        for &i in &order {
            for (o, w) in out.iter_mut().zip(entries[i].params.iter()) {
                *o += w;
            }
        }
        let k = order.len() as f64;
        out.iter_mut().for_each(|o| *o /= k);
    } else {
        let betas = beta_weights(entries)?;
        for &i in &order {
            let beta = betas[i];
            for (o, w) in out.iter_mut().zip(entries[i].params.iter()) {
                *o += beta * w;
            }
        }
    }
    ParameterVector::new(out)
}
