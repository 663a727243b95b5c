//! Softmax classifiers: multinomial logistic regression and a one-hidden-layer
//! tanh MLP, both over a flat parameter vector.
//!
//! Layout of the flat vector:
//! - logistic regression: `C` rows of `f + 1` values (weights, then bias).
//! - MLP: `H` hidden rows of `f + 1` values, followed by `C` output rows of
//!   `H + 1` values.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, ParameterVector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LogisticRegression,
    Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub hidden_dim: Option<usize>,
    pub init_scale: f64,
    pub init_seed: u64,
}

impl ModelSpec {
    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::LogisticRegression,
            input_dim,
            num_classes,
            hidden_dim: None,
            init_scale: 0.1,
            init_seed: 0,
        }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self {
            kind: ModelKind::Mlp,
            input_dim,
            num_classes,
            hidden_dim: Some(hidden_dim),
            init_scale: 0.1,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidModelSpec("input_dim must be positive".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::InvalidModelSpec("num_classes must be positive".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(Error::InvalidModelSpec(format!(
                "init_scale must be finite and non-negative, got {}",
                self.init_scale
            )));
        }
        if self.kind == ModelKind::Mlp {
            match self.hidden_dim {
                None => return Err(Error::InvalidModelSpec("mlp requires hidden_dim".into())),
                Some(0) => {
                    return Err(Error::InvalidModelSpec("hidden_dim must be positive".into()))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Number of parameters `d`.
    pub fn param_dim(&self) -> Result<usize> {
        self.validate()?;
        let (f, c) = (self.input_dim, self.num_classes);
        Ok(match self.kind {
            ModelKind::LogisticRegression => (f + 1) * c,
            ModelKind::Mlp => {
                let h = self.hidden_dim.unwrap_or_default();
                (f + 1) * h + (h + 1) * c
            }
        })
    }
}

/// Uniform initialization in `[-init_scale, init_scale]`, seeded by `init_seed`.
pub fn init_model(spec: &ModelSpec) -> Result<ParameterVector> {
    let d = spec.param_dim()?;
    if spec.init_scale == 0.0 {
        return Ok(ParameterVector::zeros(d));
    }
    let mut rng = crate::seed::rng(spec.init_seed);
    let s = spec.init_scale;
    let values = (0..d).map(|_| rng.random_range(-s..=s)).collect();
    ParameterVector::new(values)
}

/// Borrowed view of a model for forward/backward passes.
struct Network<'a> {
    w: &'a [f64],
    f: usize,
    c: usize,
    hidden: Option<usize>,
}

impl<'a> Network<'a> {
    fn new(params: &'a ParameterVector, spec: &ModelSpec) -> Result<Self> {
        params.check_dim(spec.param_dim()?)?;
        Ok(Self {
            w: params.as_slice(),
            f: spec.input_dim,
            c: spec.num_classes,
            hidden: match spec.kind {
                ModelKind::LogisticRegression => None,
                ModelKind::Mlp => spec.hidden_dim,
            },
        })
    }

    fn affine(rows: &[f64], inputs: &[f64], out: &mut [f64]) {
        let stride = inputs.len() + 1;
        for (o, row) in out.iter_mut().zip(rows.chunks_exact(stride)) {
            let dot: f64 = row[..inputs.len()]
                .iter()
                .zip(inputs)
                .map(|(w, x)| w * x)
                .sum();
            *o = dot + row[inputs.len()];
        }
    }

    /// Writes logits into `logits`; for the MLP, hidden activations go to `hidden`.
    fn forward(&self, x: &[f64], hidden: &mut [f64], logits: &mut [f64]) {
        match self.hidden {
            None => Self::affine(self.w, x, logits),
            Some(h) => {
                let split = h * (self.f + 1);
                Self::affine(&self.w[..split], x, hidden);
                hidden.iter_mut().for_each(|v| *v = v.tanh());
                Self::affine(&self.w[split..], hidden, logits);
            }
        }
    }

    fn hidden_len(&self) -> usize {
        self.hidden.unwrap_or(0)
    }
}

/// In-place softmax; returns log-sum-exp of the input logits.
fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
    max + sum.ln()
}

fn check_batch(spec: &ModelSpec, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.num_features() != spec.input_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.input_dim,
            found: data.num_features(),
        });
    }
    data.check_labels(spec.num_classes)
}

/// Mean cross-entropy over the batch and its exact gradient.
pub fn loss_and_grad(
    params: &ParameterVector,
    spec: &ModelSpec,
    batch: &Dataset,
) -> Result<(f64, ParameterVector)> {
    check_batch(spec, batch)?;
    let rows: Vec<usize> = (0..batch.len()).collect();
    loss_and_grad_rows(params, spec, batch, &rows)
}

/// Same as [`loss_and_grad`] restricted to `rows` of `data` (rows may repeat).
pub(crate) fn loss_and_grad_rows(
    params: &ParameterVector,
    spec: &ModelSpec,
    data: &Dataset,
    rows: &[usize],
) -> Result<(f64, ParameterVector)> {
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let net = Network::new(params, spec)?;
    let (f, c, h) = (net.f, net.c, net.hidden_len());
    let mut grad = vec![0.0; params.dim()];
    let mut hidden = vec![0.0; h];
    let mut probs = vec![0.0; c];
    let mut d_hidden = vec![0.0; h];
    let inv_b = 1.0 / rows.len() as f64;
    let mut loss = 0.0;

    for &r in rows {
        let x = data.row(r);
        let y = data.labels()[r];
        net.forward(x, &mut hidden, &mut probs);
        let logit_y = probs[y];
        loss += softmax_in_place(&mut probs) - logit_y;
        // d(mean CE)/d logits
        probs[y] -= 1.0;
        probs.iter_mut().for_each(|p| *p *= inv_b);

        match net.hidden {
            None => accumulate_affine_grad(&mut grad, x, &probs),
            Some(_) => {
                let split = h * (f + 1);
                let out_w = &net.w[split..];
                accumulate_affine_grad(&mut grad[split..], &hidden, &probs);
                for (k, dh) in d_hidden.iter_mut().enumerate() {
                    let back: f64 = (0..c).map(|j| probs[j] * out_w[j * (h + 1) + k]).sum();
                    *dh = back * (1.0 - hidden[k] * hidden[k]);
                }
                accumulate_affine_grad(&mut grad[..split], x, &d_hidden);
            }
        }
    }

    let loss = loss * inv_b;
    if !loss.is_finite() {
        return Err(Error::Other("loss is not finite".into()));
    }
    Ok((loss, ParameterVector::new(grad)?))
}

fn accumulate_affine_grad(grad: &mut [f64], inputs: &[f64], delta: &[f64]) {
    let stride = inputs.len() + 1;
    for (row, &d) in grad.chunks_exact_mut(stride).zip(delta) {
        for (g, x) in row[..inputs.len()].iter_mut().zip(inputs) {
            *g += d * x;
        }
        row[inputs.len()] += d;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub loss: f64,
}

/// Accuracy of argmax predictions (ties go to the lowest class id) and mean
/// cross-entropy on `test`.
pub fn evaluate(params: &ParameterVector, spec: &ModelSpec, test: &Dataset) -> Result<Evaluation> {
    check_batch(spec, test)?;
    let net = Network::new(params, spec)?;
    let mut hidden = vec![0.0; net.hidden_len()];
    let mut logits = vec![0.0; net.c];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..test.len() {
        let y = test.labels()[i];
        net.forward(test.row(i), &mut hidden, &mut logits);
        let mut best = 0;
        for k in 1..logits.len() {
            if logits[k] > logits[best] {
                best = k;
            }
        }
        if best == y {
            correct += 1;
        }
        let logit_y = logits[y];
        loss += softmax_in_place(&mut logits) - logit_y;
    }
    let n = test.len() as f64;
    Ok(Evaluation {
        accuracy: correct as f64 / n,
        loss: loss / n,
    })
}
