use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LossSpec;
use crate::error::{Error, Result};

/// Hidden-layer nonlinearity. Only `tanh` is provided: it is smooth, so the
/// finite-difference gradient check holds at every point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
}

impl Activation {
    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }
}

/// Layer widths of a fully connected classifier. An empty `hidden` list is
/// multinomial logistic regression.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub num_labels: usize,
}

impl Architecture {
    pub fn logistic(input_dim: usize, num_labels: usize) -> Self {
        Self::mlp(input_dim, Vec::new(), num_labels)
    }

    pub fn mlp(input_dim: usize, hidden: Vec<usize>, num_labels: usize) -> Self {
        Self {
            input_dim,
            hidden,
            num_labels,
        }
    }

    /// `(fan_in, fan_out)` for each layer, input to output.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 2);
        dims.push(self.input_dim);
        dims.extend_from_slice(&self.hidden);
        dims.push(self.num_labels);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Per layer: `fan_out * fan_in` row-major weights followed by `fan_out` biases.
    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|(i, o)| o * i + o).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input dimension must be positive"));
        }
        if self.num_labels < 2 {
            return Err(Error::invalid("at least two labels are required"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    activation: Activation,
    params: Vec<f64>,
}

/// Forward pass intermediates: post-activation outputs of every hidden layer
/// and the output probabilities.
struct Trace {
    hidden: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl Model {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Self {
            arch,
            activation: Activation::Tanh,
            params: vec![0.0; n],
        }
    }

    /// Uniform `[-s, s]` per layer with `s = 1 / sqrt(fan_in)`, weights and
    /// biases alike.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut params = Vec::with_capacity(arch.param_count());
        for (fan_in, fan_out) in arch.layers() {
            let s = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..(fan_in * fan_out + fan_out) {
                params.push(rng.random_range(-s..=s));
            }
        }
        Ok(Self {
            arch,
            activation: Activation::Tanh,
            params,
        })
    }

    pub fn from_params(arch: Architecture, activation: Activation, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: arch.param_count(),
                got: params.len(),
            });
        }
        Ok(Self {
            arch,
            activation,
            params,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.check_input(features)?;
        Ok(self.trace(features).probs)
    }

    /// Predicted label; ties go to the lowest index.
    pub fn predict(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(features)?))
    }

    pub fn loss(&self, features: &[f64], label: usize, spec: LossSpec) -> Result<f64> {
        let probs = self.forward(features)?;
        super::loss(&probs, label, spec)
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.arch.input_dim {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: self.arch.input_dim,
                got: features.len(),
            });
        }
        Ok(())
    }

    fn trace(&self, features: &[f64]) -> Trace {
        let layers = self.arch.layers();
        let last = layers.len() - 1;
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(last);
        let mut offset = 0;
        let mut logits = Vec::new();
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let input: &[f64] = if l == 0 { features } else { &hidden[l - 1] };
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            offset += fan_in * fan_out + fan_out;
            let mut z: Vec<f64> = b.to_vec();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * fan_in..(o + 1) * fan_in];
                *zo += row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>();
            }
            if l == last {
                logits = z;
            } else {
                match self.activation {
                    Activation::Tanh => z.iter_mut().for_each(|v| *v = v.tanh()),
                }
                hidden.push(z);
            }
        }
        Trace {
            hidden,
            probs: softmax(&logits),
        }
    }

    /// Accumulates `weight * d loss / d params` for one example into `out`.
    fn accumulate_grad(
        &self,
        features: &[f64],
        label: usize,
        weight: f64,
        spec: LossSpec,
        out: &mut [f64],
    ) -> Result<()> {
        let trace = self.trace(features);
        let scale = weight * spec.logit_scale(&trace.probs, label)?;
        let mut delta: Vec<f64> = trace.probs.iter().map(|p| scale * p).collect();
        delta[label] -= scale;

        let layers = self.arch.layers();
        let mut offsets = Vec::with_capacity(layers.len());
        let mut offset = 0;
        for &(fan_in, fan_out) in &layers {
            offsets.push(offset);
            offset += fan_in * fan_out + fan_out;
        }
        for l in (0..layers.len()).rev() {
            let (fan_in, fan_out) = layers[l];
            let input: &[f64] = if l == 0 { features } else { &trace.hidden[l - 1] };
            let start = offsets[l];
            for o in 0..fan_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let row = &mut out[start + o * fan_in..start + (o + 1) * fan_in];
                row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                out[start + fan_in * fan_out + o] += d;
            }
            if l > 0 {
                let w = &self.params[start..start + fan_in * fan_out];
                let mut upstream = vec![0.0; fan_in];
                for (o, d) in delta.iter().enumerate() {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    upstream.iter_mut().zip(row).for_each(|(u, wv)| *u += d * wv);
                }
                match self.activation {
                    Activation::Tanh => {
                        for (u, a) in upstream.iter_mut().zip(&trace.hidden[l - 1]) {
                            *u *= 1.0 - a * a;
                        }
                    }
                }
                delta = upstream;
            }
        }
        Ok(())
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradient of `sum_i weights[i] * loss(x_i, y_i)` with respect to the model
/// parameters. Weight decay is not included; the optimizer adds it.
pub fn grad(model: &Model, batch: &[(&[f64], usize)], weights: &[f64], spec: LossSpec) -> Result<Vec<f64>> {
    if let LossSpec::ZeroOne = spec {
        return Err(Error::UnsupportedLoss("zero-one"));
    }
    if weights.len() != batch.len() {
        return Err(Error::DimensionMismatch {
            what: "example weights",
            expected: batch.len(),
            got: weights.len(),
        });
    }
    let mut out = vec![0.0; model.params.len()];
    for (&(x, y), &w) in batch.iter().zip(weights) {
        model.check_input(x)?;
        if y >= model.arch.num_labels {
            return Err(Error::invalid(format!("label {y} out of range")));
        }
        if w == 0.0 {
            continue;
        }
        model.accumulate_grad(x, y, w, spec, &mut out)?;
    }
    Ok(out)
}
