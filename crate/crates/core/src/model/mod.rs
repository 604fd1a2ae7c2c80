//! Multilayer-perceptron feature extractor with a linear softmax head.
//!
//! `input -> [affine -> relu]* -> affine (features, p-dim) -> affine (logits)`.
//! The feature layer is linear; its output is the embedding the manifold
//! loss acts on.

mod checkpoint;
mod softmax;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use softmax::{batch_cross_entropy, softmax, softmax_ce};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => f.write_str("relu"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            other => Err(Error::InvalidArgument(format!(
                "unknown activation {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
    pub num_classes: usize,
    pub activation: Activation,
    pub init_seed: u64,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, num_classes: usize) -> Self {
        NetworkSpec {
            input_dim,
            hidden_dims: vec![256, 128],
            feature_dim: 64,
            num_classes,
            activation: Activation::Relu,
            init_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.feature_dim == 0
            || self.num_classes == 0
            || self.hidden_dims.contains(&0)
        {
            return Err(Error::InvalidArgument(format!(
                "network dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// `(out, in)` shape of every affine layer, head last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_dims.len() + 2);
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            shapes.push((h, fan_in));
            fan_in = h;
        }
        shapes.push((self.feature_dim, fan_in));
        shapes.push((self.num_classes, self.feature_dim));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(o, i)| o * i + o).sum()
    }

    pub fn to_text(&self) -> String {
        let hidden: Vec<String> = self.hidden_dims.iter().map(usize::to_string).collect();
        format!(
            "input_dim = {}\nhidden_dims = {}\nfeature_dim = {}\nnum_classes = {}\nactivation = {}\ninit_seed = {}\n",
            self.input_dim,
            hidden.join(","),
            self.feature_dim,
            self.num_classes,
            self.activation,
            self.init_seed
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::format("network spec", msg);
        let mut input_dim = None;
        let mut hidden_dims = None;
        let mut feature_dim = None;
        let mut num_classes = None;
        let mut activation = None;
        let mut init_seed = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("bad line {line:?}")))?;
            let value = value.trim();
            let num = |v: &str| {
                v.parse::<usize>()
                    .map_err(|_| bad(format!("bad number {v:?}")))
            };
            match key.trim() {
                "input_dim" => input_dim = Some(num(value)?),
                "hidden_dims" => {
                    hidden_dims = Some(if value.is_empty() {
                        Vec::new()
                    } else {
                        value
                            .split(',')
                            .map(|v| num(v.trim()))
                            .collect::<Result<_>>()?
                    })
                }
                "feature_dim" => feature_dim = Some(num(value)?),
                "num_classes" => num_classes = Some(num(value)?),
                "activation" => activation = Some(value.parse()?),
                "init_seed" => {
                    init_seed = Some(
                        value
                            .parse()
                            .map_err(|_| bad(format!("bad seed {value:?}")))?,
                    )
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let spec = NetworkSpec {
            input_dim: input_dim.ok_or_else(|| bad("missing input_dim".into()))?,
            hidden_dims: hidden_dims.ok_or_else(|| bad("missing hidden_dims".into()))?,
            feature_dim: feature_dim.ok_or_else(|| bad("missing feature_dim".into()))?,
            num_classes: num_classes.ok_or_else(|| bad("missing num_classes".into()))?,
            activation: activation.ok_or_else(|| bad("missing activation".into()))?,
            init_seed: init_seed.ok_or_else(|| bad("missing init_seed".into()))?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Affine layer `y = W x + b` with `W` stored `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(out: usize, input: usize) -> Self {
        Dense {
            weight: Array2::zeros((out, input)),
            bias: Array1::zeros(out),
        }
    }

    fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

/// Network parameters, or a gradient with the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hidden: Vec<Dense>,
    pub feature: Dense,
    pub head: Dense,
}

impl ModelParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let mut layers: Vec<Dense> = spec
            .layer_shapes()
            .into_iter()
            .map(|(o, i)| Dense::zeros(o, i))
            .collect();
        let head = layers.pop().unwrap();
        let feature = layers.pop().unwrap();
        ModelParams {
            hidden: layers,
            feature,
            head,
        }
    }

    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.hidden.iter().chain([&self.feature, &self.head])
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.hidden
            .iter_mut()
            .chain([&mut self.feature, &mut self.head])
    }

    /// Every tensor in declaration order: per layer, weight then bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers()
            .flat_map(|l| {
                [
                    l.weight.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut()
            .flat_map(|l| {
                [
                    l.weight.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Uniform `±sqrt(6 / (fan_in + fan_out))` weights, zero biases.
pub fn init(spec: &NetworkSpec) -> Result<ModelParams> {
    spec.validate()?;
    let mut params = ModelParams::zeros(spec);
    let mut rng = rng::seeded(spec.init_seed);
    for layer in params.layers_mut() {
        let (out, input) = layer.weight.dim();
        let bound = (6.0 / (out + input) as f64).sqrt();
        layer
            .weight
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-bound..bound));
    }
    Ok(params)
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub input: Array2<f64>,
    /// Pre-activations of the hidden layers.
    pub pre: Vec<Array2<f64>>,
    /// Activations of the hidden layers.
    pub post: Vec<Array2<f64>>,
    pub features: Array2<f64>,
    pub logits: Array2<f64>,
}

pub fn forward(params: &ModelParams, input: ArrayView2<f64>) -> Result<ForwardTrace> {
    let expected = params
        .hidden
        .first()
        .unwrap_or(&params.feature)
        .weight
        .ncols();
    if input.ncols() != expected {
        return Err(Error::DimensionMismatch(format!(
            "input has {} columns, network expects {expected}",
            input.ncols()
        )));
    }
    let mut pre = Vec::with_capacity(params.hidden.len());
    let mut post: Vec<Array2<f64>> = Vec::with_capacity(params.hidden.len());
    for layer in &params.hidden {
        let z = layer.apply(post.last().map_or(input, |a| a.view()));
        post.push(z.mapv(|v| v.max(0.0)));
        pre.push(z);
    }
    let features = params
        .feature
        .apply(post.last().map_or(input, |a| a.view()));
    let logits = params.head.apply(features.view());
    Ok(ForwardTrace {
        input: input.to_owned(),
        pre,
        post,
        features,
        logits,
    })
}

fn accumulate(grad: &mut Dense, delta: &Array2<f64>, layer_input: ArrayView2<f64>) {
    grad.weight = delta.t().dot(&layer_input);
    grad.bias = delta.sum_axis(Axis(0));
}

/// Parameter gradients for upstream gradients on the features and logits.
///
/// `dfeatures` carries the manifold-loss contribution; `dlogits` the
/// classification loss. Both are per sample (already scaled as the caller's
/// objective requires).
pub fn backward(
    params: &ModelParams,
    trace: &ForwardTrace,
    dfeatures: ArrayView2<f64>,
    dlogits: ArrayView2<f64>,
) -> Result<ModelParams> {
    if dfeatures.dim() != trace.features.dim() || dlogits.dim() != trace.logits.dim() {
        return Err(Error::DimensionMismatch(format!(
            "upstream gradients {:?}/{:?} vs trace {:?}/{:?}",
            dfeatures.dim(),
            dlogits.dim(),
            trace.features.dim(),
            trace.logits.dim()
        )));
    }
    let mut grads = ModelParams {
        hidden: params
            .hidden
            .iter()
            .map(|l| Dense::zeros(l.weight.nrows(), l.weight.ncols()))
            .collect(),
        feature: Dense::zeros(params.feature.weight.nrows(), params.feature.weight.ncols()),
        head: Dense::zeros(params.head.weight.nrows(), params.head.weight.ncols()),
    };
    let dlogits = dlogits.to_owned();
    accumulate(&mut grads.head, &dlogits, trace.features.view());

    let mut delta = dlogits.dot(&params.head.weight) + dfeatures;
    let feature_input = trace.post.last().map_or(trace.input.view(), |a| a.view());
    accumulate(&mut grads.feature, &delta, feature_input);
    delta = delta.dot(&params.feature.weight);

    for l in (0..params.hidden.len()).rev() {
        delta.zip_mut_with(&trace.pre[l], |d, &z| {
            if z <= 0.0 {
                *d = 0.0
            }
        });
        let layer_input = if l == 0 {
            trace.input.view()
        } else {
            trace.post[l - 1].view()
        };
        accumulate(&mut grads.hidden[l], &delta, layer_input);
        if l > 0 {
            delta = delta.dot(&params.hidden[l].weight);
        }
    }
    Ok(grads)
}

/// `params <- params - lr * grads`.
pub fn sgd_step(params: &mut ModelParams, grads: &ModelParams, lr: f64) {
    for (p, g) in params.layers_mut().zip(grads.layers()) {
        p.weight.scaled_add(-lr, &g.weight);
        p.bias.scaled_add(-lr, &g.bias);
    }
}

/// Predicted class ids (`1..=num_classes`); ties go to the lower class.
pub fn predict(params: &ModelParams, input: ArrayView2<f64>) -> Result<Vec<u16>> {
    let trace = forward(params, input)?;
    Ok(trace
        .logits
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best as u16 + 1
        })
        .collect())
}
