//! Joint training: cross-entropy plus the weighted manifold-embedding loss,
//! optimised with plain SGD on mini-batches.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::ConfigMap;
use crate::error::{Error, Result};
use crate::loss::{loss_gradients, total_loss, FeatureBatch, LossParams, LossTerms};
use crate::manifold::ManifoldParams;
use crate::model::{
    backward, batch_cross_entropy, forward, init, sgd_step, ModelParams, NetworkSpec,
};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub iterations: usize,
    pub batch_size: usize,
    /// Weight of the manifold block against cross-entropy.
    pub lambda: f64,
    pub loss: LossParams,
    pub manifold: ManifoldParams,
    /// Root seed; batching draws from its own stream.
    pub seed: u64,
    pub log_every: usize,
    /// Record elapsed milliseconds in the log. Off by default so that logs
    /// are byte-reproducible.
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            iterations: 5000,
            batch_size: 84,
            lambda: 1e-4,
            loss: LossParams::default(),
            manifold: ManifoldParams::default(),
            seed: 0,
            log_every: 50,
            wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.iterations == 0 || self.batch_size == 0 || self.log_every == 0 {
            return bad("iterations, batch_size and log_every must be positive".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        self.loss
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.manifold
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    /// Consumes the training keys of a config file, defaulting the rest.
    pub fn from_config(cfg: &mut ConfigMap) -> Result<Self> {
        let d = TrainConfig::default();
        let out = TrainConfig {
            lr: cfg.take_or("lr", d.lr)?,
            iterations: cfg.take_or("iterations", d.iterations)?,
            batch_size: cfg.take_or("batch_size", d.batch_size)?,
            lambda: cfg.take_or("lambda", d.lambda)?,
            loss: LossParams {
                delta: cfg.take_or("delta", d.loss.delta)?,
                beta: cfg.take_or("beta", d.loss.beta)?,
                hinge: cfg.take_or("hinge", d.loss.hinge)?,
            },
            manifold: ManifoldParams {
                k: cfg.take_or("k", d.manifold.k)?,
                b: cfg.take_or("b", d.manifold.b)?,
            },
            seed: cfg.take_or("seed", d.seed)?,
            log_every: cfg.take_or("log_every", d.log_every)?,
            wall_clock: cfg.take_or("wall_clock", d.wall_clock)?,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        format!(
            "lr = {}\niterations = {}\nbatch_size = {}\nlambda = {}\ndelta = {}\nbeta = {}\nhinge = {}\nk = {}\nb = {}\nseed = {}\nlog_every = {}\nwall_clock = {}\n",
            self.lr,
            self.iterations,
            self.batch_size,
            self.lambda,
            self.loss.delta,
            self.loss.beta,
            self.loss.hinge,
            self.manifold.k,
            self.manifold.b,
            self.seed,
            self.log_every,
            self.wall_clock
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub ce: f64,
    pub l0: f64,
    pub ld: f64,
    pub total: f64,
    pub grad_norm: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    pub warnings: Vec<String>,
}

impl TrainLog {
    pub const HEADER: &'static str = "iter,ce,l0,ld,total,grad_norm,wall_ms";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iter, r.ce, r.l0, r.ld, r.total, r.grad_norm, r.wall_ms
            )
            .unwrap();
        }
        out
    }
}

/// Indices of one mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledBatch {
    pub indices: Vec<usize>,
    pub with_replacement: bool,
}

/// Uniform sampling without replacement; falls back to sampling with
/// replacement when the batch is larger than the set.
pub fn sample_batch(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<SampledBatch> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "cannot sample from an empty set".into(),
        ));
    }
    if batch_size <= n {
        Ok(SampledBatch {
            indices: index::sample(rng, n, batch_size).into_vec(),
            with_replacement: false,
        })
    } else {
        Ok(SampledBatch {
            indices: (0..batch_size).map(|_| rng.random_range(0..n)).collect(),
            with_replacement: true,
        })
    }
}

/// Value and parameter gradient of `ce_mean + lambda * (L0 + beta * Ld)` on
/// one fixed batch.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub ce: f64,
    pub terms: LossTerms,
    pub total: f64,
    pub grads: ModelParams,
}

/// Evaluates the joint objective and its exact parameter gradient. When
/// `lambda` is zero the manifold terms are reported but never touch the
/// gradient; `report_terms = false` skips computing them in that case.
pub fn composed_gradients(
    params: &ModelParams,
    inputs: ArrayView2<f64>,
    labels: &[u16],
    tags: &[(u16, usize)],
    lambda: f64,
    loss: &LossParams,
    report_terms: bool,
) -> Result<StepOutcome> {
    let trace = forward(params, inputs)?;
    let (ce, dlogits) = batch_cross_entropy(trace.logits.view(), labels)?;
    let batch = FeatureBatch::new(trace.features.view(), tags)?;
    let (terms, dfeatures) = if lambda > 0.0 {
        let report = loss_gradients(&batch, loss);
        (report.terms, report.grads * lambda)
    } else {
        let terms = if report_terms {
            total_loss(&batch, loss)
        } else {
            LossTerms {
                l0: 0.0,
                ld: 0.0,
                total: 0.0,
            }
        };
        (terms, Array2::zeros(trace.features.raw_dim()))
    };
    let grads = backward(params, &trace, dfeatures.view(), dlogits.view())?;
    Ok(StepOutcome {
        ce,
        terms,
        total: ce + lambda * terms.total,
        grads,
    })
}

/// Trains from the initialisation given by `spec`. `tags` holds the
/// `(class, sub-class)` of every training sample and its class must agree
/// with `labels`.
pub fn train(
    inputs: ArrayView2<f64>,
    labels: &[u16],
    tags: &[(u16, usize)],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    let n = inputs.nrows();
    if labels.len() != n || tags.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} samples, {} labels, {} partition tags",
            labels.len(),
            tags.len()
        )));
    }
    if let Some(i) = (0..n).find(|&i| tags[i].0 != labels[i]) {
        return Err(Error::InvalidArgument(format!(
            "sample {i} is labelled {} but partitioned into class {}",
            labels[i], tags[i].0
        )));
    }
    let mut params = init(spec)?;
    let mut rng = stream_rng(cfg.seed, Stream::Batching);
    let mut log = TrainLog::default();
    let start = Instant::now();

    for iter in 1..=cfg.iterations {
        let batch = sample_batch(n, cfg.batch_size, &mut rng)?;
        if batch.with_replacement && log.warnings.is_empty() {
            log.warnings.push(format!(
                "batch size {} exceeds {n} training samples; sampling with replacement",
                cfg.batch_size
            ));
        }
        let x = inputs.select(Axis(0), &batch.indices);
        let y: Vec<u16> = batch.indices.iter().map(|&i| labels[i]).collect();
        let t: Vec<(u16, usize)> = batch.indices.iter().map(|&i| tags[i]).collect();
        let logging = iter % cfg.log_every == 0 || iter == cfg.iterations;
        let step = composed_gradients(&params, x.view(), &y, &t, cfg.lambda, &cfg.loss, logging)?;
        if !step.total.is_finite() || !step.grads.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: iter,
                ce: step.ce,
                l0: step.terms.l0,
                ld: step.terms.ld,
                batch: batch.indices,
            });
        }
        let grad_norm = step.grads.l2_norm();
        sgd_step(&mut params, &step.grads, cfg.lr);
        if logging {
            log.rows.push(LogRow {
                iter,
                ce: step.ce,
                l0: step.terms.l0,
                ld: step.terms.ld,
                total: step.total,
                grad_norm,
                wall_ms: if cfg.wall_clock {
                    start.elapsed().as_millis() as u64
                } else {
                    0
                },
            });
        }
    }
    Ok((params, log))
}
