//! Losses, gradients, Adam and the epoch loop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{backward, check_task, encode_input, forward, last_layer_grad, last_layer_jvp, Cache, Workspace};
use super::FnoParams;
use crate::coreset::{hutchinson_diag, CoresetSelection, FeatureMatrix};
use crate::dataset::Sample;
use crate::error::{PicoreError, Result};
use crate::grid::Field;
use crate::residuals::{PiEvaluation, PiWeights};
use crate::scalar::{sum_sq, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Mean squared error against the reference solution.
    Data,
    /// Physics-informed loss; needs no labels.
    Physics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub loss: f64,
    pub wall_seconds: f64,
    pub loss_kind: LossKind,
}

/// Per-sample loss as a function of the network output.
enum OutputLoss<'a, T: Real> {
    Data { residual: Vec<T> },
    Physics(PiEvaluation<'a, T>),
}

impl<T: Real> OutputLoss<'_, T> {
    fn loss(&self) -> T {
        match self {
            OutputLoss::Data { residual } => sum_sq(residual) / T::lit(residual.len() as f64),
            OutputLoss::Physics(e) => e.loss,
        }
    }

    fn gradient(&self) -> Vec<T> {
        match self {
            OutputLoss::Data { residual } => {
                let s = T::lit(2.0 / residual.len() as f64);
                residual.iter().map(|&r| s * r).collect()
            }
            OutputLoss::Physics(e) => e.gradient(),
        }
    }

    fn hvp(&self, v: &[T]) -> Vec<T> {
        match self {
            OutputLoss::Data { residual } => {
                let s = T::lit(2.0 / residual.len() as f64);
                v.iter().map(|&x| s * x).collect()
            }
            OutputLoss::Physics(e) => e.hvp(v),
        }
    }
}

fn evaluate<'a, T: Real>(
    params: &FnoParams<T>,
    ws: &Workspace<T>,
    sample: &'a Sample<T>,
    index: usize,
    kind: LossKind,
    pi: &PiWeights,
) -> Result<(OutputLoss<'a, T>, Cache<T>)> {
    check_task(&params.config, &sample.instance)?;
    let (out, cache) = forward(params, ws, &encode_input(&sample.instance));
    if out.iter().any(|v| !v.is_finite()) {
        return Err(PicoreError::NonFiniteState { step: 0 });
    }
    let loss = match kind {
        LossKind::Data => {
            let truth = sample.solution.as_ref().ok_or(PicoreError::MissingLabels(index))?;
            let residual = out.iter().zip(&truth.values).map(|(&p, &u)| p - u).collect();
            OutputLoss::Data { residual }
        }
        LossKind::Physics => {
            let pred = Field {
                values: out,
                grid: sample.instance.grid.clone(),
            };
            OutputLoss::Physics(PiEvaluation::new(&sample.instance, &pred, pi)?)
        }
    };
    Ok((loss, cache))
}

fn shared_resolution<T: Real>(samples: &[&Sample<T>]) -> Result<usize> {
    let n = samples
        .first()
        .ok_or_else(|| PicoreError::InvalidArgument("empty batch".into()))?
        .instance
        .grid
        .n_points;
    if samples.iter().any(|s| s.instance.grid.n_points != n) {
        return Err(PicoreError::InvalidArgument("batch mixes resolutions".into()));
    }
    Ok(n)
}

/// Weighted loss `Σ wᵢℓᵢ / Σ wᵢ` and its gradient; samples are processed in
/// parallel and reduced in batch order.
fn batch_loss_and_grad<T: Real>(
    params: &FnoParams<T>,
    ws: &Workspace<T>,
    batch: &[(usize, &Sample<T>)],
    weights: &[T],
    kind: LossKind,
    pi: &PiWeights,
) -> Result<(T, Vec<T>)> {
    let total: T = weights.iter().copied().sum();
    if weights.len() != batch.len() || total <= T::zero() || weights.iter().any(|w| !(*w >= T::zero())) {
        return Err(PicoreError::InvalidArgument("weights must be non-negative with positive sum".into()));
    }
    let parts: Vec<Result<(T, Vec<T>)>> = batch
        .par_iter()
        .map(|&(index, sample)| {
            let (loss, cache) = evaluate(params, ws, sample, index, kind, pi)?;
            Ok((loss.loss(), backward(params, ws, &cache, &loss.gradient())))
        })
        .collect();
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); params.len()];
    for (part, &w) in parts.into_iter().zip(weights) {
        let (l, g) = part?;
        let c = w / total;
        loss += c * l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += c * *b;
        }
    }
    Ok((loss, grad))
}

/// Weighted mean loss over a batch and its gradient with respect to every
/// network parameter.
pub fn loss_and_grad<T: Real>(
    params: &FnoParams<T>,
    batch: &[&Sample<T>],
    weights: &[T],
    kind: LossKind,
    pi: &PiWeights,
) -> Result<(T, Vec<T>)> {
    let ws = Workspace::new(&params.config, shared_resolution(batch)?)?;
    let indexed: Vec<_> = batch.iter().copied().enumerate().collect();
    batch_loss_and_grad(params, &ws, &indexed, weights, kind, pi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, lr: f64, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(PicoreError::ShapeMismatch {
            expected: vec![params.len()],
            got: vec![grads.len(), state.m.len()],
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let c1 = T::one() / (T::one() - b1.powi(t));
    let c2 = T::one() / (T::one() - b2.powi(t));
    let (lr, eps) = (T::lit(lr), T::lit(cfg.eps));
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (T::one() - b1) * g;
        state.v[i] = b2 * state.v[i] + (T::one() - b2) * g * g;
        let m_hat = state.m[i] * c1;
        let v_hat = state.v[i] * c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Cosine decay from `lr` at epoch 0 towards `lr_min` at `epochs`.
pub fn cosine_lr(epoch: usize, epochs: usize, lr: f64, lr_min: f64) -> f64 {
    if epochs == 0 {
        return lr;
    }
    let frac = epoch as f64 / epochs as f64;
    lr_min + 0.5 * (lr - lr_min) * (1.0 + (std::f64::consts::PI * frac).cos())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainOptions {
    pub epochs: usize,
    pub loss_kind: LossKind,
    pub lr: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    pub pi: PiWeights,
    pub shuffle_seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 500,
            loss_kind: LossKind::Data,
            lr: 1e-3,
            lr_min: 1e-5,
            batch_size: 16,
            pi: PiWeights::default(),
            shuffle_seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

/// Trains on the selected subset (all samples with unit weights when
/// `selection` is `None`). Each epoch visits the subset once in a seeded
/// shuffled order.
pub fn train<T: Real>(
    params: &FnoParams<T>,
    samples: &[Sample<T>],
    selection: Option<&CoresetSelection>,
    opts: &TrainOptions,
) -> Result<(FnoParams<T>, Vec<TrainRecord>)> {
    if opts.batch_size == 0 {
        return Err(PicoreError::Config("batch_size must be >= 1".into()));
    }
    let mut subset: Vec<(usize, f64)> = match selection {
        Some(sel) => sel.indices.iter().copied().zip(sel.weights.iter().copied()).collect(),
        None => (0..samples.len()).map(|i| (i, 1.0)).collect(),
    };
    subset.sort_by_key(|&(i, _)| i);
    if subset.is_empty() {
        return Err(PicoreError::InvalidArgument("empty training subset".into()));
    }
    for &(i, w) in &subset {
        let sample = samples.get(i).ok_or(PicoreError::BudgetOutOfRange {
            k: i,
            n: samples.len(),
        })?;
        if opts.loss_kind == LossKind::Data && !sample.is_labeled() {
            return Err(PicoreError::MissingLabels(i));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(PicoreError::InvalidArgument(format!("weight of sample {i} is {w}")));
        }
    }
    let mut params = params.clone();
    let mut records = Vec::with_capacity(opts.epochs);
    if opts.epochs == 0 {
        return Ok((params, records));
    }
    let n = samples[subset[0].0].instance.grid.n_points;
    let ws = Workspace::new(&params.config, n)?;
    let mut state = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.shuffle_seed);
    let mut order: Vec<usize> = (0..subset.len()).collect();
    let total_weight: f64 = subset.iter().map(|s| s.1).sum();
    for epoch in 0..opts.epochs {
        let start = Instant::now();
        let lr = cosine_lr(epoch, opts.epochs, opts.lr, opts.lr_min);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(opts.batch_size) {
            let batch: Vec<(usize, &Sample<T>)> = chunk.iter().map(|&k| (subset[k].0, &samples[subset[k].0])).collect();
            let weights: Vec<T> = chunk.iter().map(|&k| T::lit(subset[k].1)).collect();
            let (loss, grad) = batch_loss_and_grad(&params, &ws, &batch, &weights, opts.loss_kind, &opts.pi)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PicoreError::NonFiniteState { step: epoch });
            }
            let bw: f64 = chunk.iter().map(|&k| subset[k].1).sum();
            epoch_loss += loss.as_f64() * bw / total_weight;
            adam_step(&mut params.values, &grad, &mut state, lr, &opts.adam)?;
        }
        records.push(TrainRecord {
            epoch,
            loss: epoch_loss,
            wall_seconds: start.elapsed().as_secs_f64(),
            loss_kind: opts.loss_kind,
        });
    }
    Ok((params, records))
}

/// Per-sample gradients of the individual losses with respect to the final
/// projection map, one column per sample, plus the per-sample losses.
pub fn per_sample_features<T: Real>(
    params: &FnoParams<T>,
    samples: &[Sample<T>],
    kind: LossKind,
    pi: &PiWeights,
) -> Result<FeatureMatrix<T>> {
    let refs: Vec<&Sample<T>> = samples.iter().collect();
    let ws = Workspace::new(&params.config, shared_resolution(&refs)?)?;
    let cols: Vec<Result<(T, Vec<T>)>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let (loss, cache) = evaluate(params, &ws, s, i, kind, pi)?;
            let g = last_layer_grad(&params.config, &cache.q, &loss.gradient(), ws.points);
            Ok((loss.loss(), g))
        })
        .collect();
    let mut losses = Vec::with_capacity(samples.len());
    let mut columns = Vec::with_capacity(samples.len());
    for c in cols {
        let (l, g) = c?;
        losses.push(l);
        columns.push(g);
    }
    FeatureMatrix::new(columns, losses, kind)
}

/// Hessian of the mean per-sample loss with respect to the final projection
/// map, available through exact Hessian-vector products.
pub struct LastLayerHessian<'a, T: Real> {
    params: &'a FnoParams<T>,
    points: usize,
    parts: Vec<(Vec<T>, OutputLoss<'a, T>)>,
}

impl<'a, T: Real> LastLayerHessian<'a, T> {
    pub fn new(params: &'a FnoParams<T>, samples: &'a [Sample<T>], kind: LossKind, pi: &PiWeights) -> Result<Self> {
        let refs: Vec<&Sample<T>> = samples.iter().collect();
        let ws = Workspace::new(&params.config, shared_resolution(&refs)?)?;
        let parts: Result<Vec<_>> = samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let (loss, cache) = evaluate(params, &ws, s, i, kind, pi)?;
                Ok((cache.q, loss))
            })
            .collect();
        Ok(Self {
            params,
            points: ws.points,
            parts: parts?,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.last_layer().len()
    }

    pub fn hvp(&self, v: &[T]) -> Vec<T> {
        let cfg = &self.params.config;
        let cols: Vec<Vec<T>> = self
            .parts
            .par_iter()
            .map(|(q, loss)| {
                let dout = last_layer_jvp(cfg, q, v, self.points);
                last_layer_grad(cfg, q, &loss.hvp(&dout), self.points)
            })
            .collect();
        let scale = T::one() / T::lit(cols.len() as f64);
        let mut out = vec![T::zero(); v.len()];
        for c in cols {
            for (a, b) in out.iter_mut().zip(&c) {
                *a += scale * *b;
            }
        }
        out
    }
}

/// Hutchinson estimate of the last-layer Hessian diagonal of the mean loss.
pub fn last_layer_hessian_diag<T: Real>(
    params: &FnoParams<T>,
    samples: &[Sample<T>],
    kind: LossKind,
    pi: &PiWeights,
    probes: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let h = LastLayerHessian::new(params, samples, kind, pi)?;
    hutchinson_diag(|v: &[T]| h.hvp(v), h.dim(), probes, seed)
}

/// Squared-norm ratio `‖p - u‖² / ‖u‖²`.
pub fn nrmse<T: Real>(prediction: &Field<T>, truth: &Field<T>) -> Result<T> {
    if prediction.values.len() != truth.values.len() {
        return Err(PicoreError::ShapeMismatch {
            expected: truth.shape(),
            got: prediction.shape(),
        });
    }
    let denom = truth.sum_sq();
    if denom == T::zero() {
        return Err(PicoreError::ZeroReference);
    }
    let num: T = prediction
        .values
        .iter()
        .zip(&truth.values)
        .map(|(&p, &u)| (p - u) * (p - u))
        .sum();
    Ok(num / denom.max(T::lit(1e-12)))
}

/// Mean NRMSE of the network over labeled samples.
pub fn evaluate_nrmse<T: Real>(params: &FnoParams<T>, samples: &[Sample<T>]) -> Result<f64> {
    let refs: Vec<&Sample<T>> = samples.iter().collect();
    let ws = Workspace::new(&params.config, shared_resolution(&refs)?)?;
    let vals: Result<Vec<f64>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            check_task(&params.config, &s.instance)?;
            let truth = s.solution.as_ref().ok_or(PicoreError::MissingLabels(i))?;
            let (out, _) = forward(params, &ws, &encode_input(&s.instance));
            let pred = super::network::decode_output(out, &s.instance.grid)?;
            Ok(nrmse(&pred, truth)?.as_f64())
        })
        .collect();
    let vals = vals?;
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}
