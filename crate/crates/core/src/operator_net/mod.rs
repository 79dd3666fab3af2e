//! Fourier Neural Operator with hand-written reverse mode, Adam, and the
//! training loops used by the pipeline.

mod network;
mod training;

use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PicoreError, Result};
use crate::format::Record;
use crate::pde::PdeKind;
use crate::scalar::Real;

pub use network::{decode_output, encode_input, fno_forward, fno_forward_channels};
pub use training::{
    adam_step, cosine_lr, evaluate_nrmse, last_layer_hessian_diag, loss_and_grad, nrmse, per_sample_features,
    train, AdamConfig, AdamState, LastLayerHessian, LossKind, TrainOptions, TrainRecord,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Gelu,
    Identity,
}

impl Activation {
    #[inline]
    pub(crate) fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Gelu => crate::scalar::gelu(x),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub(crate) fn grad<T: Real>(self, x: T) -> T {
        match self {
            Activation::Gelu => crate::scalar::gelu_grad(x),
            Activation::Identity => T::one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnoConfig {
    pub spatial_dims: usize,
    /// Retained Fourier modes per axis.
    pub modes: usize,
    pub width: usize,
    pub n_layers: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub activation: Activation,
}

impl FnoConfig {
    /// Task encoding: the input function plus one coordinate channel per
    /// spatial axis; one output channel per stored frame.
    pub fn for_task(kind: PdeKind, n_time: usize, modes: usize, width: usize, n_layers: usize) -> Self {
        let dims = kind.spatial_dims();
        Self {
            spatial_dims: dims,
            modes,
            width,
            n_layers,
            in_channels: 1 + dims,
            out_channels: if kind.is_dynamic() { n_time } else { 1 },
            activation: Activation::Gelu,
        }
    }

    /// Default architecture: 16 modes in 1D, 12 per axis in 2D, width 32,
    /// four layers.
    pub fn default_for(kind: PdeKind, n_time: usize) -> Self {
        let modes = if kind.spatial_dims() == 1 { 16 } else { 12 };
        Self::for_task(kind, n_time, modes, 32, 4)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PicoreError::Config(m.to_string()));
        if !(1..=2).contains(&self.spatial_dims) {
            return bad("spatial_dims must be 1 or 2");
        }
        if self.modes == 0 || self.width == 0 || self.n_layers == 0 {
            return bad("modes, width and n_layers must be >= 1");
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return bad("channel counts must be >= 1");
        }
        Ok(())
    }

    /// Complex weights per (input, output) channel pair in one spectral layer.
    pub fn n_modes(&self) -> usize {
        match self.spatial_dims {
            1 => self.modes,
            _ => 2 * self.modes * self.modes,
        }
    }

    pub fn n_params(&self) -> usize {
        self.layout().total
    }

    pub(crate) fn layout(&self) -> Layout {
        let w = self.width;
        let mut at = 0;
        let mut take = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let lift_w = take(self.in_channels * w);
        let lift_b = take(w);
        let layers = (0..self.n_layers)
            .map(|_| LayerLayout {
                spectral: take(2 * w * w * self.n_modes()),
                bypass_w: take(w * w),
                bypass_b: take(w),
            })
            .collect();
        let proj1_w = take(w * w);
        let proj1_b = take(w);
        let proj2_w = take(w * self.out_channels);
        let proj2_b = take(self.out_channels);
        Layout {
            lift_w,
            lift_b,
            layers,
            proj1_w,
            proj1_b,
            proj2_w,
            proj2_b,
            total: at,
        }
    }

    /// Smallest grid resolution the network can be evaluated at.
    pub fn min_resolution(&self) -> usize {
        2 * self.modes
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LayerLayout {
    /// Interleaved (re, im) pairs indexed `[in][out][mode]`.
    pub spectral: Range<usize>,
    pub bypass_w: Range<usize>,
    pub bypass_b: Range<usize>,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    pub lift_w: Range<usize>,
    pub lift_b: Range<usize>,
    pub layers: Vec<LayerLayout>,
    pub proj1_w: Range<usize>,
    pub proj1_b: Range<usize>,
    pub proj2_w: Range<usize>,
    pub proj2_b: Range<usize>,
    pub total: usize,
}

/// All trainable parameters as one flat vector; affine weights are stored
/// `[out][in]` row-major followed by their bias.
#[derive(Clone, Debug, PartialEq)]
pub struct FnoParams<T> {
    pub config: FnoConfig,
    pub values: Vec<T>,
}

impl<T: Real> FnoParams<T> {
    pub fn new(config: FnoConfig, values: Vec<T>) -> Result<Self> {
        config.validate()?;
        if values.len() != config.n_params() {
            return Err(PicoreError::ShapeMismatch {
                expected: vec![config.n_params()],
                got: vec![values.len()],
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PicoreError::NonFiniteState { step: 0 });
        }
        Ok(Self { config, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index range of the final projection map (weights then bias).
    pub fn last_layer(&self) -> Range<usize> {
        let l = self.config.layout();
        l.proj2_w.start..l.proj2_b.end
    }

    pub fn cast<U: Real>(&self) -> FnoParams<U> {
        FnoParams {
            config: self.config.clone(),
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Writes a checkpoint: config JSON in the header, parameters as payload.
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::to_string(&self.config)?;
        let data = self.values.iter().map(|v| v.as_f64()).collect();
        Record::new(vec![self.values.len()], meta, data)?.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let rec = Record::load(path)?;
        let config: FnoConfig = serde_json::from_str(&rec.meta)?;
        Self::new(config, rec.data.into_iter().map(T::lit).collect())
    }
}

/// Spectral weights uniform in `[0, 1)/width²` (real and imaginary parts),
/// affine maps uniform in `±1/sqrt(fan_in)`.
pub fn fno_init<T: Real>(config: &FnoConfig, seed: u64) -> Result<FnoParams<T>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = config.layout();
    let mut values = vec![T::zero(); layout.total];
    let mut uniform = |r: Range<usize>, lo: f64, hi: f64, values: &mut [T]| {
        for v in &mut values[r] {
            *v = T::lit(rng.random_range(lo..hi));
        }
    };
    let fan = |n: usize| 1.0 / (n as f64).sqrt();
    let w = config.width;
    let a = fan(config.in_channels);
    uniform(layout.lift_w.clone(), -a, a, &mut values);
    uniform(layout.lift_b.clone(), -a, a, &mut values);
    let spec_scale = 1.0 / (w * w) as f64;
    for l in &layout.layers {
        uniform(l.spectral.clone(), 0.0, spec_scale, &mut values);
        uniform(l.bypass_w.clone(), -fan(w), fan(w), &mut values);
        uniform(l.bypass_b.clone(), -fan(w), fan(w), &mut values);
    }
    for r in [&layout.proj1_w, &layout.proj1_b, &layout.proj2_w, &layout.proj2_b] {
        uniform(r.clone(), -fan(w), fan(w), &mut values);
    }
    FnoParams::new(config.clone(), values)
}
