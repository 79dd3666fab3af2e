//! Physics-informed coreset selection for neural-operator training.

pub mod coreset;
pub mod dataset;
pub mod error;
pub mod format;
pub mod grid;
pub mod operator_net;
pub mod pde;
pub mod pipeline;
pub mod report;
pub mod residuals;
pub mod scalar;
pub mod spectral;

pub use error::{PicoreError, Result};
pub use grid::{downsample, Boundary, Field, GridSpec};
pub use scalar::Real;
pub use coreset::{budget, CoresetSelection, FeatureMatrix, Selector};
pub use dataset::{Dataset, DatasetSpec, Labeler, ReferenceSolver, Sample, Split};
pub use operator_net::{FnoConfig, FnoParams, LossKind};
pub use pde::{PdeInstance, PdeKind, PdeParams, SolverOptions};
pub use pipeline::{account_costs, run_experiment, CostLedger, ExperimentConfig, ExperimentReport, Mode};
pub use residuals::PiWeights;

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Instance64 = PdeInstance<f64>;
pub type Instance32 = PdeInstance<f32>;
pub type Sample64 = Sample<f64>;
pub type Sample32 = Sample<f32>;
pub type Params64 = FnoParams<f64>;
pub type Params32 = FnoParams<f32>;
pub type Features64 = FeatureMatrix<f64>;
pub type Features32 = FeatureMatrix<f32>;
