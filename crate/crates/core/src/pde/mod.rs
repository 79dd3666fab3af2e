//! Benchmark PDEs: input samplers, reference solvers and the problem types
//! they share.

mod advection;
mod burgers;
mod darcy;
mod navier_stokes;
mod sampling;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PicoreError, Result};
use crate::grid::{Field, GridSpec};
use crate::scalar::Real;

pub use advection::solve_advection;
pub use burgers::solve_burgers;
pub use darcy::{darcy_flux_residual, solve_darcy};
pub use navier_stokes::{ns_forcing, solve_navier_stokes};
pub(crate) use navier_stokes::VorticityOps;
pub use sampling::{
    sample_darcy_coefficient, sample_ns_vorticity, sample_sinusoidal_ic, sinusoid_ic, IcSpec,
    Wave, DARCY_HIGH, DARCY_LOW,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeKind {
    Advection,
    Burgers,
    Darcy,
    NavierStokes,
}

impl PdeKind {
    pub fn is_dynamic(self) -> bool {
        !matches!(self, PdeKind::Darcy)
    }

    pub fn spatial_dims(self) -> usize {
        match self {
            PdeKind::Advection | PdeKind::Burgers => 1,
            PdeKind::Darcy | PdeKind::NavierStokes => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PdeKind::Advection => "advection",
            PdeKind::Burgers => "burgers",
            PdeKind::Darcy => "darcy",
            PdeKind::NavierStokes => "navier_stokes",
        }
    }
}

impl std::str::FromStr for PdeKind {
    type Err = PicoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "advection" => Ok(PdeKind::Advection),
            "burgers" => Ok(PdeKind::Burgers),
            "darcy" => Ok(PdeKind::Darcy),
            "navier_stokes" | "ns" | "navierstokes" => Ok(PdeKind::NavierStokes),
            other => Err(PicoreError::Config(format!("unknown PDE kind {other:?}"))),
        }
    }
}

/// Physical parameters, one variant per PDE.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PdeParams {
    /// `u_t + speed u_x = 0`.
    Advection { speed: f64 },
    /// `u_t + (u²/2)_x = (viscosity/π) u_xx`.
    Burgers { viscosity: f64 },
    /// `-∇·(a∇u) = forcing`, `u = 0` on the boundary.
    Darcy { forcing: f64 },
    /// Vorticity form with forcing
    /// `forcing_amplitude · [sin 2π(x₁+x₂) + cos 2π(x₁+x₂)]`.
    NavierStokes { viscosity: f64, forcing_amplitude: f64 },
}

impl PdeParams {
    pub fn kind(&self) -> PdeKind {
        match self {
            PdeParams::Advection { .. } => PdeKind::Advection,
            PdeParams::Burgers { .. } => PdeKind::Burgers,
            PdeParams::Darcy { .. } => PdeKind::Darcy,
            PdeParams::NavierStokes { .. } => PdeKind::NavierStokes,
        }
    }

    pub fn default_for(kind: PdeKind) -> Self {
        match kind {
            PdeKind::Advection => PdeParams::Advection { speed: 0.4 },
            PdeKind::Burgers => PdeParams::Burgers { viscosity: 0.01 },
            PdeKind::Darcy => PdeParams::Darcy { forcing: 1.0 },
            PdeKind::NavierStokes => PdeParams::NavierStokes {
                viscosity: 1e-3,
                forcing_amplitude: 0.1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(PicoreError::InvalidArgument(format!("{name} must be > 0, got {v}")))
            }
        };
        match *self {
            PdeParams::Advection { speed } => positive("advection speed", speed),
            PdeParams::Burgers { viscosity } => positive("viscosity", viscosity),
            PdeParams::Darcy { forcing } => {
                if forcing.is_finite() && forcing >= 0.0 {
                    Ok(())
                } else {
                    Err(PicoreError::InvalidArgument(format!(
                        "darcy forcing must be >= 0, got {forcing}"
                    )))
                }
            }
            PdeParams::NavierStokes {
                viscosity,
                forcing_amplitude,
            } => {
                positive("viscosity", viscosity)?;
                if forcing_amplitude.is_finite() {
                    Ok(())
                } else {
                    Err(PicoreError::InvalidArgument("non-finite forcing".into()))
                }
            }
        }
    }
}

/// One problem: parameters, the input function and the solution grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeInstance<T> {
    pub params: PdeParams,
    /// Initial condition (dynamic kinds) or coefficient field (Darcy), on the
    /// spatial part of `grid`.
    pub input: Field<T>,
    /// Grid of the solution, including the time axis for dynamic kinds.
    pub grid: GridSpec,
}

impl<T: Real> PdeInstance<T> {
    pub fn new(params: PdeParams, input: Field<T>, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        grid.validate()?;
        let kind = params.kind();
        if grid.spatial_dims != kind.spatial_dims() {
            return Err(PicoreError::InvalidGrid(format!(
                "{} needs {}D grids",
                kind.name(),
                kind.spatial_dims()
            )));
        }
        if kind.is_dynamic() != grid.is_dynamic() {
            return Err(PicoreError::InvalidGrid(format!(
                "{} needs n_time {} but grid has {}",
                kind.name(),
                if kind.is_dynamic() { ">= 2" } else { "= 0" },
                grid.n_time
            )));
        }
        if input.grid != grid.spatial_only() {
            return Err(PicoreError::ShapeMismatch {
                expected: grid.spatial_only().shape(),
                got: input.shape(),
            });
        }
        if kind == PdeKind::Darcy && input.values.iter().any(|&a| a <= T::zero()) {
            return Err(PicoreError::InvalidArgument(
                "darcy coefficient must be strictly positive".into(),
            ));
        }
        Ok(Self { params, input, grid })
    }

    pub fn kind(&self) -> PdeKind {
        self.params.kind()
    }
}

/// A problem together with its reference solution.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample<T> {
    pub instance: PdeInstance<T>,
    pub solution: Field<T>,
    pub sim_seconds: f64,
}

/// Numerical knobs of the reference solvers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Internal steps between stored frames (Burgers, Navier–Stokes).
    pub n_substeps: usize,
    /// Relative residual tolerance of the Darcy pseudo-time iteration.
    pub darcy_tol: f64,
    pub darcy_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_substeps: 100,
            darcy_tol: 1e-8,
            darcy_max_iter: 200_000,
        }
    }
}

/// Solves one instance with the matching reference solver.
pub fn solve<T: Real>(instance: &PdeInstance<T>, opts: &SolverOptions) -> Result<LabeledSample<T>> {
    match instance.kind() {
        PdeKind::Advection => solve_advection(instance),
        PdeKind::Burgers => solve_burgers(instance, opts.n_substeps),
        PdeKind::Darcy => solve_darcy(instance, opts.darcy_tol, opts.darcy_max_iter),
        PdeKind::NavierStokes => solve_navier_stokes(instance, opts.n_substeps),
    }
}

/// Solves independent instances in parallel; results keep input order.
pub fn solve_many<T: Real>(
    instances: &[PdeInstance<T>],
    opts: &SolverOptions,
) -> Vec<Result<LabeledSample<T>>> {
    instances.par_iter().map(|inst| solve(inst, opts)).collect()
}

pub(crate) fn timed<R>(f: impl FnOnce() -> Result<R>) -> Result<(R, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

pub(crate) fn check_finite<T: Real>(values: &[T], step: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PicoreError::NonFiniteState { step })
    }
}

pub(crate) fn expect_kind<T: Real>(instance: &PdeInstance<T>, kind: PdeKind) -> Result<()> {
    if instance.kind() == kind {
        Ok(())
    } else {
        Err(PicoreError::InvalidArgument(format!(
            "expected a {} instance, got {}",
            kind.name(),
            instance.kind().name()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instance_validation() {
        let grid = GridSpec::periodic_1d(16, 5, 1.0);
        let input = Field::<f64>::zeros(grid.spatial_only());
        assert!(PdeInstance::new(PdeParams::Advection { speed: 1.0 }, input.clone(), grid.clone()).is_ok());
        assert!(PdeInstance::new(PdeParams::Advection { speed: -1.0 }, input.clone(), grid.clone()).is_err());
        // stationary grid for a dynamic PDE
        assert!(PdeInstance::new(
            PdeParams::Burgers { viscosity: 0.1 },
            input.clone(),
            grid.spatial_only()
        )
        .is_err());
        let dgrid = GridSpec::dirichlet_2d(8);
        let zero_coeff = Field::<f64>::zeros(dgrid.clone());
        assert!(PdeInstance::new(PdeParams::Darcy { forcing: 1.0 }, zero_coeff, dgrid).is_err());
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("navier-stokes".parse::<PdeKind>().unwrap(), PdeKind::NavierStokes);
        assert!("heat".parse::<PdeKind>().is_err());
    }
}
