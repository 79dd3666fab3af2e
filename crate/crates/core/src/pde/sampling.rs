//! Random input functions: sinusoidal initial conditions, binary Darcy
//! permeability and Gaussian-random-field vorticity.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PicoreError, Result};
use crate::grid::{Field, GridSpec};
use crate::scalar::Real;
use crate::spectral::{wavenumber, SpectralPlan};

pub const DARCY_LOW: f64 = 3.0;
pub const DARCY_HIGH: f64 = 12.0;

/// Distribution of the sinusoidal initial conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IcSpec {
    /// Inclusive range for the number of superposed waves.
    pub n_waves: (usize, usize),
    /// Inclusive range of integer mode numbers `n_i`.
    pub modes: (usize, usize),
    pub p_abs: f64,
    pub p_window: f64,
}

impl Default for IcSpec {
    fn default() -> Self {
        Self {
            n_waves: (2, 2),
            modes: (1, 8),
            p_abs: 0.1,
            p_window: 0.1,
        }
    }
}

/// One term `A sin(2π n x + φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wave {
    pub amplitude: f64,
    pub mode: usize,
    pub phase: f64,
}

/// Assembles `Σ A sin(2π n x / L + φ)`, optionally followed by `|·|` and the
/// window `sin²(πx/L)`.
pub fn sinusoid_ic<T: Real>(grid: &GridSpec, waves: &[Wave], abs: bool, window: bool) -> Field<T> {
    let l = grid.domain_length;
    Field::from_fn(grid.spatial_only(), |x| {
        let mut u: f64 = waves
            .iter()
            .map(|w| w.amplitude * (2.0 * PI * w.mode as f64 * x[0] / l + w.phase).sin())
            .sum();
        if abs {
            u = u.abs();
        }
        if window {
            u *= (PI * x[0] / l).sin().powi(2);
        }
        u
    })
}

/// Random superposition of sinusoidal modes on a 1D grid.
pub fn sample_sinusoidal_ic<T: Real>(seed: u64, grid: &GridSpec, spec: &IcSpec) -> Result<Field<T>> {
    grid.validate()?;
    if grid.spatial_dims != 1 {
        return Err(PicoreError::InvalidGrid("sinusoidal ICs need a 1D grid".into()));
    }
    let (wmin, wmax) = spec.n_waves;
    let (mmin, mmax) = spec.modes;
    if wmin == 0 || wmin > wmax || mmin == 0 || mmin > mmax {
        return Err(PicoreError::InvalidArgument(format!(
            "empty wave/mode range: waves {wmin}..={wmax}, modes {mmin}..={mmax}"
        )));
    }
    if grid.n_points < 2 * mmax {
        return Err(PicoreError::InvalidGrid(format!(
            "{} points cannot resolve mode {mmax}",
            grid.n_points
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_waves = rng.random_range(wmin..=wmax);
    let waves: Vec<Wave> = (0..n_waves)
        .map(|_| Wave {
            mode: rng.random_range(mmin..=mmax),
            amplitude: rng.random::<f64>(),
            // open interval (0, 2π)
            phase: 2.0 * PI * (1.0 - rng.random::<f64>()),
        })
        .collect();
    let abs = rng.random::<f64>() < spec.p_abs;
    let window = rng.random::<f64>() < spec.p_window;
    Ok(sinusoid_ic(grid, &waves, abs, window))
}

/// Real, zero-mean periodic Gaussian random field with spectral amplitude
/// `amp(|k|²)` per Fourier mode. Returns the field and the largest imaginary
/// residue left by the inverse transform.
fn gaussian_random_field<T: Real>(
    rng: &mut ChaCha8Rng,
    n: usize,
    amp: impl Fn(f64) -> f64,
) -> (Vec<T>, f64) {
    let plan = SpectralPlan::<T>::new(2, n);
    let raw: Vec<Complex<f64>> = (0..n * n)
        .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let mirror = |i: usize| (n - i) % n;
    let mut spec = vec![Complex::new(T::zero(), T::zero()); n * n];
    for i in 0..n {
        for j in 0..n {
            let (k1, k2) = (wavenumber(i, n), wavenumber(j, n));
            let k2sq = (k1 * k1 + k2 * k2) as f64;
            if k2sq == 0.0 {
                continue;
            }
            let c = amp(k2sq);
            // Hermitian part of the white-noise coefficient.
            let z = (raw[i * n + j] + raw[mirror(i) * n + mirror(j)].conj()) * 0.5 * c;
            spec[i * n + j] = Complex::new(T::lit(z.re), T::lit(z.im));
        }
    }
    plan.inverse(&mut spec);
    let imag = spec.iter().fold(0.0f64, |m, c| m.max(c.im.as_f64().abs()));
    (spec.into_iter().map(|c| c.re).collect(), imag)
}

/// Binary permeability: a GRF with covariance `(-Δ + 9I)^{-2}` thresholded
/// at zero, positive → 12, negative → 3.
pub fn sample_darcy_coefficient<T: Real>(seed: u64, grid: &GridSpec) -> Result<Field<T>> {
    grid.validate()?;
    if grid.spatial_dims != 2 {
        return Err(PicoreError::InvalidGrid("darcy coefficients need a 2D grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let four_pi2 = 4.0 * PI * PI;
    let (g, _) = gaussian_random_field::<T>(&mut rng, grid.n_points, |k2| 1.0 / (four_pi2 * k2 + 9.0));
    let values = g
        .into_iter()
        .map(|v| T::lit(if v >= T::zero() { DARCY_HIGH } else { DARCY_LOW }))
        .collect();
    Field::new(values, grid.spatial_only())
}

/// Spectral amplitude of the vorticity prior `7^{3/2}(-Δ + 49I)^{-2.5}`.
pub(crate) fn ns_amplitude(k2: f64) -> f64 {
    7f64.powf(0.75) * (4.0 * PI * PI * k2 + 49.0).powf(-1.25)
}

/// Initial vorticity `ω₀ ~ N(0, 7^{3/2}(-Δ + 49I)^{-2.5})` on a periodic square.
pub fn sample_ns_vorticity<T: Real>(seed: u64, grid: &GridSpec) -> Result<Field<T>> {
    grid.validate()?;
    if grid.spatial_dims != 2 {
        return Err(PicoreError::InvalidGrid("vorticity needs a 2D grid".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, imag) = gaussian_random_field::<T>(&mut rng, grid.n_points, ns_amplitude);
    debug_assert!(imag < 1e-3, "imaginary residue {imag}");
    Field::new(w, grid.spatial_only())
}

#[cfg(test)]
pub(crate) fn ns_vorticity_with_residue(seed: u64, n: usize) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gaussian_random_field::<f64>(&mut rng, n, ns_amplitude)
}
