//! FFT plumbing over 1D and square 2D periodic grids.
//!
//! Transforms are unnormalized in both directions: `forward` computes
//! `X_k = Σ_j x_j e^{-2πi jk/N}` and `inverse` computes `Σ_k X_k e^{+2πi jk/N}`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Signed integer frequency of FFT bin `j` on an `n`-point axis; the Nyquist
/// bin maps to `-n/2`.
#[inline]
pub fn wavenumber(j: usize, n: usize) -> i64 {
    if j < n.div_ceil(2) {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Forward/inverse plans for an `n`-point 1D axis or an `n × n` square.
#[derive(Clone)]
pub struct SpectralPlan<T: Real> {
    pub dims: usize,
    pub n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> SpectralPlan<T> {
    pub fn new(dims: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            dims,
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    /// Number of points in one field slice.
    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn forward(&self, data: &mut [Complex<T>]) {
        self.apply(data, &self.fwd);
    }

    pub fn inverse(&self, data: &mut [Complex<T>]) {
        self.apply(data, &self.inv);
    }

    fn apply(&self, data: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        debug_assert_eq!(data.len(), self.len());
        if self.dims == 1 {
            fft.process(data);
            return;
        }
        // Rows are contiguous: one batched call, then the same on the transpose.
        fft.process(data);
        transpose_square(data, self.n);
        fft.process(data);
        transpose_square(data, self.n);
    }

    /// Forward transform of a real slice.
    pub fn forward_real(&self, x: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform normalized by `1/N`, returning the real part.
    pub fn inverse_real(&self, mut spec: Vec<Complex<T>>) -> Vec<T> {
        self.inverse(&mut spec);
        let scale = T::one() / T::lit(self.len() as f64);
        spec.into_iter().map(|c| c.re * scale).collect()
    }

    /// Applies the Fourier multiplier `symbol(k)` (k = signed integer
    /// frequencies per axis) to a real periodic slice.
    pub fn multiplier(&self, x: &[T], symbol: impl Fn(&[i64]) -> Complex<T>) -> Vec<T> {
        let mut spec = self.forward_real(x);
        self.scale_by(&mut spec, symbol);
        self.inverse_real(spec)
    }

    /// Multiplies a spectrum in place by `symbol(k)`.
    pub fn scale_by(&self, spec: &mut [Complex<T>], symbol: impl Fn(&[i64]) -> Complex<T>) {
        let n = self.n;
        match self.dims {
            1 => {
                for (j, c) in spec.iter_mut().enumerate() {
                    *c = *c * symbol(&[wavenumber(j, n)]);
                }
            }
            _ => {
                for i in 0..n {
                    let ki = wavenumber(i, n);
                    for j in 0..n {
                        let c = &mut spec[i * n + j];
                        *c = *c * symbol(&[ki, wavenumber(j, n)]);
                    }
                }
            }
        }
    }
}

fn transpose_square<C: Copy>(data: &mut [C], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Mask for 2/3-rule dealiasing: keeps `|k| < n/3` on every axis.
pub fn dealias_keep(k: &[i64], n: usize) -> bool {
    let cutoff = n as f64 / 3.0;
    k.iter().all(|&ki| (ki.abs() as f64) < cutoff)
}
