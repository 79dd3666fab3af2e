use std::f64::consts::PI;

use num_complex::Complex;

use super::{check_finite, expect_kind, timed, LabeledSample, PdeInstance, PdeKind, PdeParams};
use crate::error::{PicoreError, Result};
use crate::grid::{Field, GridSpec};
use crate::scalar::Real;
use crate::spectral::{dealias_keep, wavenumber, SpectralPlan};

type C<T> = Complex<T>;

/// Forcing `amp · [sin 2π(x₁+x₂) + cos 2π(x₁+x₂)]` on the spatial grid.
pub fn ns_forcing<T: Real>(grid: &GridSpec, amplitude: f64) -> Field<T> {
    let l = grid.domain_length;
    Field::from_fn(grid.spatial_only(), |x| {
        let s = 2.0 * PI * (x[0] + x[1]) / l;
        amplitude * (s.sin() + s.cos())
    })
}

/// Spectral operators of the vorticity equation on an `n × n` periodic grid.
pub(crate) struct VorticityOps<T: Real> {
    pub plan: SpectralPlan<T>,
    /// `2π k₁ / L`, `2π k₂ / L` per bin.
    kx: Vec<T>,
    ky: Vec<T>,
    /// `1 / (4π²|k|²/L²)`, zero at k = 0.
    inv_lap: Vec<T>,
    /// `4π²|k|²/L²`.
    lap: Vec<T>,
    keep: Vec<bool>,
}

impl<T: Real> VorticityOps<T> {
    pub fn new(n: usize, l: f64) -> Self {
        let mut kx = Vec::with_capacity(n * n);
        let mut ky = Vec::with_capacity(n * n);
        let mut inv_lap = Vec::with_capacity(n * n);
        let mut lap = Vec::with_capacity(n * n);
        let mut keep = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (k1, k2) = (wavenumber(i, n), wavenumber(j, n));
                let (a, b) = (2.0 * PI * k1 as f64 / l, 2.0 * PI * k2 as f64 / l);
                let k2sum = a * a + b * b;
                kx.push(T::lit(a));
                ky.push(T::lit(b));
                lap.push(T::lit(k2sum));
                inv_lap.push(if k2sum > 0.0 { T::lit(1.0 / k2sum) } else { T::zero() });
                keep.push(dealias_keep(&[k1, k2], n));
            }
        }
        Self {
            plan: SpectralPlan::new(2, n),
            kx,
            ky,
            inv_lap,
            lap,
            keep,
        }
    }

    /// Velocity `(∂ψ/∂x₂, -∂ψ/∂x₁)` with `Δψ = -ω`, from a vorticity spectrum.
    pub fn velocity_from_spectrum(&self, w_hat: &[C<T>]) -> (Vec<T>, Vec<T>) {
        let u_hat: Vec<C<T>> = (0..w_hat.len())
            .map(|c| w_hat[c] * C::new(T::zero(), self.ky[c] * self.inv_lap[c]))
            .collect();
        let v_hat: Vec<C<T>> = (0..w_hat.len())
            .map(|c| w_hat[c] * C::new(T::zero(), -self.kx[c] * self.inv_lap[c]))
            .collect();
        (self.plan.inverse_real(u_hat), self.plan.inverse_real(v_hat))
    }

    /// Velocity of a physical vorticity slice.
    pub fn velocity(&self, w: &[T]) -> (Vec<T>, Vec<T>) {
        self.velocity_from_spectrum(&self.plan.forward_real(w))
    }

    /// Transpose of [`Self::velocity`]: maps cotangents `(gu, gv)` back to
    /// a vorticity cotangent. Both symbols are purely imaginary, so the
    /// transpose negates them.
    pub fn velocity_transpose(&self, gu: &[T], gv: &[T]) -> Vec<T> {
        let su = self.plan.forward_real(gu);
        let sv = self.plan.forward_real(gv);
        let spec: Vec<C<T>> = (0..su.len())
            .map(|c| {
                su[c] * C::new(T::zero(), -self.ky[c] * self.inv_lap[c])
                    + sv[c] * C::new(T::zero(), self.kx[c] * self.inv_lap[c])
            })
            .collect();
        self.plan.inverse_real(spec)
    }

    /// Spectrum of `-(u·∇ω)` computed with 2/3 dealiasing, plus `f̂`.
    fn rhs(&self, w_hat: &[C<T>], f_hat: &[C<T>]) -> (Vec<C<T>>, T) {
        let zero = C::new(T::zero(), T::zero());
        let masked: Vec<C<T>> = w_hat
            .iter()
            .zip(&self.keep)
            .map(|(&c, &k)| if k { c } else { zero })
            .collect();
        let (u, v) = self.velocity_from_spectrum(&masked);
        let dwx: Vec<C<T>> = (0..masked.len())
            .map(|c| masked[c] * C::new(T::zero(), self.kx[c]))
            .collect();
        let dwy: Vec<C<T>> = (0..masked.len())
            .map(|c| masked[c] * C::new(T::zero(), self.ky[c]))
            .collect();
        let wx = self.plan.inverse_real(dwx);
        let wy = self.plan.inverse_real(dwy);
        let umax = u
            .iter()
            .zip(&v)
            .fold(T::zero(), |m, (a, b)| m.max(a.abs()).max(b.abs()));
        let mut adv: Vec<C<T>> = (0..u.len())
            .map(|c| C::new(u[c] * wx[c] + v[c] * wy[c], T::zero()))
            .collect();
        self.plan.forward(&mut adv);
        let out = adv
            .iter()
            .zip(&self.keep)
            .zip(f_hat)
            .map(|((&a, &k), &f)| if k { f - a } else { f })
            .collect();
        (out, umax)
    }
}

/// 2D incompressible Navier–Stokes in vorticity form on the periodic square.
///
/// Each substep recovers the stream function spectrally, forms the advection
/// term in physical space with 2/3 dealiasing, and advances with
/// Crank–Nicolson on `νΔω` and a Heun predictor–corrector on advection and
/// forcing (second order overall).
pub fn solve_navier_stokes<T: Real>(instance: &PdeInstance<T>, n_substeps: usize) -> Result<LabeledSample<T>> {
    expect_kind(instance, PdeKind::NavierStokes)?;
    let PdeParams::NavierStokes {
        viscosity,
        forcing_amplitude,
    } = instance.params
    else {
        unreachable!()
    };
    if n_substeps == 0 {
        return Err(PicoreError::InvalidArgument("n_substeps must be >= 1".into()));
    }
    let (solution, sim_seconds) = timed(|| integrate(instance, viscosity, forcing_amplitude, n_substeps))?;
    Ok(LabeledSample {
        instance: instance.clone(),
        solution,
        sim_seconds,
    })
}

fn integrate<T: Real>(instance: &PdeInstance<T>, nu: f64, amp: f64, n_substeps: usize) -> Result<Field<T>> {
    let grid = &instance.grid;
    let n = grid.n_points;
    let h = grid.spacing();
    let ops = VorticityOps::<T>::new(n, grid.domain_length);
    let f_hat = ops.plan.forward_real(&ns_forcing::<T>(grid, amp).values);
    let dt = grid.dt_store() / n_substeps as f64;
    let tdt = T::lit(dt);
    let half = T::lit(0.5);
    let (num, den): (Vec<T>, Vec<T>) = ops
        .lap
        .iter()
        .map(|&k2| {
            let a = T::lit(0.5 * dt * nu) * k2;
            (T::one() - a, T::one() / (T::one() + a))
        })
        .unzip();

    let mut values = Vec::with_capacity(grid.len());
    values.extend_from_slice(&instance.input.values);
    let mut w_hat = ops.plan.forward_real(&instance.input.values);
    let mut step = 0usize;
    for _frame in 1..grid.n_time {
        for _ in 0..n_substeps {
            let (f0, umax) = ops.rhs(&w_hat, &f_hat);
            let courant = umax.as_f64() * dt / h;
            if courant > 1.0 {
                return Err(PicoreError::CflViolation { courant });
            }
            let pred: Vec<C<T>> = (0..w_hat.len())
                .map(|c| (w_hat[c] * num[c] + f0[c] * tdt) * den[c])
                .collect();
            let (f1, _) = ops.rhs(&pred, &f_hat);
            for c in 0..w_hat.len() {
                w_hat[c] = (w_hat[c] * num[c] + (f0[c] + f1[c]) * half * tdt) * den[c];
            }
            step += 1;
        }
        let w = ops.plan.inverse_real(w_hat.clone());
        check_finite(&w, step)?;
        values.extend(w);
    }
    Field::new(values, grid.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::sample_ns_vorticity;

    fn instance(w0: Field<f64>, grid: GridSpec, nu: f64, amp: f64) -> PdeInstance<f64> {
        PdeInstance::new(
            PdeParams::NavierStokes {
                viscosity: nu,
                forcing_amplitude: amp,
            },
            w0,
            grid,
        )
        .unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = GridSpec::periodic_2d(16, 3, 0.5);
        let inst = instance(Field::zeros(grid.spatial_only()), grid, 1e-2, 0.0);
        let sol = solve_navier_stokes(&inst, 5).unwrap().solution;
        assert!(sol.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shear_flow_decays_analytically() {
        let nu = 1e-2;
        let grid = GridSpec::periodic_2d(32, 2, 0.5);
        let w0 = Field::from_fn(grid.spatial_only(), |x| (2.0 * PI * x[0]).cos());
        let inst = instance(w0.clone(), grid, nu, 0.0);
        let sol = solve_navier_stokes(&inst, 50).unwrap().solution;
        let decay = (-4.0 * PI * PI * nu * 0.5).exp();
        let mut num = 0.0;
        let mut den = 0.0;
        for (w, w0) in sol.frame(1).iter().zip(&w0.values) {
            num += (w - decay * w0).powi(2);
            den += (decay * w0).powi(2);
        }
        assert!((num / den).sqrt() < 1e-4, "rel err {}", (num / den).sqrt());
    }

    #[test]
    fn enstrophy_non_increasing_without_forcing() {
        let grid = GridSpec::periodic_2d(32, 6, 1.0);
        let w0 = sample_ns_vorticity(4, &grid.spatial_only()).unwrap();
        let inst = instance(w0, grid, 1e-3, 0.0);
        let sol = solve_navier_stokes(&inst, 20).unwrap().solution;
        let ens: Vec<f64> = (0..6).map(|t| sol.frame(t).iter().map(|v| v * v).sum()).collect();
        for w in ens.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{ens:?}");
        }
    }

    #[test]
    fn time_integration_is_second_order() {
        let grid = GridSpec::periodic_2d(32, 2, 1.0);
        // strong initial vorticity so the nonlinear term matters
        let w0 = sample_ns_vorticity::<f64>(2, &grid.spatial_only()).unwrap();
        let w0 = Field::new(w0.values.iter().map(|v| 10.0 * v).collect(), w0.grid).unwrap();
        let inst = instance(w0, grid, 1e-3, 0.1);
        let run = |s| solve_navier_stokes(&inst, s).unwrap().solution.values;
        let (a, b, c) = (run(8), run(16), run(32));
        let diff = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        let ratio = diff(&a, &b) / diff(&b, &c);
        assert!(ratio >= 3.0, "ratio {ratio}");
    }
}
