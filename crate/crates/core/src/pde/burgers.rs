use std::f64::consts::PI;

use num_complex::Complex;

use super::{check_finite, expect_kind, timed, LabeledSample, PdeInstance, PdeKind, PdeParams};
use crate::error::{PicoreError, Result};
use crate::grid::Field;
use crate::scalar::Real;
use crate::spectral::{dealias_keep, wavenumber, SpectralPlan};

/// Viscous Burgers `u_t + (u²/2)_x = (ν/π) u_xx` on the periodic interval.
///
/// Fourier pseudospectral in space; the diffusion is integrated exactly by an
/// integrating factor and the dealiased nonlinear flux by classical RK4.
pub fn solve_burgers<T: Real>(instance: &PdeInstance<T>, n_substeps: usize) -> Result<LabeledSample<T>> {
    expect_kind(instance, PdeKind::Burgers)?;
    let PdeParams::Burgers { viscosity } = instance.params else {
        unreachable!()
    };
    if n_substeps == 0 {
        return Err(PicoreError::InvalidArgument("n_substeps must be >= 1".into()));
    }
    let (solution, sim_seconds) = timed(|| integrate(instance, viscosity / PI, n_substeps))?;
    Ok(LabeledSample {
        instance: instance.clone(),
        solution,
        sim_seconds,
    })
}

type C<T> = Complex<T>;

struct Stepper<T: Real> {
    plan: SpectralPlan<T>,
    /// `-i 2π k / L` restricted to the 2/3 band, zero elsewhere.
    flux_symbol: Vec<C<T>>,
    keep: Vec<bool>,
}

impl<T: Real> Stepper<T> {
    /// Spectral nonlinear term `-∂x(u²/2)` of the spectral state `v`; also
    /// returns `max |u|` of the dealiased state.
    fn nonlinear(&self, v: &[C<T>]) -> (Vec<C<T>>, T) {
        let mut buf: Vec<C<T>> = v
            .iter()
            .zip(&self.keep)
            .map(|(&c, &k)| if k { c } else { C::new(T::zero(), T::zero()) })
            .collect();
        let u = self.plan.inverse_real(buf.clone());
        let umax = u.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let half = T::lit(0.5);
        for (b, &x) in buf.iter_mut().zip(&u) {
            *b = C::new(half * x * x, T::zero());
        }
        self.plan.forward(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.flux_symbol) {
            *b = *b * *s;
        }
        (buf, umax)
    }
}

fn integrate<T: Real>(instance: &PdeInstance<T>, diffusion: f64, n_substeps: usize) -> Result<Field<T>> {
    let grid = &instance.grid;
    let n = grid.n_points;
    let l = grid.domain_length;
    let h = grid.spacing();
    let dt = grid.dt_store() / n_substeps as f64;
    let plan = SpectralPlan::<T>::new(1, n);

    let ks: Vec<i64> = (0..n).map(|j| wavenumber(j, n)).collect();
    let keep: Vec<bool> = ks.iter().map(|&k| dealias_keep(&[k], n)).collect();
    let flux_symbol = ks
        .iter()
        .zip(&keep)
        .map(|(&k, &kp)| {
            let s = if kp { -2.0 * PI * k as f64 / l } else { 0.0 };
            C::new(T::zero(), T::lit(s))
        })
        .collect();
    // exp(L dt/2) and exp(L dt) for L = -ν/π (2πk/L)²
    let lin: Vec<f64> = ks
        .iter()
        .map(|&k| -diffusion * (2.0 * PI * k as f64 / l).powi(2))
        .collect();
    let e_half: Vec<T> = lin.iter().map(|&a| T::lit((a * dt / 2.0).exp())).collect();
    let e_full: Vec<T> = lin.iter().map(|&a| T::lit((a * dt).exp())).collect();

    let stepper = Stepper { plan: plan.clone(), flux_symbol, keep };
    let tdt = T::lit(dt);
    let half_dt = T::lit(dt / 2.0);
    let sixth = T::lit(dt / 6.0);
    let two = T::lit(2.0);

    let mut values = Vec::with_capacity(grid.len());
    values.extend_from_slice(&instance.input.values);
    let mut v = plan.forward_real(&instance.input.values);
    let mut step = 0usize;
    for _frame in 1..grid.n_time {
        for _ in 0..n_substeps {
            let (a, umax) = stepper.nonlinear(&v);
            let courant = umax.as_f64() * dt / h;
            if courant > 1.0 {
                return Err(PicoreError::CflViolation { courant });
            }
            let tmp: Vec<C<T>> = (0..n).map(|i| (v[i] + a[i] * half_dt) * e_half[i]).collect();
            let (b, _) = stepper.nonlinear(&tmp);
            let tmp: Vec<C<T>> = (0..n).map(|i| v[i] * e_half[i] + b[i] * half_dt).collect();
            let (c, _) = stepper.nonlinear(&tmp);
            let tmp: Vec<C<T>> = (0..n)
                .map(|i| v[i] * e_full[i] + c[i] * e_half[i] * tdt)
                .collect();
            let (d, _) = stepper.nonlinear(&tmp);
            for i in 0..n {
                v[i] = v[i] * e_full[i]
                    + (a[i] * e_full[i] + (b[i] + c[i]) * e_half[i] * two + d[i]) * sixth;
            }
            step += 1;
        }
        let u = plan.inverse_real(v.clone());
        check_finite(&u, step)?;
        values.extend(u);
    }
    Field::new(values, grid.clone())
}
