use std::f64::consts::PI;

use num_complex::Complex;

use super::{expect_kind, timed, LabeledSample, PdeInstance, PdeKind, PdeParams};
use crate::error::Result;
use crate::grid::Field;
use crate::scalar::Real;
use crate::spectral::SpectralPlan;

/// Exact periodic transport `u(t, x) = u₀(x - βt)` by a phase shift of every
/// Fourier mode. The Nyquist mode, which has no direction, is kept as a
/// standing cosine.
pub fn solve_advection<T: Real>(instance: &PdeInstance<T>) -> Result<LabeledSample<T>> {
    expect_kind(instance, PdeKind::Advection)?;
    let PdeParams::Advection { speed } = instance.params else {
        unreachable!()
    };
    let (solution, sim_seconds) = timed(|| {
        let grid = &instance.grid;
        let n = grid.n_points;
        let plan = SpectralPlan::<T>::new(1, n);
        let spec0 = plan.forward_real(&instance.input.values);
        let dt = grid.dt_store();
        let l = grid.domain_length;
        let mut values = Vec::with_capacity(grid.len());
        values.extend_from_slice(&instance.input.values);
        for frame in 1..grid.n_time {
            let shift = speed * dt * frame as f64;
            let mut spec = spec0.clone();
            plan.scale_by(&mut spec, |k| {
                if n % 2 == 0 && k[0] == -(n as i64 / 2) {
                    let c = (2.0 * PI * k[0] as f64 * shift / l).cos();
                    Complex::new(T::lit(c), T::zero())
                } else {
                    let phase = -2.0 * PI * k[0] as f64 * shift / l;
                    Complex::new(T::lit(phase.cos()), T::lit(phase.sin()))
                }
            });
            values.extend(plan.inverse_real(spec));
        }
        Field::new(values, grid.clone())
    })?;
    Ok(LabeledSample {
        instance: instance.clone(),
        solution,
        sim_seconds,
    })
}
