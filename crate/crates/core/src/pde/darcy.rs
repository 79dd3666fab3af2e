use std::f64::consts::PI;

use super::{expect_kind, timed, LabeledSample, PdeInstance, PdeKind, PdeParams};
use crate::error::{PicoreError, Result};
use crate::grid::{Boundary, Field};
use crate::scalar::Real;

/// Face coefficients (harmonic means) of a node-centred square grid.
struct Faces<T> {
    n: usize,
    /// `east[i*n+j]` couples node (i, j) with (i+1, j).
    east: Vec<T>,
    /// `north[i*n+j]` couples node (i, j) with (i, j+1).
    north: Vec<T>,
}

impl<T: Real> Faces<T> {
    fn new(a: &[T], n: usize) -> Self {
        let hm = |x: T, y: T| T::lit(2.0) * x * y / (x + y);
        let mut east = vec![T::zero(); n * n];
        let mut north = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                if i + 1 < n {
                    east[i * n + j] = hm(a[i * n + j], a[(i + 1) * n + j]);
                }
                if j + 1 < n {
                    north[i * n + j] = hm(a[i * n + j], a[i * n + j + 1]);
                }
            }
        }
        Self { n, east, north }
    }

    /// `∇·(a∇u)` at interior nodes, zero on the boundary ring.
    fn apply(&self, u: &[T], inv_h2: T, out: &mut [T]) {
        let n = self.n;
        out.iter_mut().for_each(|o| *o = T::zero());
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let c = i * n + j;
                let uc = u[c];
                let flux = self.east[c] * (u[c + n] - uc) - self.east[c - n] * (uc - u[c - n])
                    + self.north[c] * (u[c + 1] - uc)
                    - self.north[c - 1] * (uc - u[c - 1]);
                out[c] = flux * inv_h2;
            }
        }
    }
}

/// `∇·(a∇u) + β` under the solver's flux-form operator, zero on boundary nodes.
pub fn darcy_flux_residual<T: Real>(coefficient: &Field<T>, u: &Field<T>, forcing: f64) -> Vec<T> {
    let n = coefficient.grid.n_points;
    let h = coefficient.grid.spacing();
    let faces = Faces::new(&coefficient.values, n);
    let mut out = vec![T::zero(); n * n];
    faces.apply(&u.values, T::lit(1.0 / (h * h)), &mut out);
    let beta = T::lit(forcing);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            out[i * n + j] += beta;
        }
    }
    out
}

/// Steady state of `u_t = ∇·(a∇u) + β` with `u = 0` on the boundary nodes.
///
/// Damped explicit pseudo-time stepping (heavy-ball momentum) with step and
/// damping tuned to spectral bounds of the operator; stops once
/// `‖∇·(a∇u) + β‖ ≤ tol ‖β‖` over interior nodes.
pub fn solve_darcy<T: Real>(instance: &PdeInstance<T>, tol: f64, max_iter: usize) -> Result<LabeledSample<T>> {
    expect_kind(instance, PdeKind::Darcy)?;
    let PdeParams::Darcy { forcing } = instance.params else {
        unreachable!()
    };
    if instance.grid.boundary != Boundary::Dirichlet {
        return Err(PicoreError::InvalidGrid("darcy needs a Dirichlet grid".into()));
    }
    let (solution, sim_seconds) = timed(|| iterate(instance, forcing, tol, max_iter))?;
    Ok(LabeledSample {
        instance: instance.clone(),
        solution,
        sim_seconds,
    })
}

fn iterate<T: Real>(instance: &PdeInstance<T>, forcing: f64, tol: f64, max_iter: usize) -> Result<Field<T>> {
    let grid = &instance.grid;
    let n = grid.n_points;
    let h = grid.spacing();
    let a = &instance.input.values;
    let a_min = a.iter().fold(f64::INFINITY, |m, v| m.min(v.as_f64()));
    let a_max = a.iter().fold(0.0f64, |m, v| m.max(v.as_f64()));
    let faces = Faces::new(a, n);

    // Spectrum of -∇·(a∇·) lies in [a_min λ₁(-Δ_h), 8 a_max / h²].
    let lam_max = 8.0 * a_max / (h * h);
    let lam_min = a_min * 8.0 / (h * h) * (PI * h / (2.0 * grid.domain_length)).sin().powi(2);
    let (sl, sm) = (lam_max.sqrt(), lam_min.sqrt());
    let tau = T::lit(4.0 / (sl + sm).powi(2));
    let momentum = T::lit(((sl - sm) / (sl + sm)).powi(2));

    let n_interior = ((n - 2) * (n - 2)) as f64;
    let target = tol * forcing.abs() * n_interior.sqrt();
    let beta = T::lit(forcing);
    let inv_h2 = T::lit(1.0 / (h * h));

    let mut u = vec![T::zero(); n * n];
    let mut prev = u.clone();
    let mut r = vec![T::zero(); n * n];
    let mut res_norm = f64::INFINITY;
    for iter in 0..=max_iter {
        faces.apply(&u, inv_h2, &mut r);
        let mut ss = T::zero();
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let c = i * n + j;
                r[c] += beta;
                ss += r[c] * r[c];
            }
        }
        res_norm = ss.as_f64().sqrt();
        if !res_norm.is_finite() {
            return Err(PicoreError::NonFiniteState { step: iter });
        }
        if res_norm <= target {
            return Field::new(u, grid.clone());
        }
        if iter == max_iter {
            break;
        }
        for c in 0..n * n {
            let next = u[c] + tau * r[c] + momentum * (u[c] - prev[c]);
            prev[c] = u[c];
            u[c] = next;
        }
    }
    Err(PicoreError::NoConvergence {
        iterations: max_iter,
        residual: res_norm / (forcing.abs() * n_interior.sqrt()),
    })
}
