//! Finite-difference PDE residuals and the physics-informed loss.
//!
//! Every loss here comes with its exact gradient with respect to the
//! prediction values and an exact Hessian-vector product, both assembled
//! from transposed stencils so that the operator network can backpropagate
//! through them.

use serde::{Deserialize, Serialize};

use crate::error::{PicoreError, Result};
use crate::grid::{Boundary, Field, GridSpec};
use crate::pde::{ns_forcing, PdeInstance, PdeParams, VorticityOps};
use crate::scalar::Real;

/// Penalty weights of the boundary (`lambda`) and initial-condition (`mu`)
/// terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiWeights {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for PiWeights {
    fn default() -> Self {
        Self { lambda: 1.0, mu: 1.0 }
    }
}

impl PiWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("mu", self.mu)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PicoreError::InvalidArgument(format!("{name} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Axis of a field: the time axis or one of the spatial axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Time,
    Space(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StencilBoundary {
    Periodic,
    OneSided,
}

/// Second-order finite-difference stencil along one axis.
#[derive(Clone, Copy, Debug)]
struct Stencil {
    len: usize,
    spacing: f64,
    order: u8,
    boundary: StencilBoundary,
}

impl Stencil {
    fn new(len: usize, spacing: f64, order: u8, boundary: StencilBoundary) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(PicoreError::InvalidArgument(format!("derivative order {order}")));
        }
        if len < 3 {
            return Err(PicoreError::AxisTooShort { len, needed: 3 });
        }
        Ok(Self {
            len,
            spacing,
            order,
            boundary,
        })
    }

    /// Positions and weights of output row `i`.
    fn row(&self, i: usize) -> ([usize; 4], [f64; 4], usize) {
        let n = self.len;
        let h = self.spacing;
        let wrap = |k: isize| ((k % n as isize + n as isize) % n as isize) as usize;
        let i_s = i as isize;
        let interior = i > 0 && i + 1 < n;
        match (self.order, self.boundary, interior) {
            (1, StencilBoundary::Periodic, _) | (1, StencilBoundary::OneSided, true) => {
                let c = 0.5 / h;
                ([wrap(i_s - 1), wrap(i_s + 1), 0, 0], [-c, c, 0.0, 0.0], 2)
            }
            (2, StencilBoundary::Periodic, _) | (2, StencilBoundary::OneSided, true) => {
                let c = 1.0 / (h * h);
                ([wrap(i_s - 1), i, wrap(i_s + 1), 0], [c, -2.0 * c, c, 0.0], 3)
            }
            (1, StencilBoundary::OneSided, false) => {
                let c = 0.5 / h;
                if i == 0 {
                    ([0, 1, 2, 0], [-3.0 * c, 4.0 * c, -c, 0.0], 3)
                } else {
                    ([n - 3, n - 2, n - 1, 0], [c, -4.0 * c, 3.0 * c, 0.0], 3)
                }
            }
            (_, StencilBoundary::OneSided, false) => {
                let c = 1.0 / (h * h);
                match (i == 0, n >= 4) {
                    (true, true) => ([0, 1, 2, 3], [2.0 * c, -5.0 * c, 4.0 * c, -c], 4),
                    (false, true) => ([n - 4, n - 3, n - 2, n - 1], [-c, 4.0 * c, -5.0 * c, 2.0 * c], 4),
                    (true, false) => ([0, 1, 2, 0], [c, -2.0 * c, c, 0.0], 3),
                    (false, false) => ([n - 3, n - 2, n - 1, 0], [c, -2.0 * c, c, 0.0], 3),
                }
            }
            _ => unreachable!(),
        }
    }

    /// Applies the stencil (or its transpose) along axis `axis` of a
    /// row-major array with the given shape.
    fn apply<T: Real>(&self, x: &[T], shape: &[usize], axis: usize, transpose: bool) -> Vec<T> {
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        let len = shape[axis];
        debug_assert_eq!(len, self.len);
        let mut out = vec![T::zero(); x.len()];
        let rows: Vec<_> = (0..len)
            .map(|i| {
                let (p, w, c) = self.row(i);
                let w: Vec<T> = w[..c].iter().map(|&v| T::lit(v)).collect();
                (p, w)
            })
            .collect();
        for o in 0..outer {
            let base = o * len * inner;
            for (i, (pos, w)) in rows.iter().enumerate() {
                for (&p, &c) in pos.iter().zip(w) {
                    let (src, dst) = if transpose { (i, p) } else { (p, i) };
                    let s = base + src * inner;
                    let d = base + dst * inner;
                    for k in 0..inner {
                        out[d + k] += c * x[s + k];
                    }
                }
            }
        }
        out
    }
}

fn array_axis(grid: &GridSpec, axis: Axis) -> Result<usize> {
    let offset = usize::from(grid.is_dynamic());
    match axis {
        Axis::Time if grid.is_dynamic() => Ok(0),
        Axis::Time => Err(PicoreError::InvalidArgument("field has no time axis".into())),
        Axis::Space(d) if d < grid.spatial_dims => Ok(offset + d),
        Axis::Space(d) => Err(PicoreError::InvalidArgument(format!("no spatial axis {d}"))),
    }
}

/// Second-order finite-difference derivative along one axis: central in the
/// interior, wrapped when `boundary` is periodic, second-order one-sided at
/// the first and last index otherwise.
pub fn fd_derivative<T: Real>(
    field: &Field<T>,
    axis: Axis,
    order: u8,
    boundary: StencilBoundary,
) -> Result<Field<T>> {
    let grid = &field.grid;
    let a = array_axis(grid, axis)?;
    let shape = grid.shape();
    let spacing = match axis {
        Axis::Time => grid.dt_store(),
        Axis::Space(_) => grid.spacing(),
    };
    let st = Stencil::new(shape[a], spacing, order, boundary)?;
    Ok(Field {
        values: st.apply(&field.values, &shape, a, false),
        grid: grid.clone(),
    })
}

/// PDE residual on the prediction's grid with its quadrature-weighted
/// squared norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualField<T> {
    pub values: Field<T>,
    pub l2sq: T,
}

/// Linearisable residual operator of one instance.
enum Operator<T: Real> {
    Advection {
        dt: Stencil,
        dx: Stencil,
        speed: T,
    },
    Burgers {
        dt: Stencil,
        dx: Stencil,
        dxx: Stencil,
        diffusion: T,
    },
    Darcy {
        dx: Stencil,
        dxx: Stencil,
        a: Vec<T>,
        ax: Vec<T>,
        ay: Vec<T>,
        forcing: T,
        interior: Vec<bool>,
    },
    NavierStokes {
        dt: Stencil,
        dx: Stencil,
        dxx: Stencil,
        nu: T,
        forcing: Vec<T>,
        ops: Box<VorticityOps<T>>,
    },
}

/// Cached quantities of a nonlinear residual at the current prediction.
struct Linearisation<T> {
    residual: Vec<T>,
    /// Burgers: `u`. Navier–Stokes: per-frame velocity `(U, V)` and
    /// vorticity gradients `(ω_x, ω_y)`.
    u: Vec<T>,
    vel: Option<(Vec<T>, Vec<T>)>,
    grad_w: Option<(Vec<T>, Vec<T>)>,
}

fn add_into<T: Real>(acc: &mut [T], x: &[T], scale: T) {
    for (a, &v) in acc.iter_mut().zip(x) {
        *a += scale * v;
    }
}

fn mul<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

impl<T: Real> Operator<T> {
    fn new(instance: &PdeInstance<T>, grid: &GridSpec) -> Result<Self> {
        let h = grid.spacing();
        let shape = grid.shape();
        Ok(match instance.params {
            PdeParams::Advection { speed } => Operator::Advection {
                dt: Stencil::new(grid.n_time, grid.dt_store(), 1, StencilBoundary::OneSided)?,
                dx: Stencil::new(grid.n_points, h, 1, StencilBoundary::Periodic)?,
                speed: T::lit(speed),
            },
            PdeParams::Burgers { viscosity } => Operator::Burgers {
                dt: Stencil::new(grid.n_time, grid.dt_store(), 1, StencilBoundary::OneSided)?,
                dx: Stencil::new(grid.n_points, h, 1, StencilBoundary::Periodic)?,
                dxx: Stencil::new(grid.n_points, h, 2, StencilBoundary::Periodic)?,
                diffusion: T::lit(viscosity / std::f64::consts::PI),
            },
            PdeParams::Darcy { forcing } => {
                let dx = Stencil::new(grid.n_points, h, 1, StencilBoundary::OneSided)?;
                let dxx = Stencil::new(grid.n_points, h, 2, StencilBoundary::OneSided)?;
                let a = instance.input.values.clone();
                let ax = dx.apply(&a, &shape, 0, false);
                let ay = dx.apply(&a, &shape, 1, false);
                let n = grid.n_points;
                let interior = (0..n * n)
                    .map(|c| {
                        let (i, j) = (c / n, c % n);
                        i > 0 && j > 0 && i + 1 < n && j + 1 < n
                    })
                    .collect();
                Operator::Darcy {
                    dx,
                    dxx,
                    a,
                    ax,
                    ay,
                    forcing: T::lit(forcing),
                    interior,
                }
            }
            PdeParams::NavierStokes {
                viscosity,
                forcing_amplitude,
            } => Operator::NavierStokes {
                dt: Stencil::new(grid.n_time, grid.dt_store(), 1, StencilBoundary::OneSided)?,
                dx: Stencil::new(grid.n_points, h, 1, StencilBoundary::Periodic)?,
                dxx: Stencil::new(grid.n_points, h, 2, StencilBoundary::Periodic)?,
                nu: T::lit(viscosity),
                forcing: ns_forcing::<T>(grid, forcing_amplitude).values,
                ops: Box::new(VorticityOps::new(grid.n_points, grid.domain_length)),
            },
        })
    }

    /// Per-frame velocity of a space-time vorticity array.
    fn velocity(ops: &VorticityOps<T>, w: &[T], frames: usize) -> (Vec<T>, Vec<T>) {
        let s = w.len() / frames;
        let mut u = Vec::with_capacity(w.len());
        let mut v = Vec::with_capacity(w.len());
        for t in 0..frames {
            let (fu, fv) = ops.velocity(&w[t * s..(t + 1) * s]);
            u.extend(fu);
            v.extend(fv);
        }
        (u, v)
    }

    fn velocity_transpose(ops: &VorticityOps<T>, gu: &[T], gv: &[T], frames: usize) -> Vec<T> {
        let s = gu.len() / frames;
        let mut out = Vec::with_capacity(gu.len());
        for t in 0..frames {
            out.extend(ops.velocity_transpose(&gu[t * s..(t + 1) * s], &gv[t * s..(t + 1) * s]));
        }
        out
    }

    fn linearise(&self, u: &[T], shape: &[usize]) -> Linearisation<T> {
        let mut lin = Linearisation {
            residual: Vec::new(),
            u: Vec::new(),
            vel: None,
            grad_w: None,
        };
        lin.residual = match self {
            Operator::Advection { dt, dx, speed } => {
                let mut r = dt.apply(u, shape, 0, false);
                add_into(&mut r, &dx.apply(u, shape, 1, false), *speed);
                r
            }
            Operator::Burgers { dt, dx, dxx, diffusion } => {
                let half = T::lit(0.5);
                let flux: Vec<T> = u.iter().map(|&x| half * x * x).collect();
                let mut r = dt.apply(u, shape, 0, false);
                add_into(&mut r, &dx.apply(&flux, shape, 1, false), T::one());
                add_into(&mut r, &dxx.apply(u, shape, 1, false), -*diffusion);
                lin.u = u.to_vec();
                r
            }
            Operator::Darcy {
                forcing, interior, ..
            } => {
                let mut r = self.darcy_apply(u, shape, false);
                for (x, &inside) in r.iter_mut().zip(interior) {
                    *x = if inside { -*x - *forcing } else { T::zero() };
                }
                r
            }
            Operator::NavierStokes {
                dt,
                dx,
                dxx,
                nu,
                forcing,
                ops,
            } => {
                let frames = shape[0];
                let (vx, vy) = Self::velocity(ops, u, frames);
                let wx = dx.apply(u, shape, 1, false);
                let wy = dx.apply(u, shape, 2, false);
                let mut r = dt.apply(u, shape, 0, false);
                add_into(&mut r, &mul(&vx, &wx), T::one());
                add_into(&mut r, &mul(&vy, &wy), T::one());
                add_into(&mut r, &dxx.apply(u, shape, 1, false), -*nu);
                add_into(&mut r, &dxx.apply(u, shape, 2, false), -*nu);
                let s = forcing.len();
                for (k, x) in r.iter_mut().enumerate() {
                    *x -= forcing[k % s];
                }
                lin.vel = Some((vx, vy));
                lin.grad_w = Some((wx, wy));
                r
            }
        };
        lin
    }

    /// `∇a·∇u + aΔu` (or its transpose) for Darcy.
    fn darcy_apply(&self, u: &[T], shape: &[usize], transpose: bool) -> Vec<T> {
        let Operator::Darcy { dx, dxx, a, ax, ay, .. } = self else {
            unreachable!()
        };
        if !transpose {
            let mut out = mul(ax, &dx.apply(u, shape, 0, false));
            add_into(&mut out, &mul(ay, &dx.apply(u, shape, 1, false)), T::one());
            let lap = {
                let mut l = dxx.apply(u, shape, 0, false);
                add_into(&mut l, &dxx.apply(u, shape, 1, false), T::one());
                l
            };
            add_into(&mut out, &mul(a, &lap), T::one());
            out
        } else {
            let mut out = dx.apply(&mul(ax, u), shape, 0, true);
            add_into(&mut out, &dx.apply(&mul(ay, u), shape, 1, true), T::one());
            let au = mul(a, u);
            add_into(&mut out, &dxx.apply(&au, shape, 0, true), T::one());
            add_into(&mut out, &dxx.apply(&au, shape, 1, true), T::one());
            out
        }
    }

    /// Jacobian-vector product `J v` at the linearisation point.
    fn jvp(&self, lin: &Linearisation<T>, v: &[T], shape: &[usize]) -> Vec<T> {
        match self {
            Operator::Advection { dt, dx, speed } => {
                let mut r = dt.apply(v, shape, 0, false);
                add_into(&mut r, &dx.apply(v, shape, 1, false), *speed);
                r
            }
            Operator::Burgers { dt, dx, dxx, diffusion } => {
                let mut r = dt.apply(v, shape, 0, false);
                add_into(&mut r, &dx.apply(&mul(&lin.u, v), shape, 1, false), T::one());
                add_into(&mut r, &dxx.apply(v, shape, 1, false), -*diffusion);
                r
            }
            Operator::Darcy { interior, .. } => {
                let mut r = self.darcy_apply(v, shape, false);
                for (x, &inside) in r.iter_mut().zip(interior) {
                    *x = if inside { -*x } else { T::zero() };
                }
                r
            }
            Operator::NavierStokes {
                dt, dx, dxx, nu, ops, ..
            } => {
                let (vx, vy) = lin.vel.as_ref().unwrap();
                let (wx, wy) = lin.grad_w.as_ref().unwrap();
                let (dvx, dvy) = Self::velocity(ops, v, shape[0]);
                let mut r = dt.apply(v, shape, 0, false);
                add_into(&mut r, &mul(&dvx, wx), T::one());
                add_into(&mut r, &mul(&dvy, wy), T::one());
                add_into(&mut r, &mul(vx, &dx.apply(v, shape, 1, false)), T::one());
                add_into(&mut r, &mul(vy, &dx.apply(v, shape, 2, false)), T::one());
                add_into(&mut r, &dxx.apply(v, shape, 1, false), -*nu);
                add_into(&mut r, &dxx.apply(v, shape, 2, false), -*nu);
                r
            }
        }
    }

    /// Transposed Jacobian applied to a cotangent `g`.
    fn vjp(&self, lin: &Linearisation<T>, g: &[T], shape: &[usize]) -> Vec<T> {
        match self {
            Operator::Advection { dt, dx, speed } => {
                let mut r = dt.apply(g, shape, 0, true);
                add_into(&mut r, &dx.apply(g, shape, 1, true), *speed);
                r
            }
            Operator::Burgers { dt, dx, dxx, diffusion } => {
                let mut r = dt.apply(g, shape, 0, true);
                add_into(&mut r, &mul(&lin.u, &dx.apply(g, shape, 1, true)), T::one());
                add_into(&mut r, &dxx.apply(g, shape, 1, true), -*diffusion);
                r
            }
            Operator::Darcy { interior, .. } => {
                let masked: Vec<T> = g
                    .iter()
                    .zip(interior)
                    .map(|(&x, &inside)| if inside { -x } else { T::zero() })
                    .collect();
                self.darcy_apply(&masked, shape, true)
            }
            Operator::NavierStokes {
                dt, dx, dxx, nu, ops, ..
            } => {
                let (vx, vy) = lin.vel.as_ref().unwrap();
                let (wx, wy) = lin.grad_w.as_ref().unwrap();
                let mut r = dt.apply(g, shape, 0, true);
                let back = Self::velocity_transpose(ops, &mul(g, wx), &mul(g, wy), shape[0]);
                add_into(&mut r, &back, T::one());
                add_into(&mut r, &dx.apply(&mul(vx, g), shape, 1, true), T::one());
                add_into(&mut r, &dx.apply(&mul(vy, g), shape, 2, true), T::one());
                add_into(&mut r, &dxx.apply(g, shape, 1, true), -*nu);
                add_into(&mut r, &dxx.apply(g, shape, 2, true), -*nu);
                r
            }
        }
    }

    /// Second-order term `(∂Jᵀ/∂u)[v] g` of the Hessian-vector product;
    /// zero for the linear PDEs.
    fn vjp_derivative(&self, g: &[T], v: &[T], shape: &[usize]) -> Option<Vec<T>> {
        match self {
            Operator::Advection { .. } | Operator::Darcy { .. } => None,
            Operator::Burgers { dx, .. } => Some(mul(v, &dx.apply(g, shape, 1, true))),
            Operator::NavierStokes { dx, ops, .. } => {
                let frames = shape[0];
                let vxw = dx.apply(v, shape, 1, false);
                let vyw = dx.apply(v, shape, 2, false);
                let mut r = Self::velocity_transpose(ops, &mul(g, &vxw), &mul(g, &vyw), frames);
                let (dvx, dvy) = Self::velocity(ops, v, frames);
                add_into(&mut r, &dx.apply(&mul(&dvx, g), shape, 1, true), T::one());
                add_into(&mut r, &dx.apply(&mul(&dvy, g), shape, 2, true), T::one());
                Some(r)
            }
        }
    }
}

/// Quadrature weights of the residual, boundary and initial-condition terms.
struct Quadrature<T> {
    residual: Vec<T>,
    /// (flat index, weight) of boundary nodes (Darcy only).
    boundary: Vec<(usize, T)>,
    /// Weight of each node of frame 0 in the initial-condition term.
    initial: Option<T>,
}

impl<T: Real> Quadrature<T> {
    fn new(grid: &GridSpec) -> Self {
        let n = grid.n_points;
        if grid.is_dynamic() {
            let cell = grid.spacing().powi(grid.spatial_dims as i32);
            let w = T::lit(cell * grid.dt_store());
            return Self {
                residual: vec![w; grid.len()],
                boundary: Vec::new(),
                initial: Some(T::lit(cell)),
            };
        }
        // Rectangle rule over the interior nodes covering |Ω|, and over the
        // boundary nodes covering |∂Ω|.
        let n_int = ((n - 2) * (n - 2)) as f64;
        let w_int = T::lit(grid.domain_measure() / n_int);
        let n_bdry = 4 * (n - 1);
        let w_bdry = T::lit(4.0 * grid.domain_length / n_bdry as f64);
        let mut residual = vec![T::zero(); n * n];
        let mut boundary = Vec::with_capacity(n_bdry);
        for i in 0..n {
            for j in 0..n {
                let c = i * n + j;
                if i == 0 || j == 0 || i + 1 == n || j + 1 == n {
                    boundary.push((c, w_bdry));
                } else {
                    residual[c] = w_int;
                }
            }
        }
        Self {
            residual,
            boundary,
            initial: None,
        }
    }
}

fn check_prediction<T: Real>(instance: &PdeInstance<T>, prediction: &Field<T>) -> Result<()> {
    if prediction.grid != instance.grid || prediction.values.len() != instance.grid.len() {
        return Err(PicoreError::ShapeMismatch {
            expected: instance.grid.shape(),
            got: prediction.shape(),
        });
    }
    if instance.grid.spatial_dims == 2
        && instance.grid.boundary == Boundary::Periodic
        && !instance.grid.is_dynamic()
    {
        return Err(PicoreError::InvalidGrid("stationary problems need a Dirichlet grid".into()));
    }
    Ok(())
}

/// Residual `F(u, a)` of a predicted solution.
///
/// Advection `u_t + βu_x`; Burgers `u_t + (u²/2)_x - (ν/π)u_xx`; Darcy
/// `-(∇a·∇u + aΔu) - β` on interior nodes (boundary ring zero); Navier–Stokes
/// `ω_t + u·∇ω - νΔω - f` with the velocity recovered spectrally per frame.
pub fn pde_residual<T: Real>(instance: &PdeInstance<T>, prediction: &Field<T>) -> Result<ResidualField<T>> {
    check_prediction(instance, prediction)?;
    let grid = &instance.grid;
    let op = Operator::new(instance, grid)?;
    let lin = op.linearise(&prediction.values, &grid.shape());
    let quad = Quadrature::<T>::new(grid);
    let l2sq = lin
        .residual
        .iter()
        .zip(&quad.residual)
        .fold(T::zero(), |acc, (&r, &w)| acc + w * r * r);
    Ok(ResidualField {
        values: Field {
            values: lin.residual,
            grid: grid.clone(),
        },
        l2sq,
    })
}

/// Physics-informed loss: residual term, plus `lambda` times the squared
/// boundary mismatch (Darcy; periodic problems have no boundary term), plus
/// `mu` times the squared initial-condition mismatch (dynamic problems).
pub fn pi_loss<T: Real>(instance: &PdeInstance<T>, prediction: &Field<T>, weights: &PiWeights) -> Result<T> {
    Ok(PiEvaluation::new(instance, prediction, weights)?.loss)
}

/// [`pi_loss`] and its gradient with respect to the prediction values.
pub fn pi_loss_and_grad<T: Real>(
    instance: &PdeInstance<T>,
    prediction: &Field<T>,
    weights: &PiWeights,
) -> Result<(T, Vec<T>)> {
    let eval = PiEvaluation::new(instance, prediction, weights)?;
    let grad = eval.gradient();
    Ok((eval.loss, grad))
}

/// Physics-informed loss linearised at one prediction; supports repeated
/// gradient and Hessian-vector queries.
pub struct PiEvaluation<'a, T: Real> {
    instance: &'a PdeInstance<T>,
    shape: Vec<usize>,
    op: Operator<T>,
    lin: Linearisation<T>,
    quad: Quadrature<T>,
    weights: PiWeights,
    prediction: Vec<T>,
    pub loss: T,
}

impl<'a, T: Real> PiEvaluation<'a, T> {
    pub fn new(instance: &'a PdeInstance<T>, prediction: &Field<T>, weights: &PiWeights) -> Result<Self> {
        check_prediction(instance, prediction)?;
        weights.validate()?;
        let grid = &instance.grid;
        let shape = grid.shape();
        let op = Operator::new(instance, grid)?;
        let lin = op.linearise(&prediction.values, &shape);
        let quad = Quadrature::<T>::new(grid);
        let u = &prediction.values;
        let mut loss = lin
            .residual
            .iter()
            .zip(&quad.residual)
            .fold(T::zero(), |acc, (&r, &w)| acc + w * r * r);
        let lambda = T::lit(weights.lambda);
        for &(c, w) in &quad.boundary {
            loss += lambda * w * u[c] * u[c];
        }
        if let Some(w) = quad.initial {
            let mu = T::lit(weights.mu);
            for (x, &a) in u.iter().zip(&instance.input.values) {
                let d = *x - a;
                loss += mu * w * d * d;
            }
        }
        Ok(Self {
            instance,
            shape,
            op,
            lin,
            quad,
            weights: *weights,
            prediction: u.clone(),
            loss,
        })
    }

    pub fn gradient(&self) -> Vec<T> {
        let two = T::lit(2.0);
        let g: Vec<T> = self
            .lin
            .residual
            .iter()
            .zip(&self.quad.residual)
            .map(|(&r, &w)| two * w * r)
            .collect();
        let mut grad = self.op.vjp(&self.lin, &g, &self.shape);
        let lambda = T::lit(self.weights.lambda);
        for &(c, w) in &self.quad.boundary {
            grad[c] += two * lambda * w * self.prediction[c];
        }
        if let Some(w) = self.quad.initial {
            let mu = T::lit(self.weights.mu);
            for (k, &a) in self.instance.input.values.iter().enumerate() {
                grad[k] += two * mu * w * (self.prediction[k] - a);
            }
        }
        grad
    }

    /// Exact Hessian-vector product of the loss with respect to the
    /// prediction values.
    pub fn hvp(&self, v: &[T]) -> Vec<T> {
        let two = T::lit(2.0);
        let jv = self.op.jvp(&self.lin, v, &self.shape);
        let weighted: Vec<T> = jv
            .iter()
            .zip(&self.quad.residual)
            .map(|(&x, &w)| two * w * x)
            .collect();
        let mut out = self.op.vjp(&self.lin, &weighted, &self.shape);
        let g: Vec<T> = self
            .lin
            .residual
            .iter()
            .zip(&self.quad.residual)
            .map(|(&r, &w)| two * w * r)
            .collect();
        if let Some(second) = self.op.vjp_derivative(&g, v, &self.shape) {
            add_into(&mut out, &second, T::one());
        }
        let lambda = T::lit(self.weights.lambda);
        for &(c, w) in &self.quad.boundary {
            out[c] += two * lambda * w * v[c];
        }
        if let Some(w) = self.quad.initial {
            let mu = T::lit(self.weights.mu);
            let s = self.instance.input.values.len();
            for k in 0..s {
                out[k] += two * mu * w * v[k];
            }
        }
        out
    }
}
