//! Uniform grids and the dense fields that live on them.

use serde::{Deserialize, Serialize};

use crate::error::{PicoreError, Result};
use crate::scalar::Real;

/// How the spatial axes close up at the domain ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `x_j = j h` with `h = L / n`; the point `x = L` is identified with 0.
    Periodic,
    /// Node-centred grid `x_j = j h` with `h = L / (n - 1)`, boundary nodes
    /// at both ends.
    Dirichlet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub spatial_dims: usize,
    pub n_points: usize,
    pub domain_length: f64,
    /// Stored time frames including `t = 0`; zero for stationary problems.
    pub n_time: usize,
    pub t_final: f64,
    pub boundary: Boundary,
}

impl GridSpec {
    pub fn periodic_1d(n_points: usize, n_time: usize, t_final: f64) -> Self {
        Self {
            spatial_dims: 1,
            n_points,
            domain_length: 1.0,
            n_time,
            t_final,
            boundary: Boundary::Periodic,
        }
    }

    pub fn periodic_2d(n_points: usize, n_time: usize, t_final: f64) -> Self {
        Self {
            spatial_dims: 2,
            n_points,
            domain_length: 1.0,
            n_time,
            t_final,
            boundary: Boundary::Periodic,
        }
    }

    /// Stationary node-centred square grid with boundary nodes.
    pub fn dirichlet_2d(n_points: usize) -> Self {
        Self {
            spatial_dims: 2,
            n_points,
            domain_length: 1.0,
            n_time: 0,
            t_final: 0.0,
            boundary: Boundary::Dirichlet,
        }
    }

    /// The same spatial grid with no time axis.
    pub fn spatial_only(&self) -> Self {
        Self {
            n_time: 0,
            t_final: 0.0,
            ..self.clone()
        }
    }

    pub fn with_resolution(&self, n_points: usize) -> Self {
        Self {
            n_points,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(PicoreError::InvalidGrid(msg));
        if !(1..=2).contains(&self.spatial_dims) {
            return bad(format!("spatial_dims must be 1 or 2, got {}", self.spatial_dims));
        }
        if self.n_points < 4 {
            return bad(format!("n_points must be >= 4, got {}", self.n_points));
        }
        if !(self.domain_length.is_finite() && self.domain_length > 0.0) {
            return bad(format!("domain_length must be positive, got {}", self.domain_length));
        }
        if self.n_time == 1 {
            return bad("dynamic grids need n_time >= 2".into());
        }
        if self.n_time >= 2 && !(self.t_final.is_finite() && self.t_final > 0.0) {
            return bad(format!("t_final must be positive, got {}", self.t_final));
        }
        Ok(())
    }

    pub fn is_dynamic(&self) -> bool {
        self.n_time >= 2
    }

    /// Spatial spacing `h`.
    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.domain_length / self.n_points as f64,
            Boundary::Dirichlet => self.domain_length / (self.n_points - 1) as f64,
        }
    }

    /// Spacing between stored frames, `t_final / (n_time - 1)`.
    pub fn dt_store(&self) -> f64 {
        if self.is_dynamic() {
            self.t_final / (self.n_time - 1) as f64
        } else {
            0.0
        }
    }

    /// Number of points in one spatial slice.
    pub fn spatial_len(&self) -> usize {
        self.n_points.pow(self.spatial_dims as u32)
    }

    /// Number of stored frames; stationary fields count as one frame.
    pub fn n_frames(&self) -> usize {
        self.n_time.max(1)
    }

    pub fn len(&self) -> usize {
        self.n_frames() * self.spatial_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Array shape `[n_time?, n, (n)]`.
    pub fn shape(&self) -> Vec<usize> {
        let mut shape = Vec::with_capacity(3);
        if self.is_dynamic() {
            shape.push(self.n_time);
        }
        shape.extend(std::iter::repeat_n(self.n_points, self.spatial_dims));
        shape
    }

    /// Coordinate of index `j` along any spatial axis.
    pub fn coord(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    /// Measure of the spatial domain `|Ω|`.
    pub fn domain_measure(&self) -> f64 {
        self.domain_length.powi(self.spatial_dims as i32)
    }
}

/// Dense real array on a uniform grid, frames outermost, row-major space.
#[derive(Clone, Debug, PartialEq)]
pub struct Field<T> {
    pub values: Vec<T>,
    pub grid: GridSpec,
}

impl<T: Real> Field<T> {
    pub fn new(values: Vec<T>, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(PicoreError::ShapeMismatch {
                expected: grid.shape(),
                got: vec![values.len()],
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(PicoreError::InvalidArgument(format!(
                "non-finite field value at flat index {i}"
            )));
        }
        Ok(Self { values, grid })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            values: vec![T::zero(); grid.len()],
            grid,
        }
    }

    /// Builds a single-frame field from a function of the spatial coordinates.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let n = grid.n_points;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.n_frames() {
            match grid.spatial_dims {
                1 => values.extend((0..n).map(|j| T::lit(f(&[grid.coord(j)])))),
                _ => {
                    for i in 0..n {
                        for j in 0..n {
                            values.push(T::lit(f(&[grid.coord(i), grid.coord(j)])));
                        }
                    }
                }
            }
        }
        Self { values, grid }
    }

    pub fn shape(&self) -> Vec<usize> {
        self.grid.shape()
    }

    pub fn frame(&self, t: usize) -> &[T] {
        let s = self.grid.spatial_len();
        &self.values[t * s..(t + 1) * s]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [T] {
        let s = self.grid.spatial_len();
        &mut self.values[t * s..(t + 1) * s]
    }

    /// Frame `t` as a stationary field on the same spatial grid.
    pub fn frame_field(&self, t: usize) -> Self {
        Self {
            values: self.frame(t).to_vec(),
            grid: self.grid.spatial_only(),
        }
    }

    /// Plain sum of squares (no measure weighting).
    pub fn sum_sq(&self) -> T {
        crate::scalar::sum_sq(&self.values)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn cast<U: Real>(&self) -> Field<U> {
        Field {
            values: self.values.iter().map(|v| U::lit(v.as_f64())).collect(),
            grid: self.grid.clone(),
        }
    }
}

/// Keeps every `factor`-th point along each spatial axis; time frames are
/// left untouched.
///
/// Periodic grids need `factor | n_points`. Node-centred Dirichlet grids
/// need `factor | n_points - 1` so that both boundary rows survive.
pub fn downsample<T: Real>(field: &Field<T>, factor: usize) -> Result<Field<T>> {
    let grid = &field.grid;
    let n = grid.n_points;
    let intervals = match grid.boundary {
        Boundary::Periodic => n,
        Boundary::Dirichlet => n - 1,
    };
    if factor == 0 || intervals % factor != 0 {
        return Err(PicoreError::NonDivisibleFactor {
            factor,
            n_points: n,
        });
    }
    if factor == 1 {
        return Ok(field.clone());
    }
    let m = match grid.boundary {
        Boundary::Periodic => n / factor,
        Boundary::Dirichlet => (n - 1) / factor + 1,
    };
    let new_grid = grid.with_resolution(m);
    new_grid.validate()?;
    let mut values = Vec::with_capacity(new_grid.len());
    for t in 0..grid.n_frames() {
        let frame = field.frame(t);
        match grid.spatial_dims {
            1 => values.extend((0..m).map(|j| frame[j * factor])),
            _ => {
                for i in 0..m {
                    for j in 0..m {
                        values.push(frame[i * factor * n + j * factor]);
                    }
                }
            }
        }
    }
    Ok(Field {
        values,
        grid: new_grid,
    })
}
