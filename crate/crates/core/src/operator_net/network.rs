//! Forward and reverse passes of the Fourier Neural Operator.
//!
//! Activations are channel-major arrays `[channel][point]`. A spectral layer
//! keeps the modes `k ∈ [0, m)` in 1D and `k₁ ∈ [0, m) ∪ [n-m, n)`,
//! `k₂ ∈ [0, m)` in 2D, and synthesizes the real output as
//! `y = Re Σ_k c_k Y_k e^{ikx} / N` with `c_k = 1` on the `k_last = 0` line
//! and 2 elsewhere (the conjugate half is implied).

use num_complex::Complex;

use super::{FnoConfig, FnoParams, Layout};
use crate::error::{PicoreError, Result};
use crate::grid::{Field, GridSpec};
use crate::pde::PdeInstance;
use crate::scalar::Real;
use crate::spectral::SpectralPlan;

type C<T> = Complex<T>;

/// FFT plan and retained-mode table for one grid resolution.
pub(crate) struct Workspace<T: Real> {
    plan: SpectralPlan<T>,
    pub points: usize,
    /// Flat spectrum index and multiplicity of each retained mode.
    modes: Vec<(usize, T)>,
}

impl<T: Real> Workspace<T> {
    pub fn new(config: &FnoConfig, n: usize) -> Result<Self> {
        if n < config.min_resolution() {
            return Err(PicoreError::ResolutionTooLow {
                resolution: n,
                modes: config.modes,
            });
        }
        let m = config.modes;
        let one = T::one();
        let two = T::lit(2.0);
        let modes = if config.spatial_dims == 1 {
            (0..m).map(|k| (k, if k == 0 { one } else { two })).collect()
        } else {
            (0..m)
                .chain(n - m..n)
                .flat_map(|i| (0..m).map(move |j| (i * n + j, if j == 0 { one } else { two })))
                .collect()
        };
        let plan = SpectralPlan::new(config.spatial_dims, n);
        Ok(Self {
            points: plan.len(),
            plan,
            modes,
        })
    }

    fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// `out[o] = Re IDFT(Σ_i W[i][o] ⊙ DFT(h[i]))` on the retained modes.
    /// Returns the output and the retained input spectra.
    fn spectral_forward(&self, w: &[T], h: &[T], width: usize) -> (Vec<T>, Vec<C<T>>) {
        let p = self.points;
        let m = self.n_modes();
        let mut xs = vec![C::new(T::zero(), T::zero()); width * m];
        for i in 0..width {
            let spec = self.plan.forward_real(&h[i * p..(i + 1) * p]);
            for (k, &(idx, _)) in self.modes.iter().enumerate() {
                xs[i * m + k] = spec[idx];
            }
        }
        let inv = T::one() / T::lit(p as f64);
        let mut out = vec![T::zero(); width * p];
        let mut buf = vec![C::new(T::zero(), T::zero()); p];
        for o in 0..width {
            buf.fill(C::new(T::zero(), T::zero()));
            for (k, &(idx, c)) in self.modes.iter().enumerate() {
                let mut acc = C::new(T::zero(), T::zero());
                for i in 0..width {
                    let wi = 2 * ((i * width + o) * m + k);
                    acc = acc + C::new(w[wi], w[wi + 1]) * xs[i * m + k];
                }
                buf[idx] = acc * c;
            }
            self.plan.inverse(&mut buf);
            for (y, b) in out[o * p..(o + 1) * p].iter_mut().zip(&buf) {
                *y = b.re * inv;
            }
        }
        (out, xs)
    }

    /// Reverse pass of [`Self::spectral_forward`]: accumulates the weight
    /// gradient into `gw` and returns the input gradient.
    fn spectral_backward(&self, w: &[T], xs: &[C<T>], gz: &[T], width: usize, gw: &mut [T]) -> Vec<T> {
        let p = self.points;
        let m = self.n_modes();
        let inv = T::one() / T::lit(p as f64);
        let mut gy = vec![C::new(T::zero(), T::zero()); width * m];
        for o in 0..width {
            let spec = self.plan.forward_real(&gz[o * p..(o + 1) * p]);
            for (k, &(idx, c)) in self.modes.iter().enumerate() {
                gy[o * m + k] = spec[idx] * (c * inv);
            }
        }
        let mut gh = vec![T::zero(); width * p];
        let mut buf = vec![C::new(T::zero(), T::zero()); p];
        for i in 0..width {
            buf.fill(C::new(T::zero(), T::zero()));
            for (k, &(idx, _)) in self.modes.iter().enumerate() {
                let x = xs[i * m + k].conj();
                let mut acc = C::new(T::zero(), T::zero());
                for o in 0..width {
                    let wi = 2 * ((i * width + o) * m + k);
                    let g = gy[o * m + k];
                    let dw = g * x;
                    gw[wi] += dw.re;
                    gw[wi + 1] += dw.im;
                    acc = acc + g * C::new(w[wi], -w[wi + 1]);
                }
                buf[idx] = acc;
            }
            self.plan.inverse(&mut buf);
            for (g, b) in gh[i * p..(i + 1) * p].iter_mut().zip(&buf) {
                *g = b.re;
            }
        }
        gh
    }
}

/// `y[o] = Σ_i W[o][i] x[i] + b[o]` pointwise over `p` points.
fn affine<T: Real>(w: &[T], b: &[T], x: &[T], n_in: usize, n_out: usize, p: usize) -> Vec<T> {
    let mut y = vec![T::zero(); n_out * p];
    for o in 0..n_out {
        let row = &mut y[o * p..(o + 1) * p];
        row.fill(b[o]);
        for i in 0..n_in {
            let c = w[o * n_in + i];
            for (yy, &xx) in row.iter_mut().zip(&x[i * p..(i + 1) * p]) {
                *yy += c * xx;
            }
        }
    }
    y
}

/// Reverse pass of [`affine`]; accumulates into `gw`, `gb` and returns the
/// input gradient.
fn affine_backward<T: Real>(
    w: &[T],
    x: &[T],
    gy: &[T],
    (n_in, n_out, p): (usize, usize, usize),
    gw: &mut [T],
    gb: &mut [T],
) -> Vec<T> {
    let mut gx = vec![T::zero(); n_in * p];
    for o in 0..n_out {
        let g = &gy[o * p..(o + 1) * p];
        gb[o] += g.iter().copied().sum::<T>();
        for i in 0..n_in {
            let xi = &x[i * p..(i + 1) * p];
            gw[o * n_in + i] += g.iter().zip(xi).map(|(&a, &b)| a * b).sum::<T>();
            let c = w[o * n_in + i];
            for (gg, &a) in gx[i * p..(i + 1) * p].iter_mut().zip(g) {
                *gg += c * a;
            }
        }
    }
    gx
}

struct LayerCache<T> {
    h: Vec<T>,
    xs: Vec<C<T>>,
    z: Vec<T>,
}

/// Intermediate values kept for the reverse pass.
pub(crate) struct Cache<T> {
    x: Vec<T>,
    layers: Vec<LayerCache<T>>,
    h_last: Vec<T>,
    r: Vec<T>,
    /// Input of the final projection map.
    pub q: Vec<T>,
}

pub(crate) fn forward<T: Real>(params: &FnoParams<T>, ws: &Workspace<T>, x: &[T]) -> (Vec<T>, Cache<T>) {
    let cfg = &params.config;
    let lay: Layout = cfg.layout();
    let v = &params.values;
    let (w, p) = (cfg.width, ws.points);
    let act = cfg.activation;
    let mut h = affine(&v[lay.lift_w.clone()], &v[lay.lift_b.clone()], x, cfg.in_channels, w, p);
    let mut layers = Vec::with_capacity(cfg.n_layers);
    for (l, ll) in lay.layers.iter().enumerate() {
        let (mut z, xs) = ws.spectral_forward(&v[ll.spectral.clone()], &h, w);
        let by = affine(&v[ll.bypass_w.clone()], &v[ll.bypass_b.clone()], &h, w, w, p);
        for (a, b) in z.iter_mut().zip(&by) {
            *a += *b;
        }
        let next = if l + 1 < cfg.n_layers {
            z.iter().map(|&s| act.apply(s)).collect()
        } else {
            z.clone()
        };
        layers.push(LayerCache { h, xs, z });
        h = next;
    }
    let r = affine(&v[lay.proj1_w.clone()], &v[lay.proj1_b.clone()], &h, w, w, p);
    let q: Vec<T> = r.iter().map(|&s| act.apply(s)).collect();
    let out = affine(&v[lay.proj2_w.clone()], &v[lay.proj2_b.clone()], &q, w, cfg.out_channels, p);
    let cache = Cache {
        x: x.to_vec(),
        layers,
        h_last: h,
        r,
        q,
    };
    (out, cache)
}

/// Gradient of the final projection map (weights `[out][width]`, then
/// bias) for an output cotangent.
pub(crate) fn last_layer_grad<T: Real>(config: &FnoConfig, q: &[T], g_out: &[T], p: usize) -> Vec<T> {
    let (w, o) = (config.width, config.out_channels);
    let mut g = vec![T::zero(); w * o + o];
    let (gw, gb) = g.split_at_mut(w * o);
    for oc in 0..o {
        let go = &g_out[oc * p..(oc + 1) * p];
        gb[oc] = go.iter().copied().sum();
        for i in 0..w {
            gw[oc * w + i] = go.iter().zip(&q[i * p..(i + 1) * p]).map(|(&a, &b)| a * b).sum();
        }
    }
    g
}

/// Output of the final projection map for a perturbation `dθ` of its
/// parameters: `dW q + db`.
pub(crate) fn last_layer_jvp<T: Real>(config: &FnoConfig, q: &[T], d: &[T], p: usize) -> Vec<T> {
    let (w, o) = (config.width, config.out_channels);
    affine(&d[..w * o], &d[w * o..], q, w, o, p)
}

pub(crate) fn backward<T: Real>(params: &FnoParams<T>, ws: &Workspace<T>, cache: &Cache<T>, g_out: &[T]) -> Vec<T> {
    let cfg = &params.config;
    let lay = cfg.layout();
    let v = &params.values;
    let (w, p) = (cfg.width, ws.points);
    let act = cfg.activation;
    let mut grad = vec![T::zero(); lay.total];
    let (head, tail) = grad.split_at_mut(lay.proj2_b.start);
    let gq = affine_backward(
        &v[lay.proj2_w.clone()],
        &cache.q,
        g_out,
        (w, cfg.out_channels, p),
        &mut head[lay.proj2_w.clone()],
        tail,
    );
    let gr: Vec<T> = gq.iter().zip(&cache.r).map(|(&g, &r)| g * act.grad(r)).collect();
    let mut gh = {
        let (head, tail) = grad.split_at_mut(lay.proj1_b.start);
        affine_backward(
            &v[lay.proj1_w.clone()],
            &cache.h_last,
            &gr,
            (w, w, p),
            &mut head[lay.proj1_w.clone()],
            &mut tail[..w],
        )
    };
    for (l, ll) in lay.layers.iter().enumerate().rev() {
        let lc = &cache.layers[l];
        let gz: Vec<T> = if l + 1 < cfg.n_layers {
            gh.iter().zip(&lc.z).map(|(&g, &z)| g * act.grad(z)).collect()
        } else {
            gh
        };
        let (head, tail) = grad.split_at_mut(ll.bypass_b.start);
        let mut g_in = affine_backward(
            &v[ll.bypass_w.clone()],
            &lc.h,
            &gz,
            (w, w, p),
            &mut head[ll.bypass_w.clone()],
            &mut tail[..w],
        );
        let gs = ws.spectral_backward(&v[ll.spectral.clone()], &lc.xs, &gz, w, &mut grad[ll.spectral.clone()]);
        for (a, b) in g_in.iter_mut().zip(&gs) {
            *a += *b;
        }
        gh = g_in;
    }
    let (head, tail) = grad.split_at_mut(lay.lift_b.start);
    affine_backward(
        &v[lay.lift_w.clone()],
        &cache.x,
        &gh,
        (cfg.in_channels, w, p),
        &mut head[lay.lift_w.clone()],
        &mut tail[..w],
    );
    grad
}

/// Network input for an instance: the input function followed by one
/// coordinate channel per spatial axis.
pub fn encode_input<T: Real>(instance: &PdeInstance<T>) -> Vec<T> {
    let g = &instance.grid;
    let n = g.n_points;
    let mut x = instance.input.values.clone();
    match g.spatial_dims {
        1 => x.extend((0..n).map(|j| T::lit(g.coord(j)))),
        _ => {
            x.extend((0..n * n).map(|c| T::lit(g.coord(c / n))));
            x.extend((0..n * n).map(|c| T::lit(g.coord(c % n))));
        }
    }
    x
}

/// Wraps raw network output as a field on the instance's solution grid.
pub fn decode_output<T: Real>(values: Vec<T>, grid: &GridSpec) -> Result<Field<T>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(PicoreError::NonFiniteState { step: 0 });
    }
    Field::new(values, grid.clone())
}

pub(crate) fn check_task<T: Real>(config: &FnoConfig, instance: &PdeInstance<T>) -> Result<()> {
    let g = &instance.grid;
    if config.spatial_dims != g.spatial_dims
        || config.in_channels != 1 + g.spatial_dims
        || config.out_channels != g.n_frames()
    {
        return Err(PicoreError::Config(format!(
            "network ({}D, {} -> {} channels) does not match the task ({}D, {} frames)",
            config.spatial_dims,
            config.in_channels,
            config.out_channels,
            g.spatial_dims,
            g.n_frames()
        )));
    }
    Ok(())
}

/// Evaluates the operator on one instance at the instance's resolution.
pub fn fno_forward<T: Real>(params: &FnoParams<T>, instance: &PdeInstance<T>) -> Result<Field<T>> {
    check_task(&params.config, instance)?;
    let ws = Workspace::new(&params.config, instance.grid.n_points)?;
    let (out, _) = forward(params, &ws, &encode_input(instance));
    decode_output(out, &instance.grid)
}

/// Evaluates the operator on raw channel-major input at resolution `n`.
pub fn fno_forward_channels<T: Real>(params: &FnoParams<T>, input: &[T], n: usize) -> Result<Vec<T>> {
    let ws = Workspace::new(&params.config, n)?;
    let expected = params.config.in_channels * ws.points;
    if input.len() != expected {
        return Err(PicoreError::ShapeMismatch {
            expected: vec![expected],
            got: vec![input.len()],
        });
    }
    Ok(forward(params, &ws, input).0)
}

#[cfg(test)]
mod tests {
    use super::super::{fno_init, Activation};
    use super::*;
    use crate::pde::{PdeKind, PdeParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn single_channel(dims: usize, modes: usize) -> FnoConfig {
        FnoConfig {
            spatial_dims: dims,
            modes,
            width: 1,
            n_layers: 1,
            in_channels: 1,
            out_channels: 1,
            activation: Activation::Identity,
        }
    }

    /// Sets lifting and both projections to the identity, bypass to zero.
    fn identity_wrap(params: &mut FnoParams<f64>) {
        let lay = params.config.layout();
        let v = &mut params.values;
        v[lay.lift_w.clone()].fill(1.0);
        v[lay.lift_b.clone()].fill(0.0);
        v[lay.layers[0].bypass_w.clone()].fill(0.0);
        v[lay.layers[0].bypass_b.clone()].fill(0.0);
        v[lay.proj1_w.clone()].fill(1.0);
        v[lay.proj1_b.clone()].fill(0.0);
        v[lay.proj2_w.clone()].fill(1.0);
        v[lay.proj2_b.clone()].fill(0.0);
    }

    #[test]
    fn matches_dense_dft_oracle_1d() {
        let (n, m) = (16, 5);
        let mut params = fno_init::<f64>(&single_channel(1, m), 1).unwrap();
        identity_wrap(&mut params);
        let lay = params.config.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for v in &mut params.values[lay.layers[0].spectral.clone()] {
            *v = rng.random::<f64>() - 0.5;
        }
        let w: Vec<(f64, f64)> = params.values[lay.layers[0].spectral.clone()]
            .chunks(2)
            .map(|c| (c[0], c[1]))
            .collect();
        // dense matrix: y_j = (1/n) Σ_{k<m} c_k Re(W_k Σ_l x_l e^{2πi k (j-l)/n})
        let mut mat = vec![vec![0.0; n]; n];
        for (j, row) in mat.iter_mut().enumerate() {
            for (l, e) in row.iter_mut().enumerate() {
                for (k, &(wr, wi)) in w.iter().enumerate() {
                    let c = if k == 0 { 1.0 } else { 2.0 };
                    let th = 2.0 * PI * (k * (n + j - l) % n) as f64 / n as f64;
                    *e += c * (wr * th.cos() - wi * th.sin()) / n as f64;
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let y = fno_forward_channels(&params, &x, n).unwrap();
        for j in 0..n {
            let expect: f64 = (0..n).map(|l| mat[j][l] * x[l]).sum();
            assert!((y[j] - expect).abs() < 1e-12, "{j}: {} vs {expect}", y[j]);
        }
    }

    #[test]
    fn matches_dense_dft_oracle_2d() {
        let (n, m) = (8, 3);
        let mut params = fno_init::<f64>(&single_channel(2, m), 1).unwrap();
        identity_wrap(&mut params);
        let lay = params.config.layout();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for v in &mut params.values[lay.layers[0].spectral.clone()] {
            *v = rng.random::<f64>() - 0.5;
        }
        let spec = params.values[lay.layers[0].spectral.clone()].to_vec();
        let rows: Vec<usize> = (0..m).chain(n - m..n).collect();
        let x: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>() - 0.5).collect();
        let y = fno_forward_channels(&params, &x, n).unwrap();
        for a in 0..n {
            for b in 0..n {
                let mut expect = 0.0;
                for (ri, &k1) in rows.iter().enumerate() {
                    for k2 in 0..m {
                        let idx = 2 * (ri * m + k2);
                        let (wr, wi) = (spec[idx], spec[idx + 1]);
                        let c = if k2 == 0 { 1.0 } else { 2.0 };
                        for s in 0..n {
                            for t in 0..n {
                                let th = 2.0 * PI * ((k1 * (a + n - s) + k2 * (b + n - t)) % n) as f64 / n as f64;
                                expect += c * (wr * th.cos() - wi * th.sin()) * x[s * n + t] / (n * n) as f64;
                            }
                        }
                    }
                }
                assert!((y[a * n + b] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_projection_gives_zero_output() {
        let cfg = FnoConfig::for_task(PdeKind::Burgers, 4, 4, 6, 2);
        let mut params = fno_init::<f64>(&cfg, 0).unwrap();
        let r = params.last_layer();
        params.values[r].fill(0.0);
        let x: Vec<f64> = (0..2 * 16).map(|i| (i as f64).sin()).collect();
        let y = fno_forward_channels(&params, &x, 16).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn resolution_checks_and_invariance() {
        let cfg = FnoConfig::for_task(PdeKind::Advection, 3, 8, 4, 2);
        let params = fno_init::<f64>(&cfg, 0).unwrap();
        let make = |n: usize| {
            let grid = GridSpec::periodic_1d(n, 3, 2.0);
            let u0 = Field::from_fn(grid.spatial_only(), |x| (2.0 * PI * x[0]).sin());
            PdeInstance::new(PdeParams::Advection { speed: 0.4 }, u0, grid).unwrap()
        };
        let a = fno_forward(&params, &make(64)).unwrap();
        let b = fno_forward(&params, &make(128)).unwrap();
        assert_eq!(a.shape(), vec![3, 64]);
        assert_eq!(b.shape(), vec![3, 128]);
        let sub: Vec<f64> = (0..3).flat_map(|t| (0..64).map(move |j| (t, j))).map(|(t, j)| b.values[t * 128 + 2 * j]).collect();
        assert_ne!(sub, a.values);
        assert!(matches!(
            fno_forward(&params, &make(8)),
            Err(PicoreError::ResolutionTooLow { .. })
        ));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dims in [1, 2] {
            let n = if dims == 1 { 16 } else { 8 };
            let cfg = FnoConfig {
                spatial_dims: dims,
                modes: 3,
                width: 3,
                n_layers: 2,
                in_channels: 2,
                out_channels: 2,
                activation: Activation::Gelu,
            };
            let params = fno_init::<f64>(&cfg, 3).unwrap();
            let ws = Workspace::new(&cfg, n).unwrap();
            let p = ws.points;
            let x: Vec<f64> = (0..2 * p).map(|_| rng.random::<f64>() - 0.5).collect();
            let g_out: Vec<f64> = (0..2 * p).map(|_| rng.random::<f64>() - 0.5).collect();
            let objective = |params: &FnoParams<f64>| -> f64 {
                let (y, _) = forward(params, &ws, &x);
                y.iter().zip(&g_out).map(|(a, b)| a * b).sum()
            };
            let (_, cache) = forward(&params, &ws, &x);
            let grad = backward(&params, &ws, &cache, &g_out);
            for k in 0..params.len() {
                let h = 1e-6;
                let mut pp = params.clone();
                pp.values[k] += h;
                let fp = objective(&pp);
                pp.values[k] -= 2.0 * h;
                let fm = objective(&pp);
                let fd = (fp - fm) / (2.0 * h);
                let tol = 1e-6 * (1.0 + fd.abs());
                assert!((fd - grad[k]).abs() < tol, "dims {dims} param {k}: {fd} vs {}", grad[k]);
            }
        }
    }
}
