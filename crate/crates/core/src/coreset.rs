//! Coreset selectors over per-sample features, losses or raw inputs.
//!
//! All tie-breaking is towards the lowest index.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PicoreError, Result};
use crate::operator_net::LossKind;
use crate::scalar::{dot, sum_sq, Real};

/// Per-sample feature vectors (one column per sample) and scalar losses.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix<T> {
    pub columns: Vec<Vec<T>>,
    pub per_sample_loss: Vec<T>,
    pub source: LossKind,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(columns: Vec<Vec<T>>, per_sample_loss: Vec<T>, source: LossKind) -> Result<Self> {
        let d = columns.first().map_or(0, Vec::len);
        if columns.is_empty() || d == 0 {
            return Err(PicoreError::InvalidArgument("feature matrix must be at least 1 x 1".into()));
        }
        if columns.iter().any(|c| c.len() != d) || per_sample_loss.len() != columns.len() {
            return Err(PicoreError::ShapeMismatch {
                expected: vec![d, columns.len()],
                got: vec![per_sample_loss.len()],
            });
        }
        let finite = columns.iter().flatten().chain(&per_sample_loss).all(|v| v.is_finite());
        if !finite {
            return Err(PicoreError::NonFiniteState { step: 0 });
        }
        Ok(Self {
            columns,
            per_sample_loss,
            source,
        })
    }

    pub fn n(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }
}

/// Selected sample indices with positive weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoresetSelection {
    pub algorithm: String,
    pub beta: f64,
    pub seed: u64,
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl CoresetSelection {
    fn uniform(algorithm: Selector, n: usize, seed: u64, indices: Vec<usize>) -> Self {
        let w = n as f64 / indices.len() as f64;
        Self {
            algorithm: algorithm.to_string(),
            beta: indices.len() as f64 / n as f64,
            seed,
            weights: vec![w; indices.len()],
            indices,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Coreset size `⌈βn⌉`.
pub fn budget(beta: f64, n: usize) -> Result<usize> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(PicoreError::Config(format!("beta must lie in (0, 1], got {beta}")));
    }
    // absorb representation error such as 0.3 * 10 = 3.0000000000000004
    let k = (beta * n as f64 - 1e-9).ceil().max(1.0) as usize;
    check_budget(k, n)?;
    Ok(k)
}

fn check_budget(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(PicoreError::BudgetOutOfRange { k, n });
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Craig,
    GradMatch,
    AdaCore,
    El2n,
    Grand,
    Kmeans,
    Cosine,
    Herding,
}

impl Selector {
    pub const ALL: [Selector; 8] = [
        Selector::Craig,
        Selector::GradMatch,
        Selector::AdaCore,
        Selector::El2n,
        Selector::Grand,
        Selector::Kmeans,
        Selector::Cosine,
        Selector::Herding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Selector::Craig => "craig",
            Selector::GradMatch => "gradmatch",
            Selector::AdaCore => "adacore",
            Selector::El2n => "el2n",
            Selector::Grand => "grand",
            Selector::Kmeans => "kmeans",
            Selector::Cosine => "cosine",
            Selector::Herding => "herding",
        }
    }

    /// Input-space selectors need neither a network nor labels.
    pub fn is_unsupervised(self) -> bool {
        matches!(self, Selector::Kmeans | Selector::Cosine | Selector::Herding)
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Selector {
    type Err = PicoreError;

    fn from_str(s: &str) -> Result<Self> {
        Selector::ALL
            .into_iter()
            .find(|a| a.name() == s.to_ascii_lowercase())
            .ok_or_else(|| PicoreError::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Dense symmetric similarity matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> SimilarityMatrix<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

fn dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt()
}

/// `s_ij = M - ‖g_i - g_j‖` with `M` the largest pairwise distance.
pub fn similarity_matrix<T: Real>(columns: &[Vec<T>]) -> SimilarityMatrix<T> {
    let n = columns.len();
    let mut d: Vec<T> = (0..n * n)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / n, c % n);
            if i == j {
                T::zero()
            } else {
                let (a, b) = (i.min(j), i.max(j));
                dist(&columns[a], &columns[b])
            }
        })
        .collect();
    let m = d.iter().copied().fold(T::zero(), T::max);
    for v in &mut d {
        *v = m - *v;
    }
    SimilarityMatrix { n, data: d }
}

/// Facility-location value `Σ_i max_{j∈S} s_ij` (0 for the empty set).
pub fn facility_location<T: Real>(sim: &SimilarityMatrix<T>, set: &[usize]) -> T {
    (0..sim.n)
        .map(|i| set.iter().map(|&j| sim.get(i, j)).fold(T::zero(), T::max))
        .sum()
}

/// Default stochastic-greedy candidate pool `min(n, ⌈(n/k)·ln 100⌉)`.
pub fn default_subsample(n: usize, k: usize) -> usize {
    let pool = ((n as f64 / k as f64) * 100f64.ln()).ceil() as usize;
    pool.clamp(1, n)
}

/// Stochastic greedy on a similarity matrix, weights are cluster sizes.
fn greedy_facility_location<T: Real>(
    sim: &SimilarityMatrix<T>,
    k: usize,
    subsample: usize,
    seed: u64,
) -> (Vec<usize>, Vec<f64>) {
    let n = sim.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = vec![T::zero(); n];
    let mut chosen = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    for _ in 0..k {
        let remaining: Vec<usize> = (0..n).filter(|&j| !chosen[j]).collect();
        let mut candidates: Vec<usize> = if subsample >= remaining.len() {
            remaining
        } else {
            sample_indices(&mut rng, remaining.len(), subsample)
                .into_iter()
                .map(|p| remaining[p])
                .collect()
        };
        candidates.sort_unstable();
        let gains: Vec<T> = candidates
            .par_iter()
            .map(|&j| {
                sim.row(j)
                    .iter()
                    .zip(&best)
                    .map(|(&s, &b)| (s - b).max(T::zero()))
                    .sum()
            })
            .collect();
        let mut pick = 0;
        for (c, &g) in gains.iter().enumerate() {
            if g > gains[pick] {
                pick = c;
            }
        }
        let j = candidates[pick];
        chosen[j] = true;
        selected.push(j);
        for (b, &s) in best.iter_mut().zip(sim.row(j)) {
            *b = b.max(s);
        }
    }
    let weights = cluster_sizes(sim, &selected);
    (selected, weights)
}

/// Number of samples whose most similar selected element is each selected
/// index; selected elements claim themselves.
fn cluster_sizes<T: Real>(sim: &SimilarityMatrix<T>, selected: &[usize]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..selected.len()).collect();
    order.sort_by_key(|&p| selected[p]);
    let mut counts = vec![0.0; selected.len()];
    for i in 0..sim.n {
        let owner = match selected.iter().position(|&j| j == i) {
            Some(p) => p,
            None => {
                let mut best = order[0];
                for &p in &order[1..] {
                    if sim.get(i, selected[p]) > sim.get(i, selected[best]) {
                        best = p;
                    }
                }
                best
            }
        };
        counts[owner] += 1.0;
    }
    counts
}

/// CRAIG: facility-location coreset over feature columns.
pub fn select_craig<T: Real>(
    features: &FeatureMatrix<T>,
    k: usize,
    subsample: Option<usize>,
    seed: u64,
) -> Result<CoresetSelection> {
    craig_columns(&features.columns, k, subsample, seed, Selector::Craig)
}

fn craig_columns<T: Real>(
    columns: &[Vec<T>],
    k: usize,
    subsample: Option<usize>,
    seed: u64,
    algorithm: Selector,
) -> Result<CoresetSelection> {
    let n = columns.len();
    check_budget(k, n)?;
    let pool = subsample.unwrap_or_else(|| default_subsample(n, k));
    if pool == 0 {
        return Err(PicoreError::InvalidArgument("subsample must be >= 1".into()));
    }
    let sim = similarity_matrix(columns);
    let (indices, weights) = greedy_facility_location(&sim, k, pool, seed);
    Ok(CoresetSelection {
        algorithm: algorithm.to_string(),
        beta: k as f64 / n as f64,
        seed,
        indices,
        weights,
    })
}

/// AdaCore: CRAIG on gradients divided element-wise by `|h| + eps`.
pub fn select_adacore<T: Real>(
    features: &FeatureMatrix<T>,
    k: usize,
    hess_diag: &[T],
    eps: f64,
    subsample: Option<usize>,
    seed: u64,
) -> Result<CoresetSelection> {
    if hess_diag.len() != features.dim() {
        return Err(PicoreError::ShapeMismatch {
            expected: vec![features.dim()],
            got: vec![hess_diag.len()],
        });
    }
    let eps = T::lit(eps);
    let scale: Vec<T> = hess_diag.iter().map(|&h| T::one() / (h.abs() + eps)).collect();
    let columns: Vec<Vec<T>> = features
        .columns
        .iter()
        .map(|c| c.iter().zip(&scale).map(|(&g, &s)| g * s).collect())
        .collect();
    craig_columns(&columns, k, subsample, seed, Selector::AdaCore)
}

/// Outcome of non-negative orthogonal matching pursuit.
#[derive(Clone, Debug, PartialEq)]
pub struct OmpResult<T> {
    /// Support in pick order.
    pub support: Vec<usize>,
    /// Coefficients aligned with `support` (zeros kept).
    pub coef: Vec<T>,
    /// `‖b - A_S x_S‖` after each refit.
    pub residual_norms: Vec<T>,
}

/// Non-negative ridge least squares `min ‖A x - b‖² + ridge‖x‖², x ≥ 0` by
/// accelerated projected gradient, warm-started at `x0`.
pub fn nnls_ridge<T: Real>(cols: &[&[T]], b: &[T], ridge: f64, x0: &[T]) -> Vec<T> {
    let s = cols.len();
    let ridge = T::lit(ridge);
    let mut gram = vec![T::zero(); s * s];
    for i in 0..s {
        for j in i..s {
            let v = dot(cols[i], cols[j]);
            gram[i * s + j] = v;
            gram[j * s + i] = v;
        }
        gram[i * s + i] += ridge;
    }
    let c: Vec<T> = cols.iter().map(|a| dot(a, b)).collect();
    // Gershgorin bound on the largest eigenvalue
    let lip = (0..s)
        .map(|i| gram[i * s..(i + 1) * s].iter().map(|v| v.abs()).sum::<T>())
        .fold(T::zero(), T::max);
    if lip == T::zero() {
        return vec![T::zero(); s];
    }
    let step = T::one() / lip;
    let grad = |x: &[T]| -> Vec<T> { (0..s).map(|i| dot(&gram[i * s..(i + 1) * s], x) - c[i]).collect() };
    // projected-gradient optimality: |g_i| on the free set, max(0, -g_i) at 0
    let kkt = |x: &[T], g: &[T]| -> T {
        x.iter()
            .zip(g)
            .map(|(&xi, &gi)| if xi > T::zero() { gi.abs() } else { (-gi).max(T::zero()) })
            .fold(T::zero(), T::max)
    };
    let tol = T::lit(1e-10) * c.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let mut x = x0.to_vec();
    let mut y = x.clone();
    let mut t = T::one();
    for _ in 0..200_000 {
        let gy = grad(&y);
        let next: Vec<T> = (0..s).map(|i| (y[i] - step * gy[i]).max(T::zero())).collect();
        // restart the momentum when it points uphill
        let uphill: T = (0..s).map(|i| gy[i] * (next[i] - x[i])).sum();
        let t_next = if uphill > T::zero() {
            T::one()
        } else {
            (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0)
        };
        let mom = (t - T::one()) / t_next;
        y = next.iter().zip(&x).map(|(&a, &b)| (a + mom * (a - b)).max(T::zero())).collect();
        x = next;
        t = t_next;
        if kkt(&x, &grad(&x)) <= tol {
            break;
        }
    }
    x
}

/// Greedy non-negative OMP for `min ‖A x - b‖` with `‖x‖₀ ≤ k`.
pub fn omp_nnls<T: Real>(columns: &[Vec<T>], b: &[T], k: usize, ridge: f64) -> Result<OmpResult<T>> {
    let n = columns.len();
    check_budget(k, n)?;
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(PicoreError::InvalidArgument("ridge must be >= 0".into()));
    }
    let mut in_support = vec![false; n];
    let mut support = Vec::with_capacity(k);
    let mut coef: Vec<T> = Vec::with_capacity(k);
    let mut residual = b.to_vec();
    let mut norms = Vec::with_capacity(k);
    for _ in 0..k {
        let corr: Vec<T> = columns.par_iter().map(|a| dot(a, &residual)).collect();
        let mut pick: Option<usize> = None;
        for j in (0..n).filter(|&j| !in_support[j]) {
            if pick.is_none_or(|p| corr[j] > corr[p]) {
                pick = Some(j);
            }
        }
        let j = pick.expect("budget leaves a candidate");
        in_support[j] = true;
        support.push(j);
        coef.push(T::zero());
        let cols: Vec<&[T]> = support.iter().map(|&i| columns[i].as_slice()).collect();
        coef = nnls_ridge(&cols, b, ridge, &coef);
        residual = b.to_vec();
        for (a, &x) in cols.iter().zip(&coef) {
            for (r, &v) in residual.iter_mut().zip(a.iter()) {
                *r -= x * v;
            }
        }
        norms.push(sum_sq(&residual).sqrt());
    }
    Ok(OmpResult {
        support,
        coef,
        residual_norms: norms,
    })
}

/// GradMatch: OMP towards the mean gradient. Weights are `n·x` so that they
/// are on the same scale as cluster counts; zero coefficients are pruned.
pub fn select_gradmatch<T: Real>(features: &FeatureMatrix<T>, k: usize, ridge: f64) -> Result<CoresetSelection> {
    let n = features.n();
    let inv = T::one() / T::lit(n as f64);
    let mut b = vec![T::zero(); features.dim()];
    for c in &features.columns {
        for (s, &v) in b.iter_mut().zip(c) {
            *s += v * inv;
        }
    }
    let omp = omp_nnls(&features.columns, &b, k, ridge)?;
    let (indices, weights): (Vec<usize>, Vec<f64>) = omp
        .support
        .iter()
        .zip(&omp.coef)
        .filter(|(_, &x)| x > T::zero())
        .map(|(&i, &x)| (i, x.as_f64() * n as f64))
        .unzip();
    Ok(CoresetSelection {
        algorithm: Selector::GradMatch.to_string(),
        beta: k as f64 / n as f64,
        seed: 0,
        indices,
        weights,
    })
}

/// Hutchinson diagonal estimate `(1/m) Σ z ⊙ H z` with Rademacher probes.
pub fn hutchinson_diag<T: Real>(hvp: impl Fn(&[T]) -> Vec<T>, d: usize, probes: usize, seed: u64) -> Result<Vec<T>> {
    if probes == 0 {
        return Err(PicoreError::InvalidArgument("probes must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![T::zero(); d];
    for _ in 0..probes {
        let z: Vec<T> = (0..d)
            .map(|_| if rng.random::<bool>() { T::one() } else { -T::one() })
            .collect();
        let hz = hvp(&z);
        if hz.len() != d {
            return Err(PicoreError::ShapeMismatch {
                expected: vec![d],
                got: vec![hz.len()],
            });
        }
        for ((a, &zi), &h) in acc.iter_mut().zip(&z).zip(&hz) {
            *a += zi * h;
        }
    }
    let m = T::lit(probes as f64);
    Ok(acc.into_iter().map(|a| a / m).collect())
}

/// Indices of the `k` largest scores, ties to the lowest index.
fn top_k<T: Real>(scores: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// EL2N: the `k` samples with the largest individual loss.
pub fn select_el2n<T: Real>(per_sample_loss: &[T], k: usize) -> Result<CoresetSelection> {
    let n = per_sample_loss.len();
    check_budget(k, n)?;
    if per_sample_loss.iter().any(|v| !v.is_finite()) {
        return Err(PicoreError::NonFiniteState { step: 0 });
    }
    Ok(CoresetSelection::uniform(Selector::El2n, n, 0, top_k(per_sample_loss, k)))
}

/// GraNd: the `k` samples with the largest gradient norm.
pub fn select_grand<T: Real>(features: &FeatureMatrix<T>, k: usize) -> Result<CoresetSelection> {
    let n = features.n();
    check_budget(k, n)?;
    let norms: Vec<T> = features.columns.iter().map(|c| sum_sq(c).sqrt()).collect();
    Ok(CoresetSelection::uniform(Selector::Grand, n, 0, top_k(&norms, k)))
}

fn sq_dist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn check_inputs<T: Real>(inputs: &[Vec<T>], k: usize) -> Result<()> {
    check_budget(k, inputs.len())?;
    let d = inputs[0].len();
    if inputs.iter().any(|x| x.len() != d) {
        return Err(PicoreError::InvalidArgument("inputs differ in length".into()));
    }
    Ok(())
}

/// k-means (k-means++ seeding, Lloyd iterations); each centre is represented
/// by its nearest not-yet-claimed data point.
pub fn select_kmeans<T: Real>(inputs: &[Vec<T>], k: usize, iters: usize, seed: u64) -> Result<CoresetSelection> {
    check_inputs(inputs, k)?;
    let n = inputs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<T>> = vec![inputs[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = inputs.iter().map(|x| sq_dist(x, &centers[0]).as_f64()).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centers.push(inputs[next].clone());
        let c = centers.last().unwrap();
        for (d, x) in d2.iter_mut().zip(inputs) {
            *d = d.min(sq_dist(x, c).as_f64());
        }
    }
    let nearest = |centers: &[Vec<T>], x: &[T]| -> usize {
        let mut best = 0;
        let mut bd = sq_dist(x, &centers[0]);
        for (c, center) in centers.iter().enumerate().skip(1) {
            let d = sq_dist(x, center);
            if d < bd {
                bd = d;
                best = c;
            }
        }
        best
    };
    let mut assign: Vec<usize> = inputs.par_iter().map(|x| nearest(&centers, x)).collect();
    for _ in 0..iters {
        let d = inputs[0].len();
        let mut sums = vec![vec![T::zero(); d]; k];
        let mut counts = vec![0usize; k];
        for (x, &a) in inputs.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(x) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = T::one() / T::lit(counts[c] as f64);
                centers[c] = sums[c].iter().map(|&s| s * inv).collect();
            }
        }
        let next: Vec<usize> = inputs.par_iter().map(|x| nearest(&centers, x)).collect();
        let converged = next == assign;
        assign = next;
        if converged {
            break;
        }
    }
    let mut claimed = vec![false; n];
    let mut indices = Vec::with_capacity(k);
    for c in &centers {
        let mut order: Vec<(T, usize)> = inputs.iter().enumerate().map(|(i, x)| (sq_dist(x, c), i)).collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let pick = order.into_iter().map(|(_, i)| i).find(|&i| !claimed[i]).unwrap();
        claimed[pick] = true;
        indices.push(pick);
    }
    Ok(CoresetSelection::uniform(Selector::Kmeans, n, seed, indices))
}

/// Greedy diversity: start from the largest-norm input, then repeatedly add
/// the input whose maximum cosine similarity to the selection is smallest.
pub fn select_cosine<T: Real>(inputs: &[Vec<T>], k: usize) -> Result<CoresetSelection> {
    check_inputs(inputs, k)?;
    let n = inputs.len();
    let norms: Vec<T> = inputs.iter().map(|x| sum_sq(x).sqrt()).collect();
    if let Some(i) = norms.iter().position(|&v| v == T::zero()) {
        return Err(PicoreError::ZeroVector(i));
    }
    let first = top_k(&norms, 1)[0];
    let mut selected = vec![first];
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let cos = |i: usize, j: usize| dot(&inputs[i], &inputs[j]) / (norms[i] * norms[j]);
    let mut max_sim: Vec<T> = (0..n).map(|j| cos(j, first)).collect();
    while selected.len() < k {
        let mut pick: Option<usize> = None;
        for j in (0..n).filter(|&j| !chosen[j]) {
            if pick.is_none_or(|p| max_sim[j] < max_sim[p]) {
                pick = Some(j);
            }
        }
        let j = pick.unwrap();
        chosen[j] = true;
        selected.push(j);
        for (i, m) in max_sim.iter_mut().enumerate() {
            *m = m.max(cos(i, j));
        }
    }
    Ok(CoresetSelection::uniform(Selector::Cosine, n, 0, selected))
}

/// Kernel herding in input space towards the input mean.
pub fn select_herding<T: Real>(inputs: &[Vec<T>], k: usize) -> Result<CoresetSelection> {
    check_inputs(inputs, k)?;
    let n = inputs.len();
    let d = inputs[0].len();
    let inv = T::one() / T::lit(n as f64);
    let mut mu = vec![T::zero(); d];
    for x in inputs {
        for (m, &v) in mu.iter_mut().zip(x) {
            *m += v * inv;
        }
    }
    let mut w = mu.clone();
    let mut chosen = vec![false; n];
    let mut selected = Vec::with_capacity(k);
    while selected.len() < k {
        let mut pick: Option<(usize, T)> = None;
        for j in (0..n).filter(|&j| !chosen[j]) {
            let s = dot(&w, &inputs[j]);
            if pick.is_none_or(|(_, b)| s > b) {
                pick = Some((j, s));
            }
        }
        let j = pick.unwrap().0;
        chosen[j] = true;
        selected.push(j);
        for ((wi, &m), &x) in w.iter_mut().zip(&mu).zip(&inputs[j]) {
            *wi += m - x;
        }
    }
    Ok(CoresetSelection::uniform(Selector::Herding, n, 0, selected))
}
