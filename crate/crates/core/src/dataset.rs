//! Problem samples with optional labels, dataset generation and the on-disk
//! layout (`manifest.json`, `inputs/`, `solutions/`).
//!
//! Inputs are drawn on the fine generation grid and kept there; labels are
//! produced lazily by solving on the fine grid and downsampling to the
//! training resolution.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PicoreError, Result};
use crate::format::Record;
use crate::grid::{downsample, Boundary, Field, GridSpec};
use crate::pde::{
    sample_darcy_coefficient, sample_ns_vorticity, sample_sinusoidal_ic, solve, IcSpec, LabeledSample,
    PdeInstance, PdeKind, PdeParams, SolverOptions,
};
use crate::scalar::Real;

pub const MANIFEST_VERSION: u32 = 1;

/// One problem instance and, once simulated, its reference solution.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T> {
    pub instance: PdeInstance<T>,
    pub solution: Option<Field<T>>,
}

impl<T: Real> Sample<T> {
    pub fn unlabeled(instance: PdeInstance<T>) -> Self {
        Self {
            instance,
            solution: None,
        }
    }

    pub fn labeled(instance: PdeInstance<T>, solution: Field<T>) -> Result<Self> {
        if solution.grid != instance.grid {
            return Err(PicoreError::ShapeMismatch {
                expected: instance.grid.shape(),
                got: solution.shape(),
            });
        }
        Ok(Self {
            instance,
            solution: Some(solution),
        })
    }

    pub fn is_labeled(&self) -> bool {
        self.solution.is_some()
    }
}

/// Anything that can turn a problem into its reference solution. The
/// pipeline only ever labels through this trait, so tests can count calls.
pub trait Labeler: Sync {
    fn label(&self, instance: &PdeInstance<f64>, opts: &SolverOptions) -> Result<LabeledSample<f64>>;
}

/// The built-in numerical solvers.
#[derive(Clone, Copy, Debug, Default)]
pub struct ReferenceSolver;

impl Labeler for ReferenceSolver {
    fn label(&self, instance: &PdeInstance<f64>, opts: &SolverOptions) -> Result<LabeledSample<f64>> {
        solve(instance, opts)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Everything needed to regenerate a dataset bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDatasetSpec")]
pub struct DatasetSpec {
    pub kind: PdeKind,
    pub params: PdeParams,
    pub n_train: usize,
    pub n_test: usize,
    /// Training resolution (points per axis).
    pub resolution: usize,
    /// Grid the inputs are drawn on and the solver runs on.
    pub fine_resolution: usize,
    pub n_time: usize,
    pub t_final: f64,
    pub ic: IcSpec,
    pub solver: SolverOptions,
    pub seed: u64,
}

/// Partial spec as written by users; missing fields take per-kind defaults.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDatasetSpec {
    kind: PdeKind,
    params: Option<PdeParams>,
    n_train: Option<usize>,
    n_test: Option<usize>,
    resolution: Option<usize>,
    fine_resolution: Option<usize>,
    n_time: Option<usize>,
    t_final: Option<f64>,
    ic: Option<IcSpec>,
    solver: Option<SolverOptions>,
    seed: Option<u64>,
}

impl TryFrom<RawDatasetSpec> for DatasetSpec {
    type Error = PicoreError;

    fn try_from(raw: RawDatasetSpec) -> Result<Self> {
        let mut spec = DatasetSpec::default_for(raw.kind);
        if let Some(p) = raw.params {
            spec.params = p;
        }
        if let Some(n) = raw.n_train {
            spec.n_train = n;
            spec.n_test = (n / 4).max(1);
        }
        if let Some(n) = raw.n_test {
            spec.n_test = n;
        }
        if let Some(r) = raw.resolution {
            spec.resolution = r;
            if raw.kind == PdeKind::Darcy {
                spec.fine_resolution = r;
            }
        }
        if let Some(r) = raw.fine_resolution {
            spec.fine_resolution = r;
        }
        if let Some(n) = raw.n_time {
            spec.n_time = n;
        }
        if let Some(t) = raw.t_final {
            spec.t_final = t;
        }
        if let Some(ic) = raw.ic {
            spec.ic = ic;
        }
        if let Some(s) = raw.solver {
            spec.solver = s;
        }
        if let Some(s) = raw.seed {
            spec.seed = s;
        }
        spec.validate()?;
        Ok(spec)
    }
}

impl DatasetSpec {
    pub fn default_for(kind: PdeKind) -> Self {
        let (n_time, t_final) = match kind {
            PdeKind::Advection | PdeKind::Burgers => (41, 2.0),
            PdeKind::NavierStokes => (21, 1.0),
            PdeKind::Darcy => (0, 0.0),
        };
        Self {
            kind,
            params: PdeParams::default_for(kind),
            n_train: 256,
            n_test: 64,
            resolution: 64,
            fine_resolution: if kind == PdeKind::Darcy { 64 } else { 256 },
            n_time,
            t_final,
            ic: IcSpec::default(),
            solver: SolverOptions::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.kind() != self.kind {
            return Err(PicoreError::Config(format!(
                "params are for {} but kind is {}",
                self.params.kind().name(),
                self.kind.name()
            )));
        }
        self.params.validate()?;
        if self.n_train == 0 {
            return Err(PicoreError::Config("n_train must be >= 1".into()));
        }
        self.grid(self.resolution)?;
        self.grid(self.fine_resolution)?;
        self.factor(self.resolution)?;
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("spec serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    /// Solution grid at `n` points per axis.
    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        let g = match self.kind {
            PdeKind::Advection | PdeKind::Burgers => GridSpec::periodic_1d(n, self.n_time, self.t_final),
            PdeKind::NavierStokes => GridSpec::periodic_2d(n, self.n_time, self.t_final),
            PdeKind::Darcy => GridSpec::dirichlet_2d(n),
        };
        g.validate()?;
        Ok(g)
    }

    /// Downsampling factor from the fine grid to `n` points.
    pub fn factor(&self, n: usize) -> Result<usize> {
        let (fine, coarse) = match self.grid(n)?.boundary {
            Boundary::Periodic => (self.fine_resolution, n),
            Boundary::Dirichlet => (self.fine_resolution - 1, n.saturating_sub(1)),
        };
        if coarse == 0 || fine < coarse || fine % coarse != 0 {
            return Err(PicoreError::NonDivisibleFactor {
                factor: fine.checked_div(coarse).unwrap_or(0),
                n_points: self.fine_resolution,
            });
        }
        Ok(fine / coarse)
    }

    fn sample_input(&self, seed: u64) -> Result<Field<f64>> {
        let grid = self.grid(self.fine_resolution)?;
        match self.kind {
            PdeKind::Advection | PdeKind::Burgers => sample_sinusoidal_ic(seed, &grid, &self.ic),
            PdeKind::Darcy => sample_darcy_coefficient(seed, &grid),
            PdeKind::NavierStokes => sample_ns_vorticity(seed, &grid),
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-sample input seed; distinct streams for the two splits.
pub fn sample_seed(base: u64, split: Split, index: usize) -> u64 {
    let stream = match split {
        Split::Train => 0u64,
        Split::Test => 1u64 << 63,
    };
    splitmix(splitmix(base) ^ stream ^ index as u64)
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    tool_version: String,
    spec_hash: String,
    spec: DatasetSpec,
    fine_grid: GridSpec,
    grid: GridSpec,
    train_seeds: Vec<u64>,
    test_seeds: Vec<u64>,
    labeled_train: Vec<usize>,
    labeled_test: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RecordMeta {
    split: Split,
    index: usize,
    seed: u64,
    grid: GridSpec,
}

/// Inputs on the fine grid plus whichever labels have been simulated so far
/// (at the training resolution).
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train_seeds: Vec<u64>,
    pub test_seeds: Vec<u64>,
    train_inputs: Vec<Field<f64>>,
    test_inputs: Vec<Field<f64>>,
    train_labels: Vec<Option<Field<f64>>>,
    test_labels: Vec<Option<Field<f64>>>,
}

impl Dataset {
    /// Draws every input; no solver is run.
    pub fn generate(spec: &DatasetSpec) -> Result<Self> {
        spec.validate()?;
        let seeds = |split, n| (0..n).map(|i| sample_seed(spec.seed, split, i)).collect::<Vec<_>>();
        let train_seeds = seeds(Split::Train, spec.n_train);
        let test_seeds = seeds(Split::Test, spec.n_test);
        let draw = |s: &[u64]| -> Result<Vec<Field<f64>>> { s.par_iter().map(|&s| spec.sample_input(s)).collect() };
        let train_inputs = draw(&train_seeds)?;
        let test_inputs = draw(&test_seeds)?;
        Ok(Self {
            spec: spec.clone(),
            train_labels: vec![None; spec.n_train],
            test_labels: vec![None; spec.n_test],
            train_seeds,
            test_seeds,
            train_inputs,
            test_inputs,
        })
    }

    pub fn len(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train_inputs.len(),
            Split::Test => self.test_inputs.len(),
        }
    }

    fn inputs(&self, split: Split) -> &[Field<f64>] {
        match split {
            Split::Train => &self.train_inputs,
            Split::Test => &self.test_inputs,
        }
    }

    fn labels(&self, split: Split) -> &[Option<Field<f64>>] {
        match split {
            Split::Train => &self.train_labels,
            Split::Test => &self.test_labels,
        }
    }

    fn labels_mut(&mut self, split: Split) -> &mut Vec<Option<Field<f64>>> {
        match split {
            Split::Train => &mut self.train_labels,
            Split::Test => &mut self.test_labels,
        }
    }

    pub fn is_labeled(&self, split: Split, index: usize) -> bool {
        self.labels(split).get(index).is_some_and(|l| l.is_some())
    }

    pub fn n_labeled(&self, split: Split) -> usize {
        self.labels(split).iter().filter(|l| l.is_some()).count()
    }

    fn check_index(&self, split: Split, index: usize) -> Result<()> {
        if index >= self.len(split) {
            return Err(PicoreError::InvalidArgument(format!(
                "{} index {index} out of range ({} samples)",
                split.name(),
                self.len(split)
            )));
        }
        Ok(())
    }

    /// The problem at `resolution` points per axis.
    pub fn instance(&self, split: Split, index: usize, resolution: usize) -> Result<PdeInstance<f64>> {
        self.check_index(split, index)?;
        let input = downsample(&self.inputs(split)[index], self.spec.factor(resolution)?)?;
        PdeInstance::new(self.spec.params.clone(), input, self.spec.grid(resolution)?)
    }

    /// Raw input at the training resolution, flattened.
    pub fn input_vector(&self, split: Split, index: usize) -> Result<Vec<f64>> {
        Ok(self.instance(split, index, self.spec.resolution)?.input.values)
    }

    /// Solves on the fine grid and keeps the label at `resolution`.
    /// Returns the label and the measured solver seconds.
    pub fn simulate(
        &self,
        split: Split,
        index: usize,
        resolution: usize,
        labeler: &dyn Labeler,
    ) -> Result<(Field<f64>, f64)> {
        let fine = self.instance(split, index, self.spec.fine_resolution)?;
        let out = labeler.label(&fine, &self.spec.solver)?;
        let label = downsample(&out.solution, self.spec.factor(resolution)?)?;
        Ok((label, out.sim_seconds))
    }

    /// Labels the given indices (in parallel), skipping ones that already
    /// have a label. Returns solver seconds per index in input order, zero
    /// for the skipped ones.
    pub fn label(&mut self, split: Split, indices: &[usize], labeler: &dyn Labeler) -> Result<Vec<f64>> {
        for &i in indices {
            self.check_index(split, i)?;
        }
        let res = self.spec.resolution;
        let todo: Vec<usize> = indices.iter().copied().filter(|&i| !self.is_labeled(split, i)).collect();
        let solved: Vec<(Field<f64>, f64)> = todo
            .par_iter()
            .map(|&i| self.simulate(split, i, res, labeler))
            .collect::<Result<_>>()?;
        let mut seconds = vec![0.0; indices.len()];
        for (&i, (label, secs)) in todo.iter().zip(solved) {
            self.labels_mut(split)[i] = Some(label);
            if let Some(pos) = indices.iter().position(|&j| j == i) {
                seconds[pos] = secs;
            }
        }
        Ok(seconds)
    }

    pub fn clear_labels(&mut self, split: Split) {
        self.labels_mut(split).iter_mut().for_each(|l| *l = None);
    }

    pub fn label_all(&mut self, split: Split, labeler: &dyn Labeler) -> Result<f64> {
        let all: Vec<usize> = (0..self.len(split)).collect();
        Ok(self.label(split, &all, labeler)?.iter().sum())
    }

    /// Samples at the training resolution with whatever labels exist.
    pub fn samples(&self, split: Split) -> Result<Vec<Sample<f64>>> {
        (0..self.len(split))
            .map(|i| {
                let inst = self.instance(split, i, self.spec.resolution)?;
                match &self.labels(split)[i] {
                    Some(l) => Sample::labeled(inst, l.clone()),
                    None => Ok(Sample::unlabeled(inst)),
                }
            })
            .collect()
    }

    /// Freshly simulated samples at another resolution (used for
    /// super-resolution evaluation). Never touches the stored labels.
    pub fn samples_at(&self, split: Split, resolution: usize, labeler: &dyn Labeler) -> Result<Vec<Sample<f64>>> {
        if resolution == self.spec.resolution {
            let mut out = self.samples(split)?;
            let missing: Vec<usize> = (0..out.len()).filter(|&i| !out[i].is_labeled()).collect();
            let fresh: Vec<Field<f64>> = missing
                .par_iter()
                .map(|&i| self.simulate(split, i, resolution, labeler).map(|r| r.0))
                .collect::<Result<_>>()?;
            for (i, l) in missing.into_iter().zip(fresh) {
                out[i].solution = Some(l);
            }
            return Ok(out);
        }
        (0..self.len(split))
            .into_par_iter()
            .map(|i| {
                let inst = self.instance(split, i, resolution)?;
                let (label, _) = self.simulate(split, i, resolution, labeler)?;
                Sample::labeled(inst, label)
            })
            .collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("inputs"))?;
        fs::create_dir_all(dir.join("solutions"))?;
        for split in [Split::Train, Split::Test] {
            let seeds = match split {
                Split::Train => &self.train_seeds,
                Split::Test => &self.test_seeds,
            };
            for (i, input) in self.inputs(split).iter().enumerate() {
                let name = format!("{}_{i:05}.picf", split.name());
                record(split, i, seeds[i], input)?.save(&dir.join("inputs").join(&name))?;
                let sol_path = dir.join("solutions").join(&name);
                match &self.labels(split)[i] {
                    Some(l) => record(split, i, seeds[i], l)?.save(&sol_path)?,
                    None if sol_path.exists() => fs::remove_file(&sol_path)?,
                    None => {}
                }
            }
        }
        let labeled = |s| (0..self.len(s)).filter(|&i| self.is_labeled(s, i)).collect();
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            spec_hash: self.spec.hash(),
            spec: self.spec.clone(),
            fine_grid: self.spec.grid(self.spec.fine_resolution)?,
            grid: self.spec.grid(self.spec.resolution)?,
            train_seeds: self.train_seeds.clone(),
            test_seeds: self.test_seeds.clone(),
            labeled_train: labeled(Split::Train),
            labeled_test: labeled(Split::Test),
        };
        fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(PicoreError::Format(format!(
                "unsupported manifest version {}",
                manifest.version
            )));
        }
        let spec = manifest.spec;
        spec.validate()?;
        let fine_grid = spec.grid(spec.fine_resolution)?.spatial_only();
        let grid = spec.grid(spec.resolution)?;
        let read_split = |split: Split, n: usize, labeled: &[usize]| -> Result<(Vec<Field<f64>>, Vec<Option<Field<f64>>>)> {
            let mut inputs = Vec::with_capacity(n);
            let mut labels = vec![None; n];
            for i in 0..n {
                let name = format!("{}_{i:05}.picf", split.name());
                inputs.push(field_from(Record::load(&dir.join("inputs").join(&name))?, &fine_grid)?);
            }
            for &i in labeled {
                if i >= n {
                    return Err(PicoreError::Format(format!("labeled index {i} out of range")));
                }
                let name = format!("{}_{i:05}.picf", split.name());
                labels[i] = Some(field_from(Record::load(&dir.join("solutions").join(&name))?, &grid)?);
            }
            Ok((inputs, labels))
        };
        let (train_inputs, train_labels) = read_split(Split::Train, manifest.train_seeds.len(), &manifest.labeled_train)?;
        let (test_inputs, test_labels) = read_split(Split::Test, manifest.test_seeds.len(), &manifest.labeled_test)?;
        Ok(Self {
            spec,
            train_seeds: manifest.train_seeds,
            test_seeds: manifest.test_seeds,
            train_inputs,
            test_inputs,
            train_labels,
            test_labels,
        })
    }
}

fn record(split: Split, index: usize, seed: u64, field: &Field<f64>) -> Result<Record> {
    let meta = RecordMeta {
        split,
        index,
        seed,
        grid: field.grid.clone(),
    };
    Record::new(field.shape(), serde_json::to_string(&meta)?, field.values.clone())
}

fn field_from(rec: Record, grid: &GridSpec) -> Result<Field<f64>> {
    let meta: RecordMeta = serde_json::from_str(&rec.meta)?;
    if &meta.grid != grid || rec.shape != grid.shape() {
        return Err(PicoreError::ShapeMismatch {
            expected: grid.shape(),
            got: rec.shape,
        });
    }
    Field::new(rec.data, meta.grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn small(kind: PdeKind) -> DatasetSpec {
        let mut s = DatasetSpec::default_for(kind);
        s.n_train = 6;
        s.n_test = 2;
        match kind {
            PdeKind::Darcy => {
                s.resolution = 9;
                s.fine_resolution = 17;
            }
            _ => {
                s.resolution = 16;
                s.fine_resolution = 32;
                s.n_time = 5;
                s.t_final = 0.2;
            }
        }
        s.solver.n_substeps = 10;
        s
    }

    struct Counting(AtomicUsize);

    impl Labeler for Counting {
        fn label(&self, instance: &PdeInstance<f64>, opts: &SolverOptions) -> Result<LabeledSample<f64>> {
            self.0.fetch_add(1, Ordering::SeqCst);
            solve(instance, opts)
        }
    }

    #[test]
    fn generation_is_deterministic_and_unlabeled() {
        let spec = small(PdeKind::Burgers);
        let a = Dataset::generate(&spec).unwrap();
        let b = Dataset::generate(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_labeled(Split::Train), 0);
        assert!(a.samples(Split::Train).unwrap().iter().all(|s| !s.is_labeled()));
        let mut other = spec.clone();
        other.seed = 1;
        assert_ne!(Dataset::generate(&other).unwrap().train_seeds, a.train_seeds);
        // train and test streams never share seeds
        assert!(a.test_seeds.iter().all(|s| !a.train_seeds.contains(s)));
    }

    #[test]
    fn labels_are_downsampled_fine_solves() {
        let spec = small(PdeKind::Advection);
        let mut ds = Dataset::generate(&spec).unwrap();
        let counter = Counting(AtomicUsize::new(0));
        let secs = ds.label(Split::Train, &[4, 1], &counter).unwrap();
        assert_eq!(secs.len(), 2);
        assert_eq!(counter.0.load(Ordering::SeqCst), 2);
        // relabeling is a no-op
        ds.label(Split::Train, &[1], &counter).unwrap();
        assert_eq!(counter.0.load(Ordering::SeqCst), 2);

        let fine = ds.instance(Split::Train, 4, 32).unwrap();
        let direct = solve(&fine, &spec.solver).unwrap().solution;
        let samples = ds.samples(Split::Train).unwrap();
        assert_eq!(samples[4].solution.as_ref().unwrap(), &downsample(&direct, 2).unwrap());
        assert_eq!(samples[4].instance.grid.n_points, 16);
        assert!(!samples[0].is_labeled());
    }

    #[test]
    fn roundtrip_on_disk() {
        for kind in [PdeKind::Advection, PdeKind::Darcy] {
            let spec = small(kind);
            let mut ds = Dataset::generate(&spec).unwrap();
            ds.label(Split::Train, &[2], &ReferenceSolver).unwrap();
            ds.label_all(Split::Test, &ReferenceSolver).unwrap();
            let dir = tempfile::tempdir().unwrap();
            ds.save(dir.path()).unwrap();
            assert!(dir.path().join("manifest.json").exists());
            assert!(!dir.path().join("solutions/train_00000.picf").exists());
            let back = Dataset::load(dir.path()).unwrap();
            assert_eq!(back, ds);
        }
    }

    #[test]
    fn super_resolution_samples() {
        let spec = small(PdeKind::Advection);
        let mut ds = Dataset::generate(&spec).unwrap();
        ds.label_all(Split::Test, &ReferenceSolver).unwrap();
        let same = ds.samples_at(Split::Test, 16, &ReferenceSolver).unwrap();
        assert_eq!(same, ds.samples(Split::Test).unwrap());
        let hi = ds.samples_at(Split::Test, 32, &ReferenceSolver).unwrap();
        assert_eq!(hi[0].solution.as_ref().unwrap().grid.n_points, 32);
        assert!(ds.samples_at(Split::Test, 64, &ReferenceSolver).is_err());
        assert!(ds.samples_at(Split::Test, 12, &ReferenceSolver).is_err());
    }

    #[test]
    fn spec_defaults_from_partial_json() {
        let s: DatasetSpec = serde_json::from_str(r#"{"kind":"navier_stokes","n_train":40}"#).unwrap();
        assert_eq!((s.n_time, s.t_final, s.n_test), (21, 1.0, 10));
        let d: DatasetSpec = serde_json::from_str(r#"{"kind":"darcy","resolution":33}"#).unwrap();
        assert_eq!(d.fine_resolution, 33);
        assert!(serde_json::from_str::<DatasetSpec>(r#"{"kind":"darcy","bogus":1}"#).is_err());
        assert!(serde_json::from_str::<DatasetSpec>(r#"{"kind":"advection","resolution":48}"#).is_err());
        let full = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<DatasetSpec>(&full).unwrap(), s);
    }
}
