//! Experiment orchestration: warm-start, scoring, selection, lazy labeling,
//! reset, training, evaluation and cost accounting for PICore and the
//! baselines.

use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coreset::{
    budget, select_adacore, select_cosine, select_craig, select_el2n, select_gradmatch,
    select_grand, select_herding, select_kmeans, CoresetSelection, FeatureMatrix, Selector,
};
use crate::dataset::{Dataset, DatasetSpec, Labeler, Sample, Split};
use crate::error::{PicoreError, Result};
use crate::operator_net::{
    evaluate_nrmse, fno_init, last_layer_hessian_diag, per_sample_features, train, FnoConfig, FnoParams, LossKind,
    TrainOptions,
};
use crate::residuals::PiWeights;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Picore,
    Supervised,
    Unsupervised,
    Full,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Picore => "picore",
            Mode::Supervised => "supervised",
            Mode::Unsupervised => "unsupervised",
            Mode::Full => "full",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = PicoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "picore" => Ok(Mode::Picore),
            "supervised" => Ok(Mode::Supervised),
            "unsupervised" => Ok(Mode::Unsupervised),
            "full" => Ok(Mode::Full),
            other => Err(PicoreError::Config(format!("unknown mode '{other}'"))),
        }
    }
}

/// Operator size; the channel counts follow from the dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    /// Retained modes per axis; 16 in 1D and 12 in 2D when absent.
    pub modes: Option<usize>,
    pub width: usize,
    pub n_layers: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            modes: None,
            width: 32,
            n_layers: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorOptions {
    /// CRAIG/AdaCore candidates per greedy step.
    pub subsample: Option<usize>,
    pub ridge: f64,
    pub hutchinson_probes: usize,
    pub adacore_eps: f64,
    pub kmeans_iters: usize,
}

impl Default for SelectorOptions {
    fn default() -> Self {
        Self {
            subsample: None,
            ridge: 1e-4,
            hutchinson_probes: 10,
            adacore_eps: 1e-6,
            kmeans_iters: 100,
        }
    }
}

/// Replaces measured costs with fixed per-unit prices so acceleration
/// numbers do not depend on the machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub sim_seconds_per_sample: f64,
    /// Price of one sample visit in one epoch (warm-start and training);
    /// measured wall time is kept when absent.
    #[serde(default)]
    pub train_seconds_per_sample_epoch: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub network: NetworkSpec,
    pub algorithm: Selector,
    pub mode: Mode,
    pub beta: f64,
    pub warmup_epochs: usize,
    pub epochs: usize,
    pub pi: PiWeights,
    pub lr: f64,
    pub lr_min: f64,
    pub batch_size: usize,
    /// One run per seed; init, shuffle and selection seeds derive from it.
    pub seeds: Vec<u64>,
    /// Loss used for warm-start and scoring; physics for picore and data
    /// for supervised when absent.
    pub scoring: Option<LossKind>,
    pub selector: SelectorOptions,
    pub cost_model: Option<CostModel>,
    /// Extra evaluation resolutions (zero-shot super-resolution).
    pub super_resolution: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default_for(crate::pde::PdeKind::Advection),
            network: NetworkSpec::default(),
            algorithm: Selector::El2n,
            mode: Mode::Picore,
            beta: 0.2,
            warmup_epochs: 25,
            epochs: 500,
            pi: PiWeights::default(),
            lr: 1e-3,
            lr_min: 1e-5,
            batch_size: 16,
            seeds: vec![0],
            scoring: None,
            selector: SelectorOptions::default(),
            cost_model: None,
            super_resolution: Vec::new(),
        }
    }
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::default_for(crate::pde::PdeKind::Advection)
    }
}

impl ExperimentConfig {
    /// Reads JSON, or TOML when the file ends in `.toml`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| PicoreError::Config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| PicoreError::Config(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| PicoreError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PicoreError::Config(m));
        self.dataset.validate()?;
        self.pi.validate()?;
        self.fno_config().validate()?;
        budget(self.beta, self.dataset.n_train)?;
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr_min >= 0.0 && self.lr_min <= self.lr) {
            return bad(format!("need 0 <= lr_min <= lr, lr > 0 (got {} / {})", self.lr_min, self.lr));
        }
        if matches!(self.mode, Mode::Picore | Mode::Supervised) && self.warmup_epochs >= self.epochs {
            return bad(format!(
                "warmup_epochs ({}) must be below epochs ({})",
                self.warmup_epochs, self.epochs
            ));
        }
        match self.mode {
            Mode::Unsupervised if !self.algorithm.is_unsupervised() => {
                bad(format!("{} is not an input-space selector", self.algorithm))
            }
            Mode::Picore | Mode::Supervised if self.algorithm.is_unsupervised() => bad(format!(
                "{} selects on raw inputs; use mode unsupervised",
                self.algorithm
            )),
            Mode::Picore if self.scoring == Some(LossKind::Data) => {
                Err(PicoreError::SelectorLabelRequired(self.algorithm.to_string()))
            }
            _ => Ok(()),
        }?;
        if let Some(c) = &self.cost_model {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(c.sim_seconds_per_sample) || !c.train_seconds_per_sample_epoch.is_none_or(ok) {
                return bad("cost model prices must be finite and >= 0".into());
            }
        }
        for &r in &self.super_resolution {
            self.dataset.factor(r)?;
        }
        Ok(())
    }

    pub fn fno_config(&self) -> FnoConfig {
        let kind = self.dataset.kind;
        let mut cfg = FnoConfig::default_for(kind, self.dataset.n_time);
        if let Some(m) = self.network.modes {
            cfg.modes = m;
        }
        cfg.width = self.network.width;
        cfg.n_layers = self.network.n_layers;
        cfg
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    fn train_options(&self, epochs: usize, loss_kind: LossKind, shuffle_seed: u64) -> TrainOptions {
        TrainOptions {
            epochs,
            loss_kind,
            lr: self.lr,
            lr_min: self.lr_min,
            batch_size: self.batch_size,
            pi: self.pi.clone(),
            shuffle_seed,
            ..TrainOptions::default()
        }
    }

    fn scoring_loss(&self) -> LossKind {
        self.scoring.unwrap_or(match self.mode {
            Mode::Supervised => LossKind::Data,
            _ => LossKind::Physics,
        })
    }
}

/// Seeds of one run, derived from the run seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub init: u64,
    pub shuffle: u64,
    pub warmup_shuffle: u64,
    pub selection: u64,
}

impl RunSeeds {
    pub fn derive(seed: u64) -> Self {
        let h = |tag: u8| {
            let d = Sha256::new().chain_update(seed.to_le_bytes()).chain_update([tag]).finalize();
            u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
        };
        Self {
            init: h(0),
            shuffle: h(1),
            warmup_shuffle: h(2),
            selection: h(3),
        }
    }
}

/// Seconds spent per stage of one run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    /// Sum of per-sample solver times for training labels.
    pub sim_seconds_total: f64,
    pub warmup_seconds: f64,
    pub scoring_seconds: f64,
    pub selection_seconds: f64,
    pub training_seconds: f64,
    pub n_labeled: usize,
}

impl CostLedger {
    pub fn total_seconds(&self) -> f64 {
        self.sim_seconds_total + self.warmup_seconds + self.scoring_seconds + self.selection_seconds + self.training_seconds
    }

    fn validate(&self) -> Result<()> {
        let parts = [
            self.sim_seconds_total,
            self.warmup_seconds,
            self.scoring_seconds,
            self.selection_seconds,
            self.training_seconds,
        ];
        if parts.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(PicoreError::InvalidArgument(format!("incomplete cost ledger {self:?}")));
        }
        Ok(())
    }

    fn mean(ledgers: &[&CostLedger]) -> CostLedger {
        let n = ledgers.len().max(1) as f64;
        let avg = |f: fn(&CostLedger) -> f64| ledgers.iter().map(|l| f(l)).sum::<f64>() / n;
        CostLedger {
            sim_seconds_total: avg(|l| l.sim_seconds_total),
            warmup_seconds: avg(|l| l.warmup_seconds),
            scoring_seconds: avg(|l| l.scoring_seconds),
            selection_seconds: avg(|l| l.selection_seconds),
            training_seconds: avg(|l| l.training_seconds),
            n_labeled: ledgers.first().map_or(0, |l| l.n_labeled),
        }
    }
}

/// Baseline simulation plus training time over the candidate's total time.
pub fn account_costs(baseline: &CostLedger, candidate: &CostLedger) -> Result<f64> {
    baseline.validate()?;
    candidate.validate()?;
    let denom = candidate.total_seconds();
    if denom <= 0.0 {
        return Err(PicoreError::ZeroDenominator);
    }
    Ok((baseline.sim_seconds_total + baseline.training_seconds) / denom)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub seeds: RunSeeds,
    pub test_nrmse: f64,
    pub ledger: CostLedger,
    pub modeled_ledger: Option<CostLedger>,
    pub selection: CoresetSelection,
    /// Samples appended at unit weight because the selector returned fewer
    /// than the budget.
    pub topped_up: usize,
    /// Solver invocations for training labels.
    pub n_simulated: usize,
    pub final_train_loss: f64,
    /// (resolution, mean test NRMSE) for each extra evaluation resolution.
    pub super_resolution: Vec<(usize, f64)>,
    /// SHA-256 of the parameter bits after initialization and right before
    /// the final training phase.
    pub init_digest: String,
    pub reset_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let stderr = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub fno: FnoConfig,
    pub test_nrmse: Summary,
    pub per_seed: Vec<SeedResult>,
    /// Mean over seeds.
    pub ledger: CostLedger,
    pub modeled_ledger: Option<CostLedger>,
    pub acceleration: Option<f64>,
    pub modeled_acceleration: Option<f64>,
    pub super_resolution: Vec<(usize, Summary)>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    tool_version: String,
    config_hash: String,
    kind: String,
    mode: String,
    algorithm: String,
    beta: f64,
    resolution: usize,
    n_train: usize,
    seed: u64,
    test_nrmse: f64,
    sim_seconds: f64,
    warmup_seconds: f64,
    scoring_seconds: f64,
    selection_seconds: f64,
    training_seconds: f64,
    n_labeled: usize,
    topped_up: usize,
    acceleration: Option<f64>,
    modeled_acceleration: Option<f64>,
}

impl ExperimentReport {
    /// Sets the acceleration against a baseline run (usually mode full).
    pub fn with_baseline(mut self, baseline: &ExperimentReport) -> Result<Self> {
        self.acceleration = Some(account_costs(&baseline.ledger, &self.ledger)?);
        self.modeled_acceleration = match (&baseline.modeled_ledger, &self.modeled_ledger) {
            (Some(b), Some(c)) => Some(account_costs(b, c)?),
            _ => None,
        };
        Ok(self)
    }

    /// Budget fraction actually trained on (1 for full runs).
    pub fn beta(&self) -> f64 {
        match self.config.mode {
            Mode::Full => 1.0,
            _ => self.config.beta,
        }
    }

    pub fn method_label(&self) -> String {
        match self.config.mode {
            Mode::Full => "full".to_string(),
            m => format!("{}-{}", m.name(), self.config.algorithm),
        }
    }

    /// Hash of everything that fixes the data and operator, so reports can
    /// be checked for comparability.
    pub fn dataset_key(&self) -> String {
        let json = serde_json::to_string(&(&self.config.dataset, &self.fno)).expect("serializes");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    pub fn csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for s in &self.per_seed {
            w.serialize(CsvRow {
                tool_version: self.tool_version.clone(),
                config_hash: self.config_hash.clone(),
                kind: self.config.dataset.kind.name().to_string(),
                mode: self.config.mode.name().to_string(),
                algorithm: self.config.algorithm.to_string(),
                beta: self.beta(),
                resolution: self.config.dataset.resolution,
                n_train: self.config.dataset.n_train,
                seed: s.seed,
                test_nrmse: s.test_nrmse,
                sim_seconds: s.ledger.sim_seconds_total,
                warmup_seconds: s.ledger.warmup_seconds,
                scoring_seconds: s.ledger.scoring_seconds,
                selection_seconds: s.ledger.selection_seconds,
                training_seconds: s.ledger.training_seconds,
                n_labeled: s.ledger.n_labeled,
                topped_up: s.topped_up,
                acceleration: self.acceleration,
                modeled_acceleration: self.modeled_acceleration,
            })?;
        }
        let bytes = w.into_inner().map_err(|e| PicoreError::Io(e.into_error()))?;
        String::from_utf8(bytes).map_err(|e| PicoreError::Format(e.to_string()))
    }

    /// Writes `report.json` and `report.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        fs::write(dir.join("report.csv"), self.csv()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

pub fn param_digest(p: &FnoParams<f64>) -> String {
    let mut h = Sha256::new();
    for v in &p.values {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn timed<R>(f: impl FnOnce() -> Result<R>) -> Result<(R, f64)> {
    let t = Instant::now();
    let r = f()?;
    Ok((r, t.elapsed().as_secs_f64()))
}

/// Everything one seed produced, including the parameters.
#[derive(Clone, Debug)]
pub struct SeedRun {
    pub result: SeedResult,
    pub init: FnoParams<f64>,
    pub trained: FnoParams<f64>,
}

/// Held-out evaluation sets, labeled once and shared by every seed.
pub struct TestSets {
    pub base: Vec<Sample<f64>>,
    pub super_resolution: Vec<(usize, Vec<Sample<f64>>)>,
}

impl TestSets {
    pub fn build(config: &ExperimentConfig, dataset: &Dataset, labeler: &dyn Labeler) -> Result<Self> {
        let res = config.dataset.resolution;
        let base = dataset.samples_at(Split::Test, res, labeler)?;
        let super_resolution = config
            .super_resolution
            .iter()
            .map(|&r| Ok((r, dataset.samples_at(Split::Test, r, labeler)?)))
            .collect::<Result<_>>()?;
        Ok(Self { base, super_resolution })
    }
}

/// Runs the configured selector on scores or raw inputs.
pub fn run_selector(
    config: &ExperimentConfig,
    features: Option<&FeatureMatrix<f64>>,
    hess_diag: Option<&[f64]>,
    inputs: Option<&[Vec<f64>]>,
    k: usize,
    seed: u64,
) -> Result<CoresetSelection> {
    let opts = &config.selector;
    let need_f = || features.ok_or_else(|| PicoreError::InvalidArgument("selector needs scores".into()));
    let need_x = || inputs.ok_or_else(|| PicoreError::InvalidArgument("selector needs inputs".into()));
    let mut sel = match config.algorithm {
        Selector::Craig => select_craig(need_f()?, k, opts.subsample, seed)?,
        Selector::AdaCore => {
            let h = hess_diag.ok_or_else(|| PicoreError::InvalidArgument("adacore needs a Hessian diagonal".into()))?;
            select_adacore(need_f()?, k, h, opts.adacore_eps, opts.subsample, seed)?
        }
        Selector::GradMatch => select_gradmatch(need_f()?, k, opts.ridge)?,
        Selector::El2n => select_el2n(&need_f()?.per_sample_loss, k)?,
        Selector::Grand => select_grand(need_f()?, k)?,
        Selector::Kmeans => select_kmeans(need_x()?, k, opts.kmeans_iters, seed)?,
        Selector::Cosine => select_cosine(need_x()?, k)?,
        Selector::Herding => select_herding(need_x()?, k)?,
    };
    sel.beta = config.beta;
    sel.seed = seed;
    Ok(sel)
}

/// Appends the highest-loss unselected samples at unit weight until the
/// selection has `k` entries (ties to the lower index).
pub fn top_up(selection: &mut CoresetSelection, scores: &[f64], k: usize) -> usize {
    let mut rest: Vec<usize> = (0..scores.len()).filter(|i| !selection.indices.contains(i)).collect();
    rest.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let need = k.saturating_sub(selection.len()).min(rest.len());
    for &i in &rest[..need] {
        selection.indices.push(i);
        selection.weights.push(1.0);
    }
    need
}

fn all_selected(config: &ExperimentConfig, n: usize, seed: u64) -> CoresetSelection {
    CoresetSelection {
        algorithm: match config.mode {
            Mode::Full => "full".into(),
            _ => config.algorithm.to_string(),
        },
        beta: if config.mode == Mode::Full { 1.0 } else { config.beta },
        seed,
        indices: (0..n).collect(),
        weights: vec![1.0; n],
    }
}

/// Outcome of steps (2)-(4), plus the up-front labels of supervised runs.
#[derive(Clone, Debug)]
pub struct SelectionStage {
    pub selection: CoresetSelection,
    pub topped_up: usize,
    pub ledger: CostLedger,
    pub n_simulated: usize,
}

/// Warm-start, scoring and selection for one seed, starting from `init`.
/// Supervised runs label every training sample in `data` first.
pub fn select_stage(
    config: &ExperimentConfig,
    data: &mut Dataset,
    init: &FnoParams<f64>,
    seeds: &RunSeeds,
    labeler: &dyn Labeler,
) -> Result<SelectionStage> {
    let n = data.len(Split::Train);
    let train_ids: Vec<usize> = (0..n).collect();
    let full_budget = config.mode == Mode::Full || config.beta >= 1.0;
    let k = if config.mode == Mode::Full { n } else { budget(config.beta, n)? };
    let mut ledger = CostLedger::default();
    let mut n_simulated = 0;

    if config.mode == Mode::Supervised {
        let secs = data.label(Split::Train, &train_ids, labeler)?;
        ledger.sim_seconds_total += secs.iter().sum::<f64>();
        n_simulated += n;
    }

    let mut topped_up = 0;
    let selection = match config.mode {
        Mode::Full => all_selected(config, n, seeds.selection),
        Mode::Picore | Mode::Supervised => {
            let loss = config.scoring_loss();
            let samples = data.samples(Split::Train)?;
            // (2) warm-start on every training input
            let warm_opts = config.train_options(config.warmup_epochs, loss, seeds.warmup_shuffle);
            let ((warm, _), secs) = timed(|| train(init, &samples, None, &warm_opts))?;
            ledger.warmup_seconds = secs;
            // (3) scores
            let ((features, hess), secs) = timed(|| {
                let f = per_sample_features(&warm, &samples, loss, &config.pi)?;
                let h = if config.algorithm == Selector::AdaCore && !full_budget {
                    Some(last_layer_hessian_diag(
                        &warm,
                        &samples,
                        loss,
                        &config.pi,
                        config.selector.hutchinson_probes,
                        seeds.selection,
                    )?)
                } else {
                    None
                };
                Ok((f, h))
            })?;
            ledger.scoring_seconds = secs;
            // (4) selection
            let (mut sel, secs) = timed(|| {
                if full_budget {
                    Ok(all_selected(config, n, seeds.selection))
                } else {
                    run_selector(config, Some(&features), hess.as_deref(), None, k, seeds.selection)
                }
            })?;
            ledger.selection_seconds = secs;
            topped_up = top_up(&mut sel, &features.per_sample_loss, k);
            sel
        }
        Mode::Unsupervised => {
            let (mut sel, secs) = timed(|| {
                if full_budget {
                    return Ok(all_selected(config, n, seeds.selection));
                }
                let inputs: Vec<Vec<f64>> = train_ids
                    .iter()
                    .map(|&i| data.input_vector(Split::Train, i))
                    .collect::<Result<_>>()?;
                run_selector(config, None, None, Some(&inputs), k, seeds.selection)
            })?;
            ledger.selection_seconds = secs;
            let zeros = vec![0.0; n];
            topped_up = top_up(&mut sel, &zeros, k);
            sel
        }
    };
    Ok(SelectionStage {
        selection,
        topped_up,
        ledger,
        n_simulated,
    })
}

/// Simulates labels for the selected samples that do not have one yet.
/// Returns (solver seconds, solver calls).
pub fn label_selection(data: &mut Dataset, selection: &CoresetSelection, labeler: &dyn Labeler) -> Result<(f64, usize)> {
    let missing = selection.indices.iter().filter(|&&i| !data.is_labeled(Split::Train, i)).count();
    let secs = data.label(Split::Train, &selection.indices, labeler)?;
    Ok((secs.iter().sum(), missing))
}

/// One seed of any mode. `base` carries the unlabeled training inputs; it is
/// cloned so labels never leak between seeds.
pub fn run_seed(
    config: &ExperimentConfig,
    base: &Dataset,
    tests: &TestSets,
    seed: u64,
    labeler: &dyn Labeler,
) -> Result<SeedRun> {
    let seeds = RunSeeds::derive(seed);
    let mut data = base.clone();
    let n = data.len(Split::Train);

    // (1) initialization
    let init = fno_init::<f64>(&config.fno_config(), seeds.init)?;
    let init_digest = param_digest(&init);
    let SelectionStage {
        selection,
        topped_up,
        mut ledger,
        mut n_simulated,
    } = select_stage(config, &mut data, &init, &seeds, labeler)?;

    // (5) lazy labeling of the selection only
    let (secs, calls) = label_selection(&mut data, &selection, labeler)?;
    ledger.sim_seconds_total += secs;
    n_simulated += calls;
    ledger.n_labeled = data.n_labeled(Split::Train);

    // (6) reset, (7) train on the weighted subset
    let start = init.clone();
    let reset_digest = param_digest(&start);
    let samples = data.samples(Split::Train)?;
    let opts = config.train_options(config.epochs, LossKind::Data, seeds.shuffle);
    let ((trained, records), secs) = timed(|| train(&start, &samples, Some(&selection), &opts))?;
    ledger.training_seconds = secs;

    // (8) evaluation
    let test_nrmse = evaluate_nrmse(&trained, &tests.base)?;
    let super_resolution = tests
        .super_resolution
        .iter()
        .map(|(r, s)| Ok((*r, evaluate_nrmse(&trained, s)?)))
        .collect::<Result<_>>()?;

    let modeled_ledger = config.cost_model.as_ref().map(|c| {
        let mut m = ledger.clone();
        m.sim_seconds_total = c.sim_seconds_per_sample * n_simulated as f64;
        if let Some(t) = c.train_seconds_per_sample_epoch {
            let warm_visits = if matches!(config.mode, Mode::Picore | Mode::Supervised) {
                n * config.warmup_epochs
            } else {
                0
            };
            m.warmup_seconds = t * warm_visits as f64;
            m.training_seconds = t * (selection.len() * config.epochs) as f64;
        }
        m
    });

    Ok(SeedRun {
        result: SeedResult {
            seed,
            seeds,
            test_nrmse,
            ledger,
            modeled_ledger,
            selection,
            topped_up,
            n_simulated,
            final_train_loss: records.last().map_or(f64::NAN, |r| r.loss),
            super_resolution,
            init_digest,
            reset_digest,
        },
        init,
        trained,
    })
}

/// Runs every seed of the configured mode on the given (unlabeled or
/// partially labeled) dataset.
pub fn run_experiment(config: &ExperimentConfig, dataset: &Dataset, labeler: &dyn Labeler) -> Result<ExperimentReport> {
    Ok(run_experiment_with_params(config, dataset, labeler)?.0)
}

/// As [`run_experiment`], also returning the trained parameters per seed.
pub fn run_experiment_with_params(
    config: &ExperimentConfig,
    dataset: &Dataset,
    labeler: &dyn Labeler,
) -> Result<(ExperimentReport, Vec<FnoParams<f64>>)> {
    config.validate()?;
    if dataset.spec != config.dataset {
        return Err(PicoreError::Config("dataset does not match the configured dataset spec".into()));
    }
    let tests = TestSets::build(config, dataset, labeler)?;
    // train-split labels from an earlier step must not reach the ledgers
    let mut base = dataset.clone();
    base.clear_labels(Split::Train);
    let mut per_seed = Vec::with_capacity(config.seeds.len());
    let mut params = Vec::with_capacity(config.seeds.len());
    for &s in &config.seeds {
        let run = run_seed(config, &base, &tests, s, labeler)?;
        per_seed.push(run.result);
        params.push(run.trained);
    }
    let nrmse: Vec<f64> = per_seed.iter().map(|r| r.test_nrmse).collect();
    let ledgers: Vec<&CostLedger> = per_seed.iter().map(|r| &r.ledger).collect();
    let modeled: Option<Vec<&CostLedger>> = per_seed.iter().map(|r| r.modeled_ledger.as_ref()).collect();
    let super_resolution = config
        .super_resolution
        .iter()
        .enumerate()
        .map(|(j, &r)| {
            let v: Vec<f64> = per_seed.iter().map(|s| s.super_resolution[j].1).collect();
            (r, Summary::of(&v))
        })
        .collect();
    let report = ExperimentReport {
        tool_version: TOOL_VERSION.to_string(),
        config_hash: config.hash(),
        config: config.clone(),
        fno: config.fno_config(),
        test_nrmse: Summary::of(&nrmse),
        ledger: CostLedger::mean(&ledgers),
        modeled_ledger: modeled.map(|m| CostLedger::mean(&m)),
        per_seed,
        acceleration: None,
        modeled_acceleration: None,
        super_resolution,
    };
    Ok((report, params))
}

fn with_mode(config: &ExperimentConfig, mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        ..config.clone()
    }
}

pub fn run_picore(config: &ExperimentConfig, dataset: &Dataset, labeler: &dyn Labeler) -> Result<ExperimentReport> {
    run_experiment(&with_mode(config, Mode::Picore), dataset, labeler)
}

pub fn run_supervised(config: &ExperimentConfig, dataset: &Dataset, labeler: &dyn Labeler) -> Result<ExperimentReport> {
    run_experiment(&with_mode(config, Mode::Supervised), dataset, labeler)
}

pub fn run_unsupervised_baseline(
    config: &ExperimentConfig,
    dataset: &Dataset,
    labeler: &dyn Labeler,
) -> Result<ExperimentReport> {
    run_experiment(&with_mode(config, Mode::Unsupervised), dataset, labeler)
}

pub fn run_full(config: &ExperimentConfig, dataset: &Dataset, labeler: &dyn Labeler) -> Result<ExperimentReport> {
    run_experiment(&with_mode(config, Mode::Full), dataset, labeler)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ReferenceSolver;
    use crate::pde::{solve, LabeledSample, PdeInstance, PdeKind, SolverOptions};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl Labeler for Counting {
        fn label(&self, instance: &PdeInstance<f64>, opts: &SolverOptions) -> Result<LabeledSample<f64>> {
            self.0.fetch_add(1, Ordering::SeqCst);
            solve(instance, opts)
        }
    }

    fn tiny(mode: Mode, algorithm: Selector, beta: f64) -> ExperimentConfig {
        let mut d = DatasetSpec::default_for(PdeKind::Advection);
        d.n_train = 12;
        d.n_test = 3;
        d.resolution = 16;
        d.fine_resolution = 32;
        d.n_time = 5;
        d.t_final = 0.5;
        ExperimentConfig {
            dataset: d,
            network: NetworkSpec {
                modes: Some(4),
                width: 6,
                n_layers: 2,
            },
            algorithm,
            mode,
            beta,
            warmup_epochs: 2,
            epochs: 4,
            batch_size: 4,
            seeds: vec![3, 4],
            ..ExperimentConfig::default()
        }
    }

    fn run(cfg: &ExperimentConfig, labeler: &dyn Labeler) -> ExperimentReport {
        let ds = Dataset::generate(&cfg.dataset).unwrap();
        run_experiment(cfg, &ds, labeler).unwrap()
    }

    #[test]
    fn lazy_labeling_counts() {
        for (mode, alg) in [(Mode::Picore, Selector::Craig), (Mode::Unsupervised, Selector::Kmeans)] {
            let cfg = ExperimentConfig {
                seeds: vec![1],
                ..tiny(mode, alg, 0.25)
            };
            let ds = Dataset::generate(&cfg.dataset).unwrap();
            let tests = TestSets::build(&cfg, &ds, &ReferenceSolver).unwrap();
            let counter = Counting(AtomicUsize::new(0));
            let r = run_seed(&cfg, &ds, &tests, 1, &counter).unwrap().result;
            assert_eq!(counter.0.load(Ordering::SeqCst), 3);
            assert_eq!(r.n_simulated, 3);
            assert_eq!(r.ledger.n_labeled, 3);
            assert_eq!(r.selection.len(), 3);
        }
    }

    #[test]
    fn supervised_labels_everything() {
        let counter = Counting(AtomicUsize::new(0));
        let cfg = tiny(Mode::Supervised, Selector::El2n, 0.25);
        let r = run(&cfg, &counter);
        // test labels once, then all of train per seed
        assert_eq!(counter.0.load(Ordering::SeqCst), 3 + 2 * 12);
        assert!(r.per_seed.iter().all(|s| s.ledger.n_labeled == 12 && s.selection.len() == 3));
    }

    #[test]
    fn beta_one_matches_full_training() {
        let ds = Dataset::generate(&tiny(Mode::Full, Selector::El2n, 1.0).dataset).unwrap();
        let full = run_experiment_with_params(&tiny(Mode::Full, Selector::El2n, 1.0), &ds, &ReferenceSolver).unwrap();
        for (mode, alg) in [
            (Mode::Picore, Selector::GradMatch),
            (Mode::Supervised, Selector::El2n),
            (Mode::Unsupervised, Selector::Kmeans),
        ] {
            let other = run_experiment_with_params(&tiny(mode, alg, 1.0), &ds, &ReferenceSolver).unwrap();
            for (a, b) in full.1.iter().zip(&other.1) {
                assert_eq!(a.values, b.values, "{mode:?}");
            }
            assert_eq!(full.0.test_nrmse, other.0.test_nrmse);
        }
    }

    #[test]
    fn reset_and_determinism() {
        let cfg = tiny(Mode::Picore, Selector::AdaCore, 0.5);
        let a = run(&cfg, &ReferenceSolver);
        let b = run(&cfg, &ReferenceSolver);
        for s in &a.per_seed {
            assert_eq!(s.init_digest, s.reset_digest);
        }
        assert_eq!(a.per_seed.len(), 2);
        assert_ne!(a.per_seed[0].init_digest, a.per_seed[1].init_digest);
        let strip = |r: &ExperimentReport| {
            r.per_seed
                .iter()
                .map(|s| (s.test_nrmse, s.selection.clone(), s.final_train_loss))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn gradmatch_top_up_fills_budget() {
        let mut sel = CoresetSelection {
            algorithm: "gradmatch".into(),
            beta: 0.5,
            seed: 0,
            indices: vec![2],
            weights: vec![3.0],
        };
        let added = top_up(&mut sel, &[0.1, 0.5, 9.0, 0.5, 0.2], 3);
        assert_eq!(added, 2);
        assert_eq!(sel.indices, vec![2, 1, 3]);
        assert_eq!(sel.weights, vec![3.0, 1.0, 1.0]);
    }

    #[test]
    fn accounting() {
        let l = CostLedger {
            sim_seconds_total: 10.0,
            warmup_seconds: 0.0,
            scoring_seconds: 0.0,
            selection_seconds: 0.0,
            training_seconds: 2.0,
            n_labeled: 10,
        };
        assert_eq!(account_costs(&l, &l).unwrap(), 1.0);
        let cand = CostLedger {
            sim_seconds_total: 2.0,
            training_seconds: 0.4,
            n_labeled: 2,
            ..l.clone()
        };
        assert!((account_costs(&l, &cand).unwrap() - 5.0).abs() < 1e-12);
        let slower = CostLedger {
            warmup_seconds: 0.1,
            ..cand.clone()
        };
        assert!(account_costs(&l, &slower).unwrap() < 5.0);
        assert!(matches!(
            account_costs(&l, &CostLedger::default()),
            Err(PicoreError::ZeroDenominator)
        ));
        let broken = CostLedger {
            training_seconds: f64::NAN,
            ..l.clone()
        };
        assert!(account_costs(&broken, &l).is_err());
    }

    #[test]
    fn config_validation() {
        let ok = tiny(Mode::Picore, Selector::El2n, 0.2);
        ok.validate().unwrap();
        let cases = [
            ExperimentConfig { beta: 0.0, ..ok.clone() },
            ExperimentConfig { warmup_epochs: 4, ..ok.clone() },
            ExperimentConfig { algorithm: Selector::Herding, ..ok.clone() },
            ExperimentConfig { mode: Mode::Unsupervised, ..ok.clone() },
            ExperimentConfig { seeds: vec![], ..ok.clone() },
            ExperimentConfig { super_resolution: vec![24], ..ok.clone() },
        ];
        for c in cases {
            assert!(matches!(c.validate(), Err(PicoreError::Config(_) | PicoreError::NonDivisibleFactor { .. })), "{c:?}");
        }
        let data_scoring = ExperimentConfig {
            scoring: Some(LossKind::Data),
            ..ok.clone()
        };
        assert!(matches!(data_scoring.validate(), Err(PicoreError::SelectorLabelRequired(_))));
    }

    #[test]
    fn config_files_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("c.json");
        fs::write(&json, r#"{"dataset":{"kind":"burgers","n_train":8},"beta":0.5,"seeds":[1,2]}"#).unwrap();
        let a = ExperimentConfig::load(&json).unwrap();
        assert_eq!(a.dataset.n_test, 2);
        let toml_path = dir.path().join("c.toml");
        fs::write(&toml_path, "beta = 0.5\nseeds = [1, 2]\n[dataset]\nkind = \"burgers\"\nn_train = 8\n").unwrap();
        let b = ExperimentConfig::load(&toml_path).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = ExperimentConfig { beta: 0.6, ..a.clone() };
        assert_ne!(a.hash(), c.hash());
        fs::write(&json, r#"{"betta":0.5}"#).unwrap();
        assert!(matches!(ExperimentConfig::load(&json), Err(PicoreError::Config(_))));
    }

    #[test]
    fn report_files() {
        let cfg = ExperimentConfig {
            cost_model: Some(CostModel {
                sim_seconds_per_sample: 2.0,
                train_seconds_per_sample_epoch: Some(0.01),
            }),
            super_resolution: vec![32],
            ..tiny(Mode::Unsupervised, Selector::Herding, 0.5)
        };
        let r = run(&cfg, &ReferenceSolver);
        let m = r.modeled_ledger.as_ref().unwrap();
        assert_eq!(m.sim_seconds_total, 12.0);
        assert!((m.training_seconds - 0.01 * 6.0 * 4.0).abs() < 1e-12);
        assert_eq!(m.warmup_seconds, 0.0);
        assert_eq!(r.ledger.scoring_seconds, 0.0);
        assert_eq!(r.super_resolution[0].0, 32);
        assert!(r.super_resolution[0].1.mean.is_finite());
        let dir = tempfile::tempdir().unwrap();
        r.save(dir.path()).unwrap();
        assert_eq!(ExperimentReport::load(&dir.path().join("report.json")).unwrap(), r);
        let csv = fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().contains(&r.config_hash));
    }

    #[test]
    fn summary_stats() {
        let s = Summary::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(Summary::of(&[4.0]).stderr, 0.0);
    }
}
