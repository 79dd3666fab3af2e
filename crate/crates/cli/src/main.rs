//! `picore` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O and other runtime failures, 2 configuration
//! errors (including bad flags), 3 numerical failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use picore::operator_net::{evaluate_nrmse, fno_init, train, TrainRecord};
use picore::pipeline::{
    label_selection, run_experiment_with_params, select_stage, RunSeeds, TestSets, TOOL_VERSION,
};
use picore::report::{evaluate_at_resolution, render_report};
use picore::{
    CoresetSelection, CostLedger, Dataset, DatasetSpec, ExperimentConfig, ExperimentReport, FnoParams, LossKind, Mode,
    PdeKind, PicoreError, ReferenceSolver, Result, Selector, Split,
};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "picore", version, about = "Physics-informed coreset selection for neural operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw inputs and simulate the test split; training labels stay absent.
    Generate(Common),
    /// Warm-start, score and select a coreset; writes selection.json.
    Select(Common),
    /// Train on a selection (or everything) and write a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        /// Selection written by `select`; trains on all samples when absent.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Full experiment for every seed; writes report.json and report.csv.
    Run(Common),
    /// Test NRMSE of a checkpoint, optionally at another resolution.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Render report.json files into table.csv and table.md.
    Report {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// JSON or TOML experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory written by `generate`, or a PDE kind.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    algorithm: Option<Selector>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    mode: Option<Mode>,
    /// Run seeds, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training resolution (generate/select/train/run) or evaluation
    /// resolution (evaluate).
    #[arg(long)]
    resolution: Option<usize>,
    /// Extra evaluation resolutions.
    #[arg(long = "super-res", value_delimiter = ',')]
    super_res: Vec<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long = "warmup-epochs")]
    warmup_epochs: Option<usize>,
    #[arg(long = "n-train")]
    n_train: Option<usize>,
}

/// Resolved inputs of a command.
struct Setup {
    config: ExperimentConfig,
    dataset: Dataset,
}

fn is_dataset_dir(s: &str) -> bool {
    Path::new(s).join("manifest.json").is_file()
}

impl Common {
    fn config(&self, resolution_is_training: bool) -> Result<(ExperimentConfig, Option<Dataset>)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let mut loaded = None;
        if let Some(d) = &self.dataset {
            if is_dataset_dir(d) {
                let ds = Dataset::load(Path::new(d))?;
                cfg.dataset = ds.spec.clone();
                loaded = Some(ds);
            } else {
                let kind: PdeKind = d.parse()?;
                if kind != cfg.dataset.kind {
                    let old = &cfg.dataset;
                    let mut spec = DatasetSpec::default_for(kind);
                    spec.n_train = old.n_train;
                    spec.n_test = old.n_test;
                    spec.seed = old.seed;
                    cfg.dataset = spec;
                }
            }
        }
        if let Some(r) = self.resolution.filter(|_| resolution_is_training) {
            if loaded.is_some() && r != cfg.dataset.resolution {
                return Err(PicoreError::Config(format!(
                    "dataset was generated at resolution {}, not {r}",
                    cfg.dataset.resolution
                )));
            }
            cfg.dataset.resolution = r;
            if cfg.dataset.kind == PdeKind::Darcy {
                cfg.dataset.fine_resolution = r;
            }
        }
        if let Some(n) = self.n_train {
            if loaded.is_some() {
                return Err(PicoreError::Config("--n-train cannot change a stored dataset".into()));
            }
            cfg.dataset.n_train = n;
            cfg.dataset.n_test = (n / 4).max(1);
        }
        if let Some(a) = self.algorithm {
            cfg.algorithm = a;
        }
        if let Some(b) = self.beta {
            cfg.beta = b;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if !self.seed.is_empty() {
            cfg.seeds = self.seed.clone();
        }
        if !self.super_res.is_empty() && resolution_is_training {
            cfg.super_resolution = self.super_res.clone();
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(e) = self.warmup_epochs {
            cfg.warmup_epochs = e;
        }
        cfg.validate()?;
        Ok((cfg, loaded))
    }

    fn setup(&self) -> Result<Setup> {
        let (config, loaded) = self.config(true)?;
        let dataset = match loaded {
            Some(d) => d,
            None => Dataset::generate(&config.dataset)?,
        };
        Ok(Setup { config, dataset })
    }

    fn out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| PicoreError::Config("--out <dir> is required".into()))
    }

    fn single_seed(&self, cfg: &ExperimentConfig) -> Result<u64> {
        match cfg.seeds.as_slice() {
            [s] => Ok(*s),
            _ => Err(PicoreError::Config("this command takes exactly one seed".into())),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SelectionArtifact {
    tool_version: String,
    config_hash: String,
    config: ExperimentConfig,
    seed: u64,
    topped_up: usize,
    ledger: CostLedger,
    selection: CoresetSelection,
}

#[derive(Serialize)]
struct TrainArtifact<'a> {
    tool_version: &'a str,
    config_hash: String,
    config: &'a ExperimentConfig,
    seed: u64,
    selection: &'a CoresetSelection,
    test_nrmse: f64,
    sim_seconds: f64,
    n_simulated: usize,
    records: &'a [TrainRecord],
}

#[derive(Serialize)]
struct EvalArtifact {
    tool_version: &'static str,
    dataset_hash: String,
    checkpoint: String,
    resolution: usize,
    test_nrmse: f64,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn generate(c: &Common) -> Result<()> {
    let out = c.out()?;
    let (cfg, _) = c.config(true)?;
    let mut ds = Dataset::generate(&cfg.dataset)?;
    ds.label_all(Split::Test, &ReferenceSolver)?;
    ds.save(out)?;
    println!(
        "dataset {} ({} train, {} test) written to {}",
        cfg.dataset.hash(),
        ds.len(Split::Train),
        ds.len(Split::Test),
        out.display()
    );
    Ok(())
}

fn select(c: &Common) -> Result<()> {
    let out = c.out()?;
    let Setup { config, mut dataset } = c.setup()?;
    let seed = c.single_seed(&config)?;
    let seeds = RunSeeds::derive(seed);
    dataset.clear_labels(Split::Train);
    let init = fno_init::<f64>(&config.fno_config(), seeds.init)?;
    let stage = select_stage(&config, &mut dataset, &init, &seeds, &ReferenceSolver)?;
    let art = SelectionArtifact {
        tool_version: TOOL_VERSION.into(),
        config_hash: config.hash(),
        config: config.clone(),
        seed,
        topped_up: stage.topped_up,
        ledger: stage.ledger,
        selection: stage.selection,
    };
    write_json(&out.join("selection.json"), &art)?;
    println!(
        "{} selected {} of {} samples -> {}",
        config.algorithm,
        art.selection.len(),
        dataset.len(Split::Train),
        out.join("selection.json").display()
    );
    Ok(())
}

fn train_cmd(c: &Common, selection: Option<&Path>) -> Result<()> {
    let out = c.out()?;
    let Setup {
        mut config,
        mut dataset,
    } = c.setup()?;
    let selection = match selection {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let art: SelectionArtifact = serde_json::from_str(&text)?;
            if art.config.dataset != config.dataset {
                return Err(PicoreError::Config("selection was made on a different dataset".into()));
            }
            if c.seed.is_empty() {
                config.seeds = vec![art.seed];
            }
            art.selection
        }
        None => {
            config.mode = Mode::Full;
            let n = dataset.len(Split::Train);
            CoresetSelection {
                algorithm: "full".into(),
                beta: 1.0,
                seed: 0,
                indices: (0..n).collect(),
                weights: vec![1.0; n],
            }
        }
    };
    let seed = c.single_seed(&config)?;
    let seeds = RunSeeds::derive(seed);
    let (sim_seconds, n_simulated) = label_selection(&mut dataset, &selection, &ReferenceSolver)?;
    let init = fno_init::<f64>(&config.fno_config(), seeds.init)?;
    let samples = dataset.samples(Split::Train)?;
    let opts = picore::operator_net::TrainOptions {
        epochs: config.epochs,
        loss_kind: LossKind::Data,
        lr: config.lr,
        lr_min: config.lr_min,
        batch_size: config.batch_size,
        pi: config.pi,
        shuffle_seed: seeds.shuffle,
        ..Default::default()
    };
    let (params, records) = train(&init, &samples, Some(&selection), &opts)?;
    fs::create_dir_all(out)?;
    params.save(&out.join("model.picf"))?;
    // stored test labels are reused; missing ones are simulated
    let tests = TestSets::build(&config, &dataset, &ReferenceSolver)?;
    let test_nrmse = evaluate_nrmse(&params, &tests.base)?;
    write_json(
        &out.join("train.json"),
        &TrainArtifact {
            tool_version: TOOL_VERSION,
            config_hash: config.hash(),
            config: &config,
            seed,
            selection: &selection,
            test_nrmse,
            sim_seconds,
            n_simulated,
            records: &records,
        },
    )?;
    println!(
        "trained on {} samples for {} epochs; test NRMSE {:.4e}; checkpoint {}",
        selection.len(),
        config.epochs,
        test_nrmse,
        out.join("model.picf").display()
    );
    Ok(())
}

fn run(c: &Common) -> Result<()> {
    let out = c.out()?;
    let Setup { config, dataset } = c.setup()?;
    let (report, params) = run_experiment_with_params(&config, &dataset, &ReferenceSolver)?;
    report.save(out)?;
    for (s, p) in config.seeds.iter().zip(&params) {
        p.save(&out.join(format!("model_seed{s}.picf")))?;
    }
    println!(
        "{} beta={} test NRMSE {:.4e} ± {:.1e} over {} seed(s); report in {}",
        report.method_label(),
        report.beta(),
        report.test_nrmse.mean,
        report.test_nrmse.stderr,
        report.per_seed.len(),
        out.display()
    );
    Ok(())
}

fn evaluate(c: &Common, checkpoint: &Path) -> Result<()> {
    let params = FnoParams::<f64>::load(checkpoint)?;
    let (cfg, loaded) = c.config(false)?;
    let dataset = match loaded {
        Some(d) => d,
        None => Dataset::generate(&cfg.dataset)?,
    };
    let mut resolutions: Vec<usize> = c.resolution.into_iter().chain(c.super_res.iter().copied()).collect();
    if resolutions.is_empty() {
        resolutions.push(cfg.dataset.resolution);
    }
    for r in resolutions {
        let nrmse = evaluate_at_resolution(&params, &dataset, r, &ReferenceSolver)?;
        let art = EvalArtifact {
            tool_version: TOOL_VERSION,
            dataset_hash: cfg.dataset.hash(),
            checkpoint: checkpoint.display().to_string(),
            resolution: r,
            test_nrmse: nrmse,
        };
        if let Some(out) = &c.out {
            write_json(&out.join(format!("eval_{r}.json")), &art)?;
        }
        println!("{}", serde_json::to_string(&art)?);
    }
    Ok(())
}

fn report(out: Option<&Path>, paths: &[PathBuf]) -> Result<()> {
    let reports = paths
        .iter()
        .map(|p| {
            let p = if p.is_dir() { p.join("report.json") } else { p.clone() };
            ExperimentReport::load(&p)
        })
        .collect::<Result<Vec<_>>>()?;
    let rendered = render_report(&reports)?;
    if let Some(out) = out {
        fs::create_dir_all(out)?;
        fs::write(out.join("table.csv"), &rendered.csv)?;
        fs::write(out.join("table.md"), &rendered.markdown)?;
    }
    print!("{}", rendered.markdown);
    Ok(())
}

fn set_workers() -> Result<()> {
    let Ok(v) = std::env::var("PICORE_NUM_WORKERS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| PicoreError::Config(format!("PICORE_NUM_WORKERS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| PicoreError::Config(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<()> {
    set_workers()?;
    match &cli.command {
        Command::Generate(c) => generate(c),
        Command::Select(c) => select(c),
        Command::Train { common, selection } => train_cmd(common, selection.as_deref()),
        Command::Run(c) => run(c),
        Command::Evaluate { common, checkpoint } => evaluate(common, checkpoint),
        Command::Report { out, reports } => report(out.as_deref(), reports),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
