// Acceptance suite. Runs without the libtest harness so every criterion
// prints its own PASS/FAIL line; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use picore::coreset::{
    facility_location, hutchinson_diag, omp_nnls, select_craig, select_el2n, select_gradmatch, select_grand,
    similarity_matrix, SimilarityMatrix,
};
use picore::operator_net::{fno_init, loss_and_grad};
use picore::pde::{
    sample_sinusoidal_ic, solve, solve_advection, solve_burgers, solve_darcy, solve_navier_stokes, IcSpec,
    LabeledSample,
};
use picore::pipeline::{CostModel, NetworkSpec, TestSets};
use picore::residuals::{pde_residual, pi_loss};
use picore::{
    account_costs, run_experiment, CostLedger, Dataset, DatasetSpec, ExperimentConfig, ExperimentReport,
    FeatureMatrix, Field, FnoConfig, GridSpec, Labeler, LossKind, Mode, PdeInstance, PdeKind, PdeParams,
    PiWeights, ReferenceSolver, Sample, Selector, SolverOptions, Split,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- 1

fn fd_check(samples: &[Sample<f64>], cfg: &FnoConfig, rng: &mut ChaCha8Rng) -> (f64, usize) {
    let refs: Vec<&Sample<f64>> = samples.iter().collect();
    let params = fno_init::<f64>(cfg, rng.random()).unwrap();
    let weights: Vec<f64> = (0..samples.len()).map(|_| rng.random_range(0.5..2.0)).collect();
    let pi = PiWeights::default();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for kind in [LossKind::Data, LossKind::Physics] {
        let (_, grad) = loss_and_grad(&params, &refs, &weights, kind, &pi).unwrap();
        for _ in 0..20 {
            let k = rng.random_range(0..params.len());
            let h = 1e-5;
            let f = |s: f64| {
                let mut p = params.clone();
                p.values[k] += s;
                loss_and_grad(&p, &refs, &weights, kind, &pi).unwrap().0
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let opts = SolverOptions::default();
    let mut worst = 0.0f64;
    let mut n = 0;

    let grid = GridSpec::periodic_1d(16, 5, 0.5);
    let ic = IcSpec { modes: (1, 4), ..IcSpec::default() };
    let adv: Vec<Sample<f64>> = (0..3)
        .map(|s| {
            let u0 = sample_sinusoidal_ic::<f64>(s, &grid, &ic).unwrap();
            let inst = PdeInstance::new(PdeParams::Advection { speed: 0.4 }, u0, grid.clone()).unwrap();
            let sol = solve(&inst, &opts).unwrap().solution;
            Sample::labeled(inst, sol).unwrap()
        })
        .collect();
    let (w, c) = fd_check(&adv, &FnoConfig::for_task(PdeKind::Advection, 5, 4, 4, 2), &mut rng);
    worst = worst.max(w);
    n += c;

    let grid = GridSpec::dirichlet_2d(16);
    let darcy: Vec<Sample<f64>> = (0..2)
        .map(|s| {
            let a = picore::pde::sample_darcy_coefficient::<f64>(s, &grid).unwrap();
            let inst = PdeInstance::new(PdeParams::Darcy { forcing: 1.0 }, a, grid.clone()).unwrap();
            let sol = solve(&inst, &opts).unwrap().solution;
            Sample::labeled(inst, sol).unwrap()
        })
        .collect();
    let (w, c) = fd_check(&darcy, &FnoConfig::for_task(PdeKind::Darcy, 0, 4, 4, 2), &mut rng);
    worst = worst.max(w);
    n += c;

    check(worst <= 1e-4, format!("{n} coordinates, worst relative error {worst:.2e} (tol 1e-4)"))
}

// ---------------------------------------------------------------- 2

/// -Δu = 1 on the unit square with zero boundary, double sine series.
fn poisson_series(x: f64, y: f64) -> f64 {
    let mut s = 0.0;
    for m in (1..600).step_by(2) {
        for k in (1..600).step_by(2) {
            let (mf, kf) = (m as f64, k as f64);
            s += 16.0 / (PI.powi(4) * mf * kf * (mf * mf + kf * kf)) * (mf * PI * x).sin() * (kf * PI * y).sin();
        }
    }
    s
}

fn criterion_2() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // advection: discrete norm per frame. |u| leaks into the Nyquist mode,
    // which a real shift can only damp, so that post-op is off here
    let grid = GridSpec::periodic_1d(64, 41, 2.0);
    let smooth = IcSpec { p_abs: 0.0, p_window: 0.5, ..IcSpec::default() };
    let mut drift = 0.0f64;
    for seed in 0..20 {
        let u0 = sample_sinusoidal_ic::<f64>(seed, &grid, &smooth).unwrap();
        let inst = PdeInstance::new(PdeParams::Advection { speed: 0.1 + 0.1 * seed as f64 }, u0, grid.clone()).unwrap();
        let sol = solve_advection(&inst).unwrap().solution;
        let n0: f64 = sol.frame(0).iter().map(|v| v * v).sum();
        for t in 0..41 {
            let nt: f64 = sol.frame(t).iter().map(|v| v * v).sum();
            drift = drift.max((nt - n0).abs() / n0);
        }
    }
    ok &= drift <= 1e-12;
    notes.push(format!("advection norm drift {drift:.1e}"));

    // Navier–Stokes: ω = cos(2πx) decays as exp(-4π²νt)
    let nu = 1e-2;
    let grid = GridSpec::periodic_2d(32, 3, 1.0);
    let w0 = Field::<f64>::from_fn(grid.spatial_only(), |x| (2.0 * PI * x[0]).cos());
    let inst = PdeInstance::new(
        PdeParams::NavierStokes {
            viscosity: nu,
            forcing_amplitude: 0.0,
        },
        w0.clone(),
        grid,
    )
    .unwrap();
    let sol = solve_navier_stokes(&inst, 100).unwrap().solution;
    let mut ns_err = 0.0f64;
    for (t, time) in [(1, 0.5), (2, 1.0)] {
        let decay = (-4.0 * PI * PI * nu * time).exp();
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (w, w0) in sol.frame(t).iter().zip(&w0.values) {
            num += (w - decay * w0).powi(2);
            den += (decay * w0).powi(2);
        }
        ns_err = ns_err.max((num / den).sqrt());
    }
    ok &= ns_err <= 1e-4;
    notes.push(format!("shear decay rel err {ns_err:.1e}"));

    // Darcy a ≡ 1: centre between the four middle nodes
    let grid = GridSpec::dirichlet_2d(64);
    let a = Field::<f64>::from_fn(grid.clone(), |_| 1.0);
    let inst = PdeInstance::new(PdeParams::Darcy { forcing: 1.0 }, a, grid).unwrap();
    let u = solve_darcy(&inst, 1e-8, 200_000).unwrap().solution;
    let centre = [31 * 64 + 31, 31 * 64 + 32, 32 * 64 + 31, 32 * 64 + 32]
        .iter()
        .map(|&i| u.values[i])
        .sum::<f64>()
        / 4.0;
    let oracle = poisson_series(0.5, 0.5);
    let darcy_rel = (centre / oracle - 1.0).abs();
    ok &= darcy_rel <= 0.02;
    notes.push(format!("darcy centre {centre:.5} vs {oracle:.5}"));

    // Burgers: energy never grows
    let grid = GridSpec::periodic_1d(128, 21, 2.0);
    let mut growth = 0usize;
    for seed in 0..20 {
        let u0 = sample_sinusoidal_ic::<f64>(100 + seed, &grid, &IcSpec::default()).unwrap();
        let inst = PdeInstance::new(PdeParams::Burgers { viscosity: 0.01 }, u0, grid.clone()).unwrap();
        let sol = solve_burgers(&inst, 100).unwrap().solution;
        let e: Vec<f64> = (0..21).map(|t| sol.frame(t).iter().map(|v| v * v).sum()).collect();
        growth += e.windows(2).filter(|w| w[1] > w[0] * (1.0 + 1e-12)).count();
    }
    ok &= growth == 0;
    notes.push(format!("burgers energy increases {growth}/400"));

    check(ok, notes.join(", "))
}

// ---------------------------------------------------------------- 3

fn exact_advection(n: usize) -> (PdeInstance<f64>, Field<f64>) {
    // time step refined together with the grid
    let grid = GridSpec::periodic_1d(n, 4 * n + 1, 2.0);
    let u0 = Field::from_fn(grid.spatial_only(), |x| (2.0 * PI * x[0]).sin() + 0.5 * (4.0 * PI * x[0] + 1.0).cos());
    let inst = PdeInstance::new(PdeParams::Advection { speed: 1.0 }, u0, grid.clone()).unwrap();
    let (h, dt) = (grid.spacing(), grid.dt_store());
    let mut values = Vec::with_capacity(grid.len());
    for t in 0..grid.n_time {
        for j in 0..n {
            let s = j as f64 * h - t as f64 * dt;
            values.push((2.0 * PI * s).sin() + 0.5 * (4.0 * PI * s + 1.0).cos());
        }
    }
    let exact = Field::new(values, grid).unwrap();
    (inst, exact)
}

fn criterion_3() -> Outcome {
    let rel = |n: usize| {
        let (inst, u) = exact_advection(n);
        let loss = pi_loss(&inst, &u, &PiWeights::default()).unwrap();
        let norm = u.sum_sq() * u.grid.spacing() * u.grid.dt_store();
        // the loss is all residual here: the initial frame is exact
        let residual = pde_residual(&inst, &u).unwrap().l2sq;
        assert!((loss - residual).abs() <= 1e-12 * loss.max(1e-30));
        loss / norm
    };
    let (r64, r128) = (rel(64), rel(128));
    check(
        r64 <= 1e-3 && r64 / r128 >= 3.0,
        format!("loss/‖u‖² {r64:.2e} at 64, {r128:.2e} at 128, ratio {:.2}", r64 / r128),
    )
}

// ---------------------------------------------------------------- 4

fn rand_cols(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect()
}

fn features(cols: Vec<Vec<f64>>, losses: Vec<f64>) -> FeatureMatrix<f64> {
    FeatureMatrix::new(cols, losses, LossKind::Physics).unwrap()
}

/// Random orthogonal columns by Gram–Schmidt on Gaussian-ish vectors.
fn orthogonal(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    while out.len() < n {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        for q in &out {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum::<f64>() / q.iter().map(|x| x * x).sum::<f64>();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            let scale = rng.random_range(0.5..2.0) / norm;
            out.push(v.iter().map(|x| x * scale).collect());
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut notes = Vec::new();
    let mut ok = true;

    // CRAIG against brute force
    let bound = 1.0 - (-1.0f64).exp();
    let mut worst = f64::INFINITY;
    for trial in 0..50 {
        let cols = rand_cols(&mut rng, 10, 4);
        let sim = similarity_matrix(&cols);
        let mut opt = 0.0f64;
        for mask in 0u32..1 << 10 {
            if mask.count_ones() == 3 {
                let s: Vec<usize> = (0..10).filter(|&i| mask >> i & 1 == 1).collect();
                opt = opt.max(facility_location(&sim, &s));
            }
        }
        let sel = select_craig(&features(cols, vec![0.0; 10]), 3, None, trial).unwrap();
        worst = worst.min(facility_location(&sim, &sel.indices) / opt);
    }
    ok &= worst >= bound;
    notes.push(format!("craig worst f/opt {worst:.3}"));

    // GradMatch: a sparse nonnegative combination of orthogonal columns
    let mut res_worst = 0.0f64;
    let mut support_ok = true;
    for _ in 0..20 {
        let cols = orthogonal(&mut rng, 8, 12);
        let mut truth: Vec<usize> = (0..8).collect();
        for i in 0..8 {
            let j = rng.random_range(i..8);
            truth.swap(i, j);
        }
        truth.truncate(3);
        let b: Vec<f64> = (0..12)
            .map(|r| truth.iter().enumerate().map(|(c, &i)| (1.0 + c as f64) * cols[i][r]).sum())
            .collect();
        let fit = omp_nnls(&cols, &b, 3, 0.0).unwrap();
        let mut got = fit.support.clone();
        got.sort();
        truth.sort();
        support_ok &= got == truth;
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        res_worst = res_worst.max(fit.residual_norms.last().unwrap() / bn);

        // full budget reproduces the mean gradient with unit weights
        let sel = select_gradmatch(&features(cols.clone(), vec![0.0; 8]), 8, 0.0).unwrap();
        let mut r = vec![0.0; 12];
        for c in &cols {
            r.iter_mut().zip(c).for_each(|(a, v)| *a += v);
        }
        for (&i, &w) in sel.indices.iter().zip(&sel.weights) {
            r.iter_mut().zip(&cols[i]).for_each(|(a, v)| *a -= w * v);
        }
        res_worst = res_worst.max(r.iter().map(|v| v * v).sum::<f64>().sqrt() / 8.0);
    }
    ok &= support_ok && res_worst <= 1e-8;
    notes.push(format!("gradmatch residual {res_worst:.1e}, supports {}", if support_ok { "exact" } else { "WRONG" }));

    // EL2N and GraNd against plain sorts
    let mut sorts_ok = true;
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let k = rng.random_range(1..=n);
        let losses: Vec<f64> = (0..n).map(|_| rng.random_range(0..6) as f64).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| losses[b].partial_cmp(&losses[a]).unwrap().then(a.cmp(&b)));
        sorts_ok &= select_el2n(&losses, k).unwrap().indices == order[..k];

        let cols = rand_cols(&mut rng, n, 3);
        let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap().then(a.cmp(&b)));
        sorts_ok &= select_grand(&features(cols, vec![0.0; n]), k).unwrap().indices == order[..k];
    }
    ok &= sorts_ok;
    notes.push(format!("sort oracles {}", if sorts_ok { "match" } else { "DIFFER" }));

    // Hutchinson is exact on diagonal operators for any probe count
    let mut hutch_ok = true;
    for trial in 0..20 {
        let d: Vec<f64> = (0..15).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let probes = 1 + trial % 5;
        let est = hutchinson_diag(|z: &[f64]| z.iter().zip(&d).map(|(a, b)| a * b).collect(), d.len(), probes, trial as u64)
            .unwrap();
        hutch_ok &= est.iter().zip(&d).all(|(a, b)| (a - b).abs() <= 1e-14 * b.abs().max(1.0));
    }
    ok &= hutch_ok;
    notes.push(format!("hutchinson {}", if hutch_ok { "exact" } else { "INEXACT" }));

    // diminishing returns of facility location
    let mut violations = 0usize;
    for case in 0..100 {
        let n = rng.random_range(2..=8);
        let sim = if case % 2 == 0 {
            similarity_matrix(&rand_cols(&mut rng, n, 3))
        } else {
            let mut data = vec![0.0; n * n];
            for i in 0..n {
                for j in i..n {
                    let v: f64 = rng.random();
                    data[i * n + j] = v;
                    data[j * n + i] = v;
                }
            }
            SimilarityMatrix { n, data }
        };
        let f = |mask: u32| {
            let s: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
            facility_location(&sim, &s)
        };
        for t in 0u32..1 << n {
            let mut s = t;
            loop {
                for z in (0..n).filter(|&z| t >> z & 1 == 0) {
                    if f(s | 1 << z) - f(s) < f(t | 1 << z) - f(t) - 1e-12 {
                        violations += 1;
                    }
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & t;
            }
        }
    }
    ok &= violations == 0;
    notes.push(format!("submodularity violations {violations}"));

    check(ok, notes.join(", "))
}

// ---------------------------------------------------------------- 5

struct Counting(AtomicUsize);

impl Labeler for Counting {
    fn label(&self, instance: &PdeInstance<f64>, opts: &SolverOptions) -> picore::Result<LabeledSample<f64>> {
        self.0.fetch_add(1, Ordering::SeqCst);
        solve(instance, opts)
    }
}

fn small(mode: Mode, algorithm: Selector, beta: f64, n_train: usize) -> ExperimentConfig {
    let mut d = DatasetSpec::default_for(PdeKind::Advection);
    d.n_train = n_train;
    d.n_test = 4;
    d.resolution = 32;
    d.fine_resolution = 64;
    d.n_time = 9;
    d.t_final = 1.0;
    ExperimentConfig {
        dataset: d,
        network: NetworkSpec {
            modes: Some(6),
            width: 8,
            n_layers: 2,
        },
        algorithm,
        mode,
        beta,
        warmup_epochs: 3,
        epochs: 6,
        batch_size: 4,
        seeds: vec![5, 6],
        ..ExperimentConfig::default()
    }
}

fn labeled_tests(spec: &DatasetSpec) -> Dataset {
    let mut ds = Dataset::generate(spec).unwrap();
    let all: Vec<usize> = (0..ds.len(Split::Test)).collect();
    ds.label(Split::Test, &all, &ReferenceSolver).unwrap();
    ds
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // lazy labeling
    let mut lazy_ok = true;
    for (mode, alg, beta) in [
        (Mode::Picore, Selector::El2n, 0.2),
        (Mode::Picore, Selector::Craig, 0.3),
        (Mode::Picore, Selector::GradMatch, 0.35),
        (Mode::Picore, Selector::AdaCore, 0.1),
        (Mode::Picore, Selector::Grand, 0.5),
        (Mode::Unsupervised, Selector::Kmeans, 0.25),
        (Mode::Unsupervised, Selector::Herding, 0.15),
    ] {
        let cfg = ExperimentConfig {
            seeds: vec![2],
            ..small(mode, alg, beta, 30)
        };
        let ds = labeled_tests(&cfg.dataset);
        let counter = Counting(AtomicUsize::new(0));
        let r = run_experiment(&cfg, &ds, &counter).unwrap();
        let calls = counter.0.load(Ordering::SeqCst);
        let want = (beta * 30.0f64).ceil() as usize;
        lazy_ok &= calls == want && r.per_seed[0].ledger.n_labeled == want;
        if calls != want {
            notes.push(format!("{mode:?}-{alg}: {calls} calls, want {want}"));
        }
    }
    ok &= lazy_ok;
    notes.push(format!("lazy labeling {}", if lazy_ok { "exact" } else { "WRONG" }));

    // β = 1 equals full training bit for bit
    let full_cfg = small(Mode::Full, Selector::El2n, 1.0, 12);
    let ds = labeled_tests(&full_cfg.dataset);
    let (full, full_params) = picore::pipeline::run_experiment_with_params(&full_cfg, &ds, &ReferenceSolver).unwrap();
    let mut same = true;
    for alg in [Selector::El2n, Selector::GradMatch, Selector::Craig] {
        let (r, p) =
            picore::pipeline::run_experiment_with_params(&small(Mode::Picore, alg, 1.0, 12), &ds, &ReferenceSolver)
                .unwrap();
        same &= p.iter().zip(&full_params).all(|(a, b)| a.values == b.values);
        same &= r.test_nrmse == full.test_nrmse;
    }
    ok &= same;
    notes.push(format!("beta=1 {}", if same { "bit-identical" } else { "DIFFERS" }));

    // reset fidelity and repeatability
    let cfg = small(Mode::Picore, Selector::AdaCore, 0.5, 12);
    let a = run_experiment(&cfg, &ds, &ReferenceSolver).unwrap();
    let b = run_experiment(&cfg, &ds, &ReferenceSolver).unwrap();
    let reset = a.per_seed.iter().all(|s| s.init_digest == s.reset_digest);
    let strip = |r: &ExperimentReport| {
        r.per_seed
            .iter()
            .map(|s| (s.test_nrmse.to_bits(), s.selection.clone(), s.final_train_loss.to_bits(), s.init_digest.clone()))
            .collect::<Vec<_>>()
    };
    let repeat = strip(&a) == strip(&b);
    ok &= reset && repeat;
    notes.push(format!(
        "reset {}, repeat runs {}",
        if reset { "bit-exact" } else { "DIFFERS" },
        if repeat { "identical" } else { "DIFFER" }
    ));

    check(ok, notes.join(", "))
}

// ---------------------------------------------------------------- 6, 8

fn desk_config(mode: Mode, beta: f64) -> ExperimentConfig {
    let mut d = DatasetSpec::default_for(PdeKind::Advection);
    d.n_train = 256;
    d.n_test = 64;
    d.resolution = 64;
    ExperimentConfig {
        dataset: d,
        network: NetworkSpec {
            modes: Some(16),
            width: 32,
            n_layers: 4,
        },
        algorithm: Selector::El2n,
        mode,
        beta,
        epochs: 150,
        seeds: vec![0, 1, 2],
        ..ExperimentConfig::default()
    }
}

fn per_seed(r: &ExperimentReport) -> String {
    r.per_seed.iter().map(|s| format!("{:.3e}", s.test_nrmse)).collect::<Vec<_>>().join("/")
}

fn criterion_6() -> Outcome {
    let ds = labeled_tests(&desk_config(Mode::Full, 1.0).dataset);
    let run = |mode, beta| run_experiment(&desk_config(mode, beta), &ds, &ReferenceSolver).unwrap();
    let full = run(Mode::Full, 1.0);
    let p2 = run(Mode::Picore, 0.2);
    let p8 = run(Mode::Picore, 0.8);
    let s2 = run(Mode::Supervised, 0.2);
    let (f, a, b, s) = (full.test_nrmse.mean, p2.test_nrmse.mean, p8.test_nrmse.mean, s2.test_nrmse.mean);
    for (name, r) in [("full", &full), ("picore 0.2", &p2), ("picore 0.8", &p8), ("supervised 0.2", &s2)] {
        println!("    {name:<15} NRMSE {:.3e} ± {:.1e}  seeds {}", r.test_nrmse.mean, r.test_nrmse.stderr, per_seed(r));
    }
    let ratio = a / f;
    let gap = (a - s).abs() / s;
    let ok_a = ratio <= 2.5;
    let ok_b = b <= a;
    let ok_c = gap <= 0.25;
    let mark = |x: bool| if x { "ok" } else { "FAIL" };
    check(
        ok_a && ok_b && ok_c,
        format!(
            "(a) picore0.2/full {ratio:.2} ≤ 2.5 {}; (b) {b:.2e} ≤ {a:.2e} {}; (c) |picore-sup|/sup {gap:.2} ≤ 0.25 {}",
            mark(ok_a),
            mark(ok_b),
            mark(ok_c)
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig {
        super_resolution: vec![128],
        ..desk_config(Mode::Picore, 0.4)
    };
    let ds = labeled_tests(&cfg.dataset);
    // reference solutions at 128 for the same test inputs
    let tests = TestSets::build(&cfg, &ds, &ReferenceSolver).unwrap();
    assert_eq!(tests.super_resolution[0].1[0].instance.grid.n_points, 128);
    let r = run_experiment(&cfg, &ds, &ReferenceSolver).unwrap();
    let mut ok = true;
    let mut worst = 0.0f64;
    for s in &r.per_seed {
        let (res, hi) = s.super_resolution[0];
        ok &= res == 128 && hi.is_finite() && hi <= 10.0 * s.test_nrmse;
        worst = worst.max(hi / s.test_nrmse);
    }
    let hi = r.super_resolution[0].1.mean;
    check(
        ok,
        format!(
            "NRMSE {:.3e} at 64, {hi:.3e} at 128, worst per-seed ratio {worst:.2} (≤ 10)",
            r.test_nrmse.mean
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;

    // simulation priced far above anything measured
    let priced = |mode, cost: CostModel| ExperimentConfig {
        cost_model: Some(cost),
        seeds: vec![1],
        ..small(mode, Selector::El2n, 0.2, 50)
    };
    let sim_heavy = CostModel {
        sim_seconds_per_sample: 1e4,
        train_seconds_per_sample_epoch: None,
    };
    let ds = labeled_tests(&priced(Mode::Full, sim_heavy.clone()).dataset);
    let full = run_experiment(&priced(Mode::Full, sim_heavy.clone()), &ds, &ReferenceSolver).unwrap();
    let cand = run_experiment(&priced(Mode::Picore, sim_heavy), &ds, &ReferenceSolver)
        .unwrap()
        .with_baseline(&full)
        .unwrap();
    let acc = cand.modeled_acceleration.unwrap();
    ok &= (acc - 5.0).abs() <= 0.1;
    notes.push(format!("sim-dominated acceleration {acc:.4}"));

    // training priced, simulation free: 1 / (β + overhead)
    let train_heavy = CostModel {
        sim_seconds_per_sample: 0.0,
        train_seconds_per_sample_epoch: Some(0.5),
    };
    let full = run_experiment(&priced(Mode::Full, train_heavy.clone()), &ds, &ReferenceSolver).unwrap();
    let cand = run_experiment(&priced(Mode::Picore, train_heavy), &ds, &ReferenceSolver)
        .unwrap()
        .with_baseline(&full)
        .unwrap();
    let m = cand.modeled_ledger.as_ref().unwrap();
    let (n, t, tw) = (50.0, cand.config.epochs as f64, cand.config.warmup_epochs as f64);
    let base = 0.5 * n * t;
    let overhead = tw / t + (m.scoring_seconds + m.selection_seconds) / base;
    let want = 1.0 / (0.2 + overhead);
    let acc = cand.modeled_acceleration.unwrap();
    let shape_ok = (acc / want - 1.0).abs() <= 1e-12;
    notes.push(format!("train-dominated {acc:.4} vs 1/(β+overhead) {want:.4}"));

    // the same shape from hand-built ledgers, and the 1/β limit
    let mut worst = 0.0f64;
    for beta in [0.1, 0.2, 0.4, 0.6, 0.8] {
        for o in [0.0, 0.01, 0.05, 0.3] {
            let baseline = CostLedger {
                training_seconds: 1000.0,
                ..CostLedger::default()
            };
            let c = CostLedger {
                warmup_seconds: 1000.0 * o * 0.75,
                selection_seconds: 1000.0 * o * 0.25,
                training_seconds: 1000.0 * beta,
                ..CostLedger::default()
            };
            let got = account_costs(&baseline, &c).unwrap();
            worst = worst.max((got * (beta + o) - 1.0).abs());
        }
    }
    ok &= shape_ok && worst <= 1e-12;
    notes.push(format!("ledger arithmetic max err {worst:.1e}"));

    check(ok, notes.join(", "))
}

// ----------------------------------------------------------------

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient correctness", criterion_1),
        ("solver oracles", criterion_2),
        ("residual consistency", criterion_3),
        ("selector oracles", criterion_4),
        ("pipeline contracts", criterion_5),
        ("acceleration accounting", criterion_7),
        ("zero-shot super-resolution", criterion_8),
        ("desk-scale trend", criterion_6),
    ];
    let numbers = [1, 2, 3, 4, 5, 7, 8, 6];
    let only: Option<usize> = std::env::var("PICORE_CRITERION").ok().and_then(|s| s.parse().ok());
    let mut failed = 0;
    for ((name, f), num) in criteria.into_iter().zip(numbers) {
        if only.is_some_and(|o| o != num) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {num} ({name}): PASS [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {num} ({name}): FAIL [{secs:.1}s] {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
