//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

use mtfs::convex::{
    group_objective, group_solver, lasso, lasso_lambda_max, project_l1_ball, prox_row_linf,
    ConvexConfig, RowNorm,
};
use mtfs::data::{synth_classification, synth_regression, SplitCounts, SynthSpec};
use mtfs::eval::{auc_pairwise, roc_curve};
use mtfs::gabor::{build_filter_bank, extract, AlignedFace, FilterBank, GaborParams};
use mtfs::greedy::{omp, somp_weighted, GreedyConfig};
use mtfs::linalg::center_columns;
use mtfs::{build_indicator, DataMatrix};
use mtfs_cli::train::{evaluate, train, Method, Refit, TrainConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian(rng: &mut Pcg64, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

// 1 ------------------------------------------------------------------------

fn lfw_statement() -> Outcome {
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(&readme).unwrap_or_default();
    let stated = text.contains("0.8525") && text.contains("0.9586") && text.contains("not reproduction targets");
    outcome(
        stated,
        "README states that the LFW table values are not reproduction targets; criteria 2-11 stand in",
    )
}

// 2 ------------------------------------------------------------------------

fn somp_recovery() -> Outcome {
    let start = Instant::now();
    let trials = 50;
    let mut exact = 0;
    for t in 0..trials {
        let spec = SynthSpec {
            n_samples: 200,
            n_features: 500,
            n_tasks: 10,
            support_size: 8,
            snr: 100.0,
            share_fraction: 1.0,
            seed: 2000 + t,
        };
        let data = synth_regression(&spec).expect("valid spec");
        let fit = somp_weighted(&data.x, data.targets.view(), &[1.0; 10], &GreedyConfig::new(8)).expect("fit");
        if fit.support.sorted() == data.support.sorted() {
            exact += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        exact * 100 >= 95 * trials && elapsed < Duration::from_secs(30),
        format!("{exact}/{trials} exact recoveries in {:.2} s", elapsed.as_secs_f64()),
    )
}

// 3 and 4 -------------------------------------------------------------------

/// Benchmark shared by the multi-task and refit criteria.
fn benchmark_spec(seed: u64) -> (SynthSpec, SplitCounts) {
    (
        SynthSpec {
            n_samples: 0,
            n_features: 200,
            n_tasks: 10,
            support_size: 8,
            snr: 1.0,
            share_fraction: 1.0,
            seed,
        },
        SplitCounts {
            per_class: 5,
            background: 100,
            test_per_class: 10,
        },
    )
}

const BENCH_BUDGET: usize = 8;
const RIDGE_ALPHA: f64 = 1.0;

struct BenchTrial {
    stl: f64,
    mtl: f64,
    mtl_ridge: f64,
}

fn bench_trials() -> Vec<BenchTrial> {
    (0..50)
        .map(|t| {
            let (spec, counts) = benchmark_spec(3000 + t);
            let split = synth_classification(&spec, &counts).expect("valid benchmark");
            let auc = |method, refit| {
                let mut cfg = TrainConfig::new(method, BENCH_BUDGET);
                cfg.refit = refit;
                let model = train(&split.train_x, &split.train_y, &cfg).expect("train");
                evaluate(&model, &split.test_x, &split.test_labels, 0.001).expect("evaluate").auc_mean
            };
            BenchTrial {
                stl: auc(Method::StlOmp, Refit::None),
                mtl: auc(Method::MtlSomp, Refit::None),
                mtl_ridge: auc(Method::MtlSomp, Refit::Ridge(RIDGE_ALPHA)),
            }
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn multitask_beats_single(trials: &[BenchTrial]) -> Outcome {
    let wins = trials.iter().filter(|t| t.mtl >= t.stl).count();
    outcome(
        wins >= 45,
        format!(
            "mtl-somp >= stl-omp in {wins}/{} trials (mean AUC {:.4} vs {:.4})",
            trials.len(),
            mean(trials.iter().map(|t| t.mtl)),
            mean(trials.iter().map(|t| t.stl)),
        ),
    )
}

fn refit_helps_or_ties(trials: &[BenchTrial]) -> Outcome {
    let ok = trials.iter().filter(|t| t.mtl_ridge >= t.mtl - 0.01).count();
    outcome(
        ok >= 45,
        format!(
            "MTL+R >= MTL - 0.01 in {ok}/{} trials (mean AUC {:.6} vs {:.6})",
            trials.len(),
            mean(trials.iter().map(|t| t.mtl_ridge)),
            mean(trials.iter().map(|t| t.mtl)),
        ),
    )
}

// 5 ------------------------------------------------------------------------

fn lasso_certificate() -> Outcome {
    let start = Instant::now();
    let mut rng = Pcg64::seed_from_u64(5);
    let mut failures = 0;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(5..=50);
        let d = rng.random_range(1..=100);
        let x = DataMatrix::new(gaussian(&mut rng, n, d)).expect("finite");
        let y: Array1<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let lmax = lasso_lambda_max(&x, y.view()).expect("dims");
        let lambda = lmax * rng.random_range(0.01..0.9);
        let fit = lasso(&x, y.view(), &ConvexConfig::new(lambda)).expect("solve");
        let c = fit.coefficients.task(0);
        let b = fit.coefficients.biases()[0];
        let r = &y - &x.view().dot(&c) - b;
        let mut ok = true;
        for j in 0..d {
            let g = 2.0 * x.column(j).dot(&r);
            let v = if c[j] != 0.0 {
                (g - lambda * c[j].signum()).abs() / lambda
            } else {
                (g.abs() - lambda).max(0.0) / lambda
            };
            worst = worst.max(v);
            ok &= if c[j] != 0.0 { v <= 1e-6 } else { g.abs() <= lambda * (1.0 + 1e-6) };
        }
        if !ok {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && elapsed < Duration::from_secs(10),
        format!(
            "{failures}/200 certificate failures, worst relative violation {worst:.2e}, {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

// 6 ------------------------------------------------------------------------

/// Minimizes `1/2 ||u - v||^2 + t ||u||_inf` numerically. For a fixed bound
/// `m = ||u||_inf` the best `u` clips `v` to `[-m, m]`, leaving a convex
/// function of `m` that golden-section search minimizes.
fn prox_linf_numeric(v: &Array1<f64>, t: f64) -> Array1<f64> {
    let f = |m: f64| {
        0.5 * v.iter().map(|x| (x.abs() - m).max(0.0).powi(2)).sum::<f64>() + t * m
    };
    let (mut a, mut b) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = b - g * (b - a);
        let m2 = a + g * (b - a);
        if f(m1) <= f(m2) {
            b = m2;
        } else {
            a = m1;
        }
    }
    let m = 0.5 * (a + b);
    v.mapv(|x| x.clamp(-m, m))
}

fn prox_oracles() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut moreau_exact = true;
    let mut ball_ok = true;
    for _ in 0..100 {
        let v: Array1<f64> = (0..5).map(|_| rng.random_range(-10.0..10.0)).collect();
        let t = rng.random_range(0.0..20.0);
        let p = prox_row_linf(v.view(), t);
        let q = prox_linf_numeric(&v, t);
        worst = worst.max((&p - &q).iter().fold(0.0f64, |m, x| m.max(x.abs())));
        let proj = project_l1_ball(v.view(), t);
        moreau_exact &= &p + &proj == v;
        ball_ok &= proj.iter().map(|x| x.abs()).sum::<f64>() <= t + 1e-12;
    }
    outcome(
        worst <= 1e-6 && moreau_exact && ball_ok,
        format!("max deviation from numerical prox {worst:.2e}; Moreau exact: {moreau_exact}; projections in ball: {ball_ok}"),
    )
}

// 7 ------------------------------------------------------------------------

fn group_solver_reference() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut monotone = true;
    for i in 0..20 {
        let n = rng.random_range(12..=30);
        let d = rng.random_range(2..=10);
        let l = rng.random_range(1..=4);
        let x = DataMatrix::new(gaussian(&mut rng, n, d)).expect("finite");
        let labels: Vec<Option<usize>> = (0..n).map(|s| if s < 2 * l { Some(s % l) } else { rng.random_range(0..=l).checked_sub(1) }).collect();
        let y = build_indicator(&labels, l).expect("every class present");
        let q = if i % 2 == 0 { RowNorm::Linf } else { RowNorm::L2 };
        let lmax = mtfs::convex::group_lambda_max(&x, &y, q).expect("dims");
        let base = ConvexConfig { q, max_iters: 2_000, ..ConvexConfig::new(lmax * rng.random_range(0.05..0.8)) };
        let reference = ConvexConfig { max_iters: 20_000, rel_tol: 1e-16, ..base.clone() };
        let fit = group_solver(&x, &y, &base).expect("solve");
        let long = group_solver(&x, &y, &reference).expect("solve");
        let a = group_objective(&x, &y, &fit.coefficients, base.lambda, q).expect("objective");
        let b = group_objective(&x, &y, &long.coefficients, base.lambda, q).expect("objective");
        worst = worst.max((a - b).abs());
        for tr in [&fit.objective_trace, &long.objective_trace] {
            monotone &= tr.windows(2).all(|w| w[1] <= w[0]);
        }
    }
    outcome(
        worst <= 1e-6 && monotone,
        format!("max objective gap to 10x reference {worst:.2e}; traces monotone: {monotone}"),
    )
}

// 8 ------------------------------------------------------------------------

fn greedy_invariants() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(8);
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut bitwise = true;
    for _ in 0..100 {
        let n = rng.random_range(10..=40);
        let d = rng.random_range(5..=60);
        let tasks = rng.random_range(1..=4);
        let k = rng.random_range(1..=n.min(d).min(12));
        let x = DataMatrix::new(gaussian(&mut rng, n, d)).expect("finite");
        let y = gaussian(&mut rng, n, tasks);
        let weights = vec![1.0; tasks];
        let (xc, _) = center_columns(x.view());
        let yc = &y - &y.mean_axis(Axis(0)).expect("rows");
        for budget in 1..=k {
            let fit = somp_weighted(&x, y.view(), &weights, &GreedyConfig::new(budget)).expect("fit");
            let cols = fit.support.indices();
            for l in 0..tasks {
                let c = fit.coefficients.task(l);
                let mut r = yc.column(l).to_owned();
                for &j in cols {
                    r.scaled_add(-c[j], &xc.column(j));
                }
                for &j in cols {
                    let scale = norm(xc.column(j)) * norm(yc.column(l));
                    if scale > 0.0 {
                        worst = worst.max(xc.column(j).dot(&r).abs() / scale);
                    }
                }
            }
            for w in fit.residual_norms.windows(2) {
                monotone &= w[1].iter().zip(&w[0]).all(|(b, a)| b <= a);
            }
        }
        let single = y.column(0);
        let a = omp(&x, single, &GreedyConfig::new(k)).expect("omp");
        let b = somp_weighted(&x, single.insert_axis(Axis(1)), &[1.0], &GreedyConfig::new(k)).expect("somp");
        let bits = |m: &mtfs::CoefficientMatrix| {
            m.weights().iter().chain(m.biases().iter()).map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        bitwise &= a.support == b.support && bits(&a.coefficients) == bits(&b.coefficients);
    }
    outcome(
        worst <= 1e-8 && monotone && bitwise,
        format!("max relative residual correlation {worst:.2e}; norms non-increasing: {monotone}; L=1 SOMP == OMP bitwise: {bitwise}"),
    )
}

// 9 ------------------------------------------------------------------------

fn roc_oracle() -> Outcome {
    let mut rng = Pcg64::seed_from_u64(9);
    let mut worst = 0.0f64;
    let mut sets = 0;
    while sets < 1000 {
        let m = rng.random_range(2..=200);
        let levels = if sets % 3 == 0 { rng.random_range(1..=4) } else { 0 };
        let scores: Vec<f64> = (0..m)
            .map(|_| if levels > 0 { rng.random_range(0..levels) as f64 } else { rng.random() })
            .collect();
        let labels: Vec<bool> = (0..m).map(|_| rng.random_bool(0.3)).collect();
        if labels.iter().all(|&b| b) || labels.iter().all(|&b| !b) {
            continue;
        }
        let a = roc_curve(&scores, &labels).expect("both classes").auc;
        let b = auc_pairwise(&scores, &labels).expect("both classes");
        worst = worst.max((a - b).abs());
        sets += 1;
    }
    outcome(worst <= 1e-12, format!("max |AUC - pairwise| over 1000 sets {worst:.2e}"))
}

// 10 -----------------------------------------------------------------------

fn naive_gabor(img: &Array2<f64>, bank: &FilterBank) -> Vec<f64> {
    let n = img.nrows() as isize;
    let mirror = |mut i: isize| loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    };
    let half = (bank.kernel_size() / 2) as isize;
    let mut out = Vec::new();
    for k in bank.kernels() {
        for y in 0..n {
            for x in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for ((a, b), w) in k.indexed_iter() {
                    acc += w * img[[mirror(y - (a as isize - half)), mirror(x - (b as isize - half))]];
                }
                out.push(acc.norm());
            }
        }
    }
    out
}

fn gabor_contract() -> Outcome {
    let bank = build_filter_bank(5, 8, GaborParams::default()).expect("bank");
    let mut rng = Pcg64::seed_from_u64(10);
    let face = AlignedFace::new(Array2::from_shape_simple_fn((64, 64), || rng.random())).expect("face");
    let len = extract(&face, &bank).len();

    let flat = extract(&AlignedFace::new(Array2::from_elem((64, 64), 0.5)).expect("face"), &bank);
    let kernel_norm = bank
        .kernels()
        .iter()
        .map(|k| k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let flat_max = flat.iter().cloned().fold(0.0, f64::max) / kernel_norm;

    let small = build_filter_bank(2, 2, GaborParams::default()).expect("bank");
    let img = Array2::from_shape_simple_fn((16, 16), || rng.random::<f64>());
    let fast = extract(&AlignedFace::new(img.clone()).expect("face"), &small);
    let slow = naive_gabor(&img, &small);
    let dev = fast.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    outcome(
        len == 163_840 && flat_max <= 1e-6 && fast.len() == 1024 && dev <= 1e-8,
        format!("length {len}; constant-image response {flat_max:.2e} of kernel norm; 16x16 oracle deviation {dev:.2e}"),
    )
}

// 11 -----------------------------------------------------------------------

fn run_pipeline(bin: &str, dir: &Path) -> Result<(), String> {
    let d = dir.to_str().ok_or("non-UTF-8 path")?;
    let steps: [Vec<String>; 3] = [
        "synth --seed 11 --n-features 120 --n-tasks 12 --support-size 6 --snr 2 --background 40"
            .split(' ')
            .map(String::from)
            .chain(["--out-dir".into(), d.into()])
            .collect(),
        vec![
            "select-train".into(),
            "--train-x".into(),
            format!("{d}/train_x.bin"),
            "--train-labels".into(),
            format!("{d}/train_labels.csv"),
            "--method".into(),
            "mtl-somp".into(),
            "--budget".into(),
            "10".into(),
            "--refit".into(),
            "ridge".into(),
            "--out-dir".into(),
            d.into(),
        ],
        vec![
            "evaluate".into(),
            "--model".into(),
            format!("{d}/model.txt"),
            "--test-x".into(),
            format!("{d}/test_x.bin"),
            "--test-labels".into(),
            format!("{d}/test_labels.csv"),
            "--out-dir".into(),
            d.into(),
        ],
    ];
    for args in steps {
        let out = Command::new(bin).args(&args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn end_to_end_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_mtfs");
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    for dir in [a.path(), b.path()] {
        if let Err(e) = run_pipeline(bin, dir) {
            return outcome(false, e);
        }
    }
    let files = ["train_x.bin", "test_x.bin", "train_labels.csv", "model.txt", "summary.csv", "roc.csv"];
    let differing: Vec<&str> = files
        .iter()
        .copied()
        .filter(|f| std::fs::read(a.path().join(f)).ok() != std::fs::read(b.path().join(f)).ok())
        .collect();
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            format!("{} files byte-identical across two runs", files.len())
        } else {
            format!("differing files: {differing:?}")
        },
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = vec![
        (1, "LFW numbers are not reproduction targets", lfw_statement()),
        (2, "SOMP shared-support recovery", somp_recovery()),
    ];
    let trials = bench_trials();
    results.push((3, "multi-task beats single-task", multitask_beats_single(&trials)));
    results.push((4, "ridge refit helps or ties", refit_helps_or_ties(&trials)));
    results.push((5, "LASSO optimality certificate", lasso_certificate()));
    results.push((6, "prox and projection oracles", prox_oracles()));
    results.push((7, "group solver vs long reference", group_solver_reference()));
    results.push((8, "greedy invariants", greedy_invariants()));
    results.push((9, "ROC vs pairwise AUC", roc_oracle()));
    results.push((10, "Gabor contract", gabor_contract()));
    results.push((11, "end-to-end determinism", end_to_end_determinism()));

    let mut failed = 0;
    for (id, name, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {tag}  {name}: {}", o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {}/{} passed in {:.1} s",
        results.len() - failed,
        results.len(),
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
