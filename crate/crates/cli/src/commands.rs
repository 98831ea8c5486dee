use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use ndarray::Array2;

use mtfs::convex::RowNorm;
use mtfs::data::io::{load_labels, load_matrix, save_labels, save_matrix};
use mtfs::data::manifest::load_manifest;
use mtfs::data::{synth_classification, SplitCounts, SynthSpec};
use mtfs::eval::{write_roc_csv, write_summary_csv, DEFAULT_GRID_STEP};
use mtfs::gabor::{build_filter_bank, FeaturePipeline, GaborParams, ImageLoader, PgmLoader};
use mtfs::model_file::Model;
use mtfs::{build_indicator, DataMatrix, Error};

use crate::config::ConfigFile;
use crate::train::{evaluate, train, Method, Refit, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "mtfs", version, about = "Single- and multi-task sparse feature selection for face verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an unbalanced synthetic verification data set.
    Synth(SynthArgs),
    /// Align, crop and Gabor-filter the images listed in a manifest.
    Extract(ExtractArgs),
    /// Select features and fit one verification model per class.
    SelectTrain(SelectTrainArgs),
    /// Score test data with a trained model and write ROC reports.
    Evaluate(EvaluateArgs),
}

/// `2` or `inf`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QNorm(pub RowNorm);

impl FromStr for QNorm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "2" => Ok(QNorm(RowNorm::L2)),
            "inf" => Ok(QNorm(RowNorm::Linf)),
            _ => Err(format!("expected 2 or inf, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefitKind {
    None,
    Ridge,
}

impl FromStr for RefitKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(RefitKind::None),
            "ridge" => Ok(RefitKind::Ridge),
            _ => Err(format!("expected none or ridge, got {s:?}")),
        }
    }
}

/// `bin` or `csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixExt(&'static str);

impl FromStr for MatrixExt {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "bin" => Ok(MatrixExt("bin")),
            "csv" => Ok(MatrixExt("csv")),
            _ => Err(format!("expected bin or csv, got {s:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// key=value file supplying any of the options below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// [default: out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Feature dimension d [default: 500]
    #[arg(long)]
    pub n_features: Option<usize>,
    /// Enrolled classes L [default: 158]
    #[arg(long)]
    pub n_tasks: Option<usize>,
    /// Planted support size k [default: 10]
    #[arg(long)]
    pub support_size: Option<usize>,
    /// Fraction of the support shared by all classes [default: 1.0]
    #[arg(long)]
    pub share_fraction: Option<f64>,
    /// Signal-to-noise ratio, `inf` for none [default: 1.0]
    #[arg(long)]
    pub snr: Option<f64>,
    /// Training images per class [default: 5]
    #[arg(long)]
    pub per_class: Option<usize>,
    /// Training images of unenrolled people [default: 210]
    #[arg(long)]
    pub background: Option<usize>,
    /// Test images per class [default: 5]
    #[arg(long)]
    pub test_per_class: Option<usize>,
    /// Matrix file format, bin or csv [default: bin]
    #[arg(long)]
    pub format: Option<MatrixExt>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV of image_path,left_x,left_y,right_x,right_y,class_id
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// [default: out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Side of the aligned crop [default: 64]
    #[arg(long)]
    pub crop: Option<usize>,
    /// [default: 5]
    #[arg(long)]
    pub scales: Option<usize>,
    /// [default: 8]
    #[arg(long)]
    pub orientations: Option<usize>,
    /// Highest wave number [default: pi/2]
    #[arg(long)]
    pub k_max: Option<f64>,
    /// Wave-number ratio between scales [default: sqrt 2]
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Envelope width [default: 2 pi]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Odd kernel window side [default: 33]
    #[arg(long)]
    pub window: Option<usize>,
    /// bin or csv [default: bin]
    #[arg(long)]
    pub format: Option<MatrixExt>,
}

#[derive(Debug, Args)]
pub struct SelectTrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train_x: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    /// stl-omp, mtl-somp, stl-lasso or mtl-group [default: mtl-somp]
    #[arg(long)]
    pub method: Option<Method>,
    /// Feature budget K [default: 300]
    #[arg(long)]
    pub budget: Option<usize>,
    /// Penalty of the convex methods [default: chosen on a geometric grid]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Ratio between grid penalties [default: 0.5]
    #[arg(long)]
    pub lambda_ratio: Option<f64>,
    /// Grid length [default: 20]
    #[arg(long)]
    pub lambda_steps: Option<usize>,
    /// Row norm of the group penalty, 2 or inf [default: inf]
    #[arg(long)]
    pub q: Option<QNorm>,
    /// none or ridge [default: none]
    #[arg(long)]
    pub refit: Option<RefitKind>,
    /// Ridge penalty [default: 1.0]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// [default: 20000]
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Relative objective tolerance [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    /// [default: out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub test_x: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// [default: 0.001]
    #[arg(long)]
    pub fpr_grid_step: Option<f64>,
    /// [default: out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn required(cfg: &ConfigFile, key: &str, flag: Option<PathBuf>) -> Result<PathBuf> {
    cfg.get(key, flag)?
        .ok_or_else(|| Error::InvalidConfig(format!("missing --{key}")).into())
}

fn out_dir(cfg: &ConfigFile, flag: Option<PathBuf>) -> Result<PathBuf> {
    let dir = cfg.get_or("out-dir", flag, PathBuf::from("out"))?;
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn data_matrix(path: &Path) -> Result<DataMatrix> {
    let m = load_matrix(path).with_context(|| format!("reading {}", path.display()))?;
    DataMatrix::new(m).with_context(|| format!("checking {}", path.display()))
}

fn labels(path: &Path) -> Result<Vec<Option<usize>>> {
    load_labels(path).with_context(|| format!("reading {}", path.display()))
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(BufWriter<fs::File>) -> mtfs::Result<()>,
{
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Extract(a) => cmd_extract(a),
        Command::SelectTrain(a) => cmd_select_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

pub fn cmd_synth(a: SynthArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let spec = SynthSpec {
        n_samples: 0,
        n_features: cfg.get_or("n-features", a.n_features, 500)?,
        n_tasks: cfg.get_or("n-tasks", a.n_tasks, 158)?,
        support_size: cfg.get_or("support-size", a.support_size, 10)?,
        snr: cfg.get_or("snr", a.snr, 1.0)?,
        share_fraction: cfg.get_or("share-fraction", a.share_fraction, 1.0)?,
        seed: cfg.get_or("seed", a.seed, 42)?,
    };
    let counts = SplitCounts {
        per_class: cfg.get_or("per-class", a.per_class, 5)?,
        background: cfg.get_or("background", a.background, 210)?,
        test_per_class: cfg.get_or("test-per-class", a.test_per_class, 5)?,
    };
    let ext = cfg.get_or("format", a.format, MatrixExt("bin"))?.0;
    let dir = out_dir(&cfg, a.out_dir)?;
    cfg.finish()?;

    let split = synth_classification(&spec, &counts)?;
    let train_x = dir.join(format!("train_x.{ext}"));
    let test_x = dir.join(format!("test_x.{ext}"));
    save_matrix(&train_x, split.train_x.as_array())?;
    save_labels(&dir.join("train_labels.csv"), &split.train_labels())?;
    save_matrix(&test_x, split.test_x.as_array())?;
    let test_labels: Vec<Option<usize>> = split.test_labels.iter().map(|&l| Some(l)).collect();
    save_labels(&dir.join("test_labels.csv"), &test_labels)?;
    let support: String = split.planted_support.indices().iter().map(|i| format!("{i}\n")).collect();
    fs::write(dir.join("planted_support.csv"), support)?;

    let mut manifest = String::new();
    for (k, v) in [
        ("seed", spec.seed.to_string()),
        ("n-features", spec.n_features.to_string()),
        ("n-tasks", spec.n_tasks.to_string()),
        ("support-size", spec.support_size.to_string()),
        ("share-fraction", format!("{:?}", spec.share_fraction)),
        ("snr", format!("{:?}", spec.snr)),
        ("per-class", counts.per_class.to_string()),
        ("background", counts.background.to_string()),
        ("test-per-class", counts.test_per_class.to_string()),
        ("train-samples", split.train_x.rows().to_string()),
        ("test-samples", split.test_x.rows().to_string()),
        ("train-x", file_name(&train_x)),
        ("train-labels", "train_labels.csv".into()),
        ("test-x", file_name(&test_x)),
        ("test-labels", "test_labels.csv".into()),
    ] {
        let _ = writeln!(manifest, "{k}={v}");
    }
    fs::write(dir.join("dataset.txt"), &manifest)?;
    print!("{manifest}");
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn cmd_extract(a: ExtractArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let manifest_path = required(&cfg, "manifest", a.manifest)?;
    let defaults = GaborParams::default();
    let params = GaborParams {
        k_max: cfg.get_or("k-max", a.k_max, defaults.k_max)?,
        spacing: cfg.get_or("spacing", a.spacing, defaults.spacing)?,
        sigma: cfg.get_or("sigma", a.sigma, defaults.sigma)?,
        window: cfg.get_or("window", a.window, defaults.window)?,
    };
    let scales = cfg.get_or("scales", a.scales, 5)?;
    let orientations = cfg.get_or("orientations", a.orientations, 8)?;
    let crop = cfg.get_or("crop", a.crop, 64)?;
    let ext = cfg.get_or("format", a.format, MatrixExt("bin"))?.0;
    let dir = out_dir(&cfg, a.out_dir)?;
    cfg.finish()?;

    let entries = load_manifest(&manifest_path)
        .with_context(|| format!("reading manifest {}", manifest_path.display()))?;
    let pipeline = FeaturePipeline::new(crop, build_filter_bank(scales, orientations, params)?)?;
    let mut features = Array2::zeros((entries.len(), pipeline.dimension()));
    for (i, e) in entries.iter().enumerate() {
        let image = PgmLoader.load(&e.image_path)?;
        let f = pipeline
            .features(&image, e.left_eye, e.right_eye)
            .with_context(|| format!("manifest row {}: {}", i + 1, e.image_path.display()))?;
        features.row_mut(i).assign(&ndarray::Array1::from(f));
    }
    save_matrix(&dir.join(format!("features.{ext}")), &features)?;
    let labels: Vec<Option<usize>> = entries.iter().map(|e| e.class).collect();
    save_labels(&dir.join("labels.csv"), &labels)?;
    println!("features={}x{}", features.nrows(), features.ncols());
    Ok(())
}

pub fn cmd_select_train(a: SelectTrainArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let x_path = required(&cfg, "train-x", a.train_x)?;
    let y_path = required(&cfg, "train-labels", a.train_labels)?;
    let method = cfg.get_or("method", a.method, Method::MtlSomp)?;
    let mut tc = TrainConfig::new(method, cfg.get_or("budget", a.budget, 300)?);
    tc.lambda = cfg.get("lambda", a.lambda)?;
    tc.lambda_ratio = cfg.get_or("lambda-ratio", a.lambda_ratio, tc.lambda_ratio)?;
    tc.lambda_steps = cfg.get_or("lambda-steps", a.lambda_steps, tc.lambda_steps)?;
    tc.q = cfg.get_or("q", a.q, QNorm(tc.q))?.0;
    let alpha = cfg.get_or("alpha", a.alpha, 1.0)?;
    tc.refit = match cfg.get_or("refit", a.refit, RefitKind::None)? {
        RefitKind::None => Refit::None,
        RefitKind::Ridge => Refit::Ridge(alpha),
    };
    tc.max_iters = cfg.get_or("max-iters", a.max_iters, tc.max_iters)?;
    tc.rel_tol = cfg.get_or("tol", a.tol, tc.rel_tol)?;
    let dir = out_dir(&cfg, a.out_dir)?;
    cfg.finish()?;

    let x = data_matrix(&x_path)?;
    let labels = labels(&y_path)?;
    let n_tasks = labels.iter().flatten().max().map_or(0, |m| m + 1);
    if n_tasks == 0 {
        return Err(Error::InvalidInput("training labels contain no enrolled class".into()).into());
    }
    let y = build_indicator(&labels, n_tasks)?;
    let model = train(&x, &y, &tc)?;
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
    let path = dir.join("model.txt");
    model.save(&path).with_context(|| format!("writing {}", path.display()))?;
    println!("model={} support={}", path.display(), model.support.union().len());
    Ok(())
}

pub fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = ConfigFile::load(a.config.as_deref())?;
    let model_path = required(&cfg, "model", a.model)?;
    let x_path = required(&cfg, "test-x", a.test_x)?;
    let y_path = required(&cfg, "test-labels", a.test_labels)?;
    let step = cfg.get_or("fpr-grid-step", a.fpr_grid_step, DEFAULT_GRID_STEP)?;
    let dir = out_dir(&cfg, a.out_dir)?;
    cfg.finish()?;

    let model = Model::load(&model_path).with_context(|| format!("reading {}", model_path.display()))?;
    let x = data_matrix(&x_path)?;
    let test_labels = labels(&y_path)?
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| anyhow!(Error::InvalidInput(format!("test sample {i} has no class")))))
        .collect::<Result<Vec<usize>>>()?;
    let summary = evaluate(&model, &x, &test_labels, step)?;
    write_with(&dir.join("summary.csv"), |w| write_summary_csv(w, &[(&model.method, &summary)]))?;
    write_with(&dir.join("roc.csv"), |w| write_roc_csv(w, &summary))?;
    println!(
        "{} tpr@0.1={:.4} ({:.4}) auc={:.4} ({:.4})",
        model.method, summary.tpr_at_report_mean, summary.tpr_at_report_std, summary.auc_mean, summary.auc_std
    );
    Ok(())
}

/// 3 for numerical failures inside the solvers, 2 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<Error>())
        .any(Error::is_numerical);
    if numerical {
        3
    } else {
        2
    }
}
