use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use super::rng::{seeded_rng, SeededRng};
use crate::error::{Error, Result};
use crate::linear_model::{build_indicator, CoefficientMatrix, DataMatrix, IndicatorResponse, SupportSet};

/// Parameters of a planted-support benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Sample count for regression data (the classification generator sizes
    /// its sets from [`SplitCounts`] instead).
    pub n_samples: usize,
    pub n_features: usize,
    pub n_tasks: usize,
    /// Total planted row support `k`.
    pub support_size: usize,
    /// Signal-to-noise ratio; `f64::INFINITY` disables noise.
    pub snr: f64,
    /// Fraction of the `k` rows used by every task; the remaining rows are
    /// dealt out to single tasks round-robin.
    pub share_fraction: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_features == 0 || self.n_tasks == 0 {
            return Err(Error::config("need at least one feature and one task"));
        }
        if self.support_size == 0 || self.support_size > self.n_features {
            return Err(Error::config(format!(
                "support size {} must lie in [1, d = {}]",
                self.support_size, self.n_features
            )));
        }
        if !(0.0..=1.0).contains(&self.share_fraction) {
            return Err(Error::config(format!(
                "share fraction must lie in [0, 1], got {}",
                self.share_fraction
            )));
        }
        if self.snr.is_nan() || self.snr <= 0.0 {
            return Err(Error::config(format!("snr must be positive, got {}", self.snr)));
        }
        Ok(())
    }

    pub fn shared_rows(&self) -> usize {
        (self.share_fraction * self.support_size as f64).round() as usize
    }
}

/// Planted row structure: `shared` rows feed every task, `private[l]` only
/// task `l`.
#[derive(Debug, Clone, PartialEq)]
struct PlantedRows {
    shared: Vec<usize>,
    private: Vec<Vec<usize>>,
}

impl PlantedRows {
    fn draw(spec: &SynthSpec, rng: &mut SeededRng) -> Self {
        let mut rows = sample(rng, spec.n_features, spec.support_size).into_vec();
        let private_rows = rows.split_off(spec.shared_rows());
        let mut private = vec![Vec::new(); spec.n_tasks];
        for (i, row) in private_rows.into_iter().enumerate() {
            private[i % spec.n_tasks].push(row);
        }
        Self {
            shared: rows,
            private,
        }
    }

    fn union(&self) -> SupportSet {
        let mut all: Vec<usize> = self.shared.iter().chain(self.private.iter().flatten()).copied().collect();
        all.sort_unstable();
        SupportSet::new(all).expect("sampled rows are distinct")
    }

    /// Coefficients drawn uniformly in [1, 2] with a random sign.
    fn coefficients(&self, spec: &SynthSpec, rng: &mut SeededRng) -> Array2<f64> {
        let mut c = Array2::zeros((spec.n_features, spec.n_tasks));
        for l in 0..spec.n_tasks {
            for &row in self.shared.iter().chain(&self.private[l]) {
                let mag: f64 = rng.random_range(1.0..2.0);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                c[[row, l]] = sign * mag;
            }
        }
        c
    }
}

#[derive(Debug, Clone)]
pub struct RegressionData {
    pub x: DataMatrix,
    /// `N x L` real targets.
    pub targets: Array2<f64>,
    pub planted: CoefficientMatrix,
    /// Union of all planted rows, ascending.
    pub support: SupportSet,
}

/// Gaussian dictionary with targets `X C + noise`, where per-task noise
/// variance is the sample variance of `X c_l` divided by `snr`.
pub fn synth_regression(spec: &SynthSpec) -> Result<RegressionData> {
    spec.validate()?;
    if spec.n_samples == 0 {
        return Err(Error::config("need at least one sample"));
    }
    let mut rng = seeded_rng(spec.seed);
    let rows = PlantedRows::draw(spec, &mut rng);
    let c = rows.coefficients(spec, &mut rng);
    let x = gaussian_matrix(&mut rng, spec.n_samples, spec.n_features);
    let mut targets = x.dot(&c);
    if spec.snr.is_finite() {
        for mut col in targets.columns_mut() {
            let mean = col.mean().unwrap_or(0.0);
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            let sd = (var / spec.snr).sqrt();
            for v in col.iter_mut() {
                *v += sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
    Ok(RegressionData {
        x: DataMatrix::new(x)?,
        targets,
        planted: CoefficientMatrix::new(c, Array1::zeros(spec.n_tasks))?,
        support: rows.union(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    /// Training positives per enrolled class.
    pub per_class: usize,
    /// Training samples from people outside the enrolled classes.
    pub background: usize,
    /// Held-out samples per enrolled class.
    pub test_per_class: usize,
}

/// Unbalanced verification data set: a few positives per class plus
/// background samples for training, known classes only for testing.
#[derive(Debug, Clone)]
pub struct VerificationSplit {
    pub train_x: DataMatrix,
    pub train_y: IndicatorResponse,
    pub test_x: DataMatrix,
    /// Class of each test sample.
    pub test_labels: Vec<usize>,
    pub per_class_train_count: usize,
    pub background_count: usize,
    /// Rows on which the class means differ.
    pub planted_support: SupportSet,
}

impl VerificationSplit {
    pub fn train_labels(&self) -> Vec<Option<usize>> {
        self.train_y.labels()
    }

    /// Renames class `perm[l]` to `l`: indicator columns and test labels
    /// are permuted together.
    pub fn permute_classes(&self, perm: &[usize]) -> Result<Self> {
        let n = self.train_y.n_tasks();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("not a permutation of the class ids"));
        }
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        Ok(Self {
            train_x: self.train_x.clone(),
            train_y: self.train_y.select_tasks(perm)?,
            test_x: self.test_x.clone(),
            test_labels: self.test_labels.iter().map(|&l| inverse[l]).collect(),
            per_class_train_count: self.per_class_train_count,
            background_count: self.background_count,
            planted_support: self.planted_support.clone(),
        })
    }
}

/// Class-conditional Gaussian data. Class `l` has mean `c_l` (the planted
/// coefficient column, zero off its support rows); background samples have
/// mean zero. Isotropic noise variance is the mean squared nonzero planted
/// entry divided by `snr`.
pub fn synth_classification(spec: &SynthSpec, counts: &SplitCounts) -> Result<VerificationSplit> {
    spec.validate()?;
    if counts.per_class == 0 {
        return Err(Error::config("need at least one training sample per class"));
    }
    if counts.test_per_class == 0 {
        return Err(Error::config("need at least one test sample per class"));
    }
    let n_train = counts
        .per_class
        .checked_mul(spec.n_tasks)
        .and_then(|v| v.checked_add(counts.background))
        .ok_or_else(|| Error::config("sample counts overflow"))?;
    let n_test = counts
        .test_per_class
        .checked_mul(spec.n_tasks)
        .ok_or_else(|| Error::config("sample counts overflow"))?;
    n_train
        .max(n_test)
        .checked_mul(spec.n_features)
        .ok_or_else(|| Error::config("data set too large"))?;

    let mut rng = seeded_rng(spec.seed);
    let rows = PlantedRows::draw(spec, &mut rng);
    let means = rows.coefficients(spec, &mut rng);
    let nonzero: Vec<f64> = means.iter().copied().filter(|v| *v != 0.0).collect();
    let power = nonzero.iter().map(|v| v * v).sum::<f64>() / nonzero.len().max(1) as f64;
    let sd = if spec.snr.is_finite() { (power / spec.snr).sqrt() } else { 0.0 };

    let mut train_labels: Vec<Option<usize>> = (0..spec.n_tasks)
        .flat_map(|l| std::iter::repeat_n(Some(l), counts.per_class))
        .collect();
    train_labels.extend(std::iter::repeat_n(None, counts.background));
    let test_labels: Vec<usize> = (0..spec.n_tasks)
        .flat_map(|l| std::iter::repeat_n(l, counts.test_per_class))
        .collect();

    let train_x = class_samples(&mut rng, &means, &train_labels, sd);
    let test_opt: Vec<Option<usize>> = test_labels.iter().map(|&l| Some(l)).collect();
    let test_x = class_samples(&mut rng, &means, &test_opt, sd);

    Ok(VerificationSplit {
        train_x: DataMatrix::new(train_x)?,
        train_y: build_indicator(&train_labels, spec.n_tasks)?,
        test_x: DataMatrix::new(test_x)?,
        test_labels,
        per_class_train_count: counts.per_class,
        background_count: counts.background,
        planted_support: rows.union(),
    })
}

fn gaussian_matrix(rng: &mut SeededRng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
}

fn class_samples(rng: &mut SeededRng, means: &Array2<f64>, labels: &[Option<usize>], sd: f64) -> Array2<f64> {
    let mut x = gaussian_matrix(rng, labels.len(), means.nrows());
    x *= sd;
    for (mut row, label) in x.axis_iter_mut(Axis(0)).zip(labels) {
        if let Some(l) = *label {
            row += &means.column(l);
        }
    }
    x
}
