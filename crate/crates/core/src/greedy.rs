//! Greedy pursuit: orthogonal matching pursuit for one target and its
//! simultaneous variant selecting one shared support for many targets.
//!
//! Both run on column-centered data so the per-task bias stays unpenalized;
//! biases are recovered from the means once the support is fixed. The
//! correlation matrix `X~^T R` is kept up to date by rank-one corrections, so
//! every iteration costs one `X^T q` product rather than `X^T R`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::linalg::norm2;
use crate::linear_model::{CoefficientMatrix, DataMatrix, IndicatorResponse, SupportSet};

/// Orthogonal component below this fraction of the centered column norm
/// marks the candidate as linearly dependent on the current support.
const RANK_TOL: f64 = 1e-10;

/// How per-task correlations are combined into one selection score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    /// `sum_l w_l |x_j . r_l|`
    #[default]
    L1,
    /// `sqrt(sum_l (w_l x_j . r_l)^2)`
    L2,
    /// `max_l w_l |x_j . r_l|`
    Linf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyConfig {
    /// Sparsity budget `K`.
    pub max_features: usize,
    /// Stop once every task residual has l2 norm at most this.
    pub residual_tol: f64,
    /// Score candidates by correlation with unit-normalized columns.
    pub normalize_columns: bool,
    pub aggregation: Aggregation,
}

impl GreedyConfig {
    pub fn new(max_features: usize) -> Self {
        Self {
            max_features,
            residual_tol: 0.0,
            normalize_columns: true,
            aggregation: Aggregation::L1,
        }
    }

    pub fn validate(&self, n_samples: usize, n_features: usize) -> Result<()> {
        if self.max_features == 0 {
            return Err(Error::config("feature budget must be at least 1"));
        }
        let cap = n_samples.min(n_features);
        if self.max_features > cap {
            return Err(Error::config(format!(
                "feature budget {} exceeds min(N, d) = {cap}",
                self.max_features
            )));
        }
        if !self.residual_tol.is_finite() || self.residual_tol < 0.0 {
            return Err(Error::config(format!(
                "residual tolerance must be finite and >= 0, got {}",
                self.residual_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    ResidualTolerance,
    /// No remaining candidate could extend the support.
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct GreedyFit {
    pub support: SupportSet,
    pub coefficients: CoefficientMatrix,
    /// `residual_norms[t][l]` is `||r_l||_2` after `t` selections; entry 0
    /// holds the centered target norms.
    pub residual_norms: Vec<Vec<f64>>,
    /// Winning selection score of each iteration.
    pub scores: Vec<f64>,
    /// Candidates rejected as collinear with the support.
    pub dropped: Vec<usize>,
    pub warnings: Vec<String>,
    pub stop: StopReason,
}

/// Orthogonal matching pursuit for a single target vector.
pub fn omp(x: &DataMatrix, y: ArrayView1<f64>, cfg: &GreedyConfig) -> Result<GreedyFit> {
    check_dim("target length", x.rows(), y.len())?;
    let targets = y.insert_axis(Axis(1));
    pursuit(x, targets, &[1.0], cfg)
}

/// Simultaneous OMP over the indicator columns, weighting task `l` by `1/N_l`.
pub fn somp(x: &DataMatrix, y: &IndicatorResponse, cfg: &GreedyConfig) -> Result<GreedyFit> {
    check_dim("response rows", x.rows(), y.n_samples())?;
    pursuit(x, y.matrix(), &y.task_weights(), cfg)
}

/// Simultaneous OMP on arbitrary real targets with explicit task weights.
pub fn somp_weighted(
    x: &DataMatrix,
    targets: ArrayView2<f64>,
    weights: &[f64],
    cfg: &GreedyConfig,
) -> Result<GreedyFit> {
    check_dim("target rows", x.rows(), targets.nrows())?;
    check_dim("task weights", targets.ncols(), weights.len())?;
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("task weights must be positive and finite"));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("targets must be finite"));
    }
    pursuit(x, targets, weights, cfg)
}

fn pursuit(
    x: &DataMatrix,
    targets: ArrayView2<f64>,
    weights: &[f64],
    cfg: &GreedyConfig,
) -> Result<GreedyFit> {
    let (n, d) = (x.rows(), x.cols());
    let n_tasks = targets.ncols();
    cfg.validate(n, d)?;
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("targets must be finite"));
    }

    let xv = x.view();
    let x_means = x.column_means();
    let col_norms = centered_column_norms(xv, x_means.view());
    let y_means = targets.mean_axis(Axis(0)).expect("non-empty targets");
    let mut residual = &targets - &y_means;

    let mut corr = centered_xt(xv, x_means.view(), residual.view());

    // Orthonormal basis of the centered selected columns, the triangular
    // factor (stored by columns) and the projections q_i . t_l.
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(cfg.max_features);
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(cfg.max_features);
    let mut proj: Vec<Array1<f64>> = Vec::with_capacity(cfg.max_features);

    let mut support = SupportSet::empty();
    let mut excluded = vec![false; d];
    for (j, &nj) in col_norms.iter().enumerate() {
        if nj == 0.0 {
            excluded[j] = true;
        }
    }
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    let mut scores = Vec::new();
    let mut residual_norms = vec![task_norms(residual.view())];

    let stop = loop {
        if support.len() >= cfg.max_features {
            break StopReason::Budget;
        }
        let worst = residual_norms
            .last()
            .unwrap()
            .iter()
            .fold(0.0f64, |m, &v| m.max(v));
        if worst <= cfg.residual_tol {
            break StopReason::ResidualTolerance;
        }

        // Pick the best candidate that is not collinear with the support.
        let accepted = loop {
            let Some((j, score)) = best_candidate(&corr, &col_norms, &excluded, weights, cfg)
            else {
                break None;
            };
            let xj = x.column(j).mapv(|v| v - x_means[j]);
            let (q, r_col) = orthogonalize(xj, &basis);
            let rnorm = r_col[basis.len()];
            if rnorm <= RANK_TOL * col_norms[j] {
                excluded[j] = true;
                dropped.push(j);
                warnings.push(format!(
                    "feature {j} is linearly dependent on the current support; skipped"
                ));
                continue;
            }
            break Some((j, score, q, r_col));
        };
        let Some((j, score, q, r_col)) = accepted else {
            break StopReason::Exhausted;
        };

        excluded[j] = true;
        support.push(j)?;
        scores.push(score);

        let z = q.dot(&residual);
        for (mut r, &zl) in residual.columns_mut().into_iter().zip(z.iter()) {
            r.scaled_add(-zl, &q);
        }
        let h = xv.t().dot(&q) - &(&x_means * q.sum());
        for (mut g, &zl) in corr.columns_mut().into_iter().zip(z.iter()) {
            g.scaled_add(-zl, &h);
        }

        basis.push(q);
        r_cols.push(r_col);
        proj.push(z);
        residual_norms.push(task_norms(residual.view()));
    };

    let mut weights_out = Array2::zeros((d, n_tasks));
    let mut biases = y_means.clone();
    let k = support.len();
    for l in 0..n_tasks {
        let c = back_substitute(&r_cols, &proj, l);
        for (i, &j) in support.indices().iter().enumerate() {
            weights_out[[j, l]] = c[i];
        }
        let shift: f64 = (0..k).map(|i| x_means[support.indices()[i]] * c[i]).sum();
        biases[l] -= shift;
    }

    Ok(GreedyFit {
        support,
        coefficients: CoefficientMatrix::new(weights_out, biases)?,
        residual_norms,
        scores,
        dropped,
        warnings,
        stop,
    })
}

fn centered_column_norms(x: ArrayView2<f64>, means: ArrayView1<f64>) -> Array1<f64> {
    let mut acc = Array1::<f64>::zeros(x.ncols());
    for row in x.rows() {
        for ((a, &v), &m) in acc.iter_mut().zip(row.iter()).zip(means.iter()) {
            let c = v - m;
            *a += c * c;
        }
    }
    acc.mapv_into(f64::sqrt)
}

/// `(X - 1 m^T)^T R` without materializing the centered matrix.
fn centered_xt(x: ArrayView2<f64>, means: ArrayView1<f64>, r: ArrayView2<f64>) -> Array2<f64> {
    let mut g = x.t().dot(&r);
    let col_sums = r.sum_axis(Axis(0));
    for (mut row, &m) in g.rows_mut().into_iter().zip(means.iter()) {
        row.scaled_add(-m, &col_sums);
    }
    g
}

fn task_norms(r: ArrayView2<f64>) -> Vec<f64> {
    r.columns().into_iter().map(norm2).collect()
}

fn best_candidate(
    corr: &Array2<f64>,
    col_norms: &Array1<f64>,
    excluded: &[bool],
    weights: &[f64],
    cfg: &GreedyConfig,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, row) in corr.rows().into_iter().enumerate() {
        if excluded[j] {
            continue;
        }
        let mut s = match cfg.aggregation {
            Aggregation::L1 => row
                .iter()
                .zip(weights)
                .map(|(g, w)| w * g.abs())
                .sum::<f64>(),
            Aggregation::L2 => row
                .iter()
                .zip(weights)
                .map(|(g, w)| (w * g) * (w * g))
                .sum::<f64>()
                .sqrt(),
            Aggregation::Linf => row
                .iter()
                .zip(weights)
                .fold(0.0f64, |m, (g, w)| m.max(w * g.abs())),
        };
        if cfg.normalize_columns {
            s /= col_norms[j];
        }
        // strict comparison: the smallest index wins ties
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    best
}

/// Modified Gram-Schmidt with one reorthogonalization pass. Returns the
/// normalized direction and the new column of the triangular factor.
fn orthogonalize(mut v: Array1<f64>, basis: &[Array1<f64>]) -> (Array1<f64>, Vec<f64>) {
    let k = basis.len();
    let mut r = vec![0.0; k + 1];
    for _ in 0..2 {
        for (i, q) in basis.iter().enumerate() {
            let h = q.dot(&v);
            v.scaled_add(-h, q);
            r[i] += h;
        }
    }
    let nv = norm2(v.view());
    r[k] = nv;
    if nv > 0.0 {
        v /= nv;
    }
    (v, r)
}

fn back_substitute(r_cols: &[Vec<f64>], proj: &[Array1<f64>], task: usize) -> Vec<f64> {
    let k = r_cols.len();
    let mut c = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = proj[i][task];
        for m in i + 1..k {
            s -= r_cols[m][i] * c[m];
        }
        c[i] = s / r_cols[i][i];
    }
    c
}
