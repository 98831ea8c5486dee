//! Convex relaxations: LASSO for single tasks, the row-sparse `l_{1,q}`
//! program for all tasks jointly, and ridge refitting on a fixed support.

mod group;
mod lasso;
pub mod prox;
mod ridge;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub use group::{group_lambda_max, group_objective, group_solver, group_solver_weighted};
pub use lasso::{lasso, lasso_lambda_max, solve_all_single_task, weighted_lasso};
pub use prox::{project_l1_ball, prox_row_l2, prox_row_linf};
pub use ridge::{ridge_refit, ridge_refit_targets};

use crate::error::{Error, Result};
use crate::linalg::center_columns;
use crate::linear_model::{lq_norm, CoefficientMatrix, DataMatrix, SupportSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Constant step from a power-iteration bound on the Lipschitz constant.
    Fixed,
    #[default]
    Backtracking,
}

/// Row norm used inside the `l_{1,q}` penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowNorm {
    L2,
    #[default]
    Linf,
}

impl RowNorm {
    pub fn exponent(self) -> f64 {
        match self {
            RowNorm::L2 => 2.0,
            RowNorm::Linf => f64::INFINITY,
        }
    }

    pub(crate) fn norm(self, v: ArrayView1<f64>) -> f64 {
        lq_norm(v, self.exponent())
    }

    /// Norm dual to this one, used for the zero-solution threshold.
    pub(crate) fn dual_norm(self, v: ArrayView1<f64>) -> f64 {
        match self {
            RowNorm::L2 => lq_norm(v, 2.0),
            RowNorm::Linf => lq_norm(v, 1.0),
        }
    }

    pub(crate) fn prox(self, v: ArrayView1<f64>, t: f64) -> Array1<f64> {
        match self {
            RowNorm::L2 => prox_row_l2(v, t),
            RowNorm::Linf => prox_row_linf(v, t),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexConfig {
    pub lambda: f64,
    pub max_iters: usize,
    /// Convergence when the relative objective change drops below this.
    pub rel_tol: f64,
    pub step_rule: StepRule,
    pub q: RowNorm,
}

impl ConvexConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_iters: 20_000,
            rel_tol: 1e-12,
            step_rule: StepRule::Backtracking,
            q: RowNorm::Linf,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config(format!(
                "lambda must be positive and finite, got {}",
                self.lambda
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("max_iters must be at least 1"));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol > 0.0) {
            return Err(Error::config(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ConvexFit {
    pub coefficients: CoefficientMatrix,
    /// Objective value after each iteration.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations_used: usize,
}

/// Column-centered copy of the dictionary plus the means needed to recover
/// biases.
pub(crate) struct CenteredDesign {
    pub xc: Array2<f64>,
    pub means: Array1<f64>,
}

impl CenteredDesign {
    pub fn new(x: &DataMatrix) -> Self {
        let (xc, means) = center_columns(x.view());
        Self { xc, means }
    }

    /// `b_l = mean(y_l) - mean_x . c_l`
    pub fn biases(&self, y_means: ArrayView1<f64>, weights: ArrayView2<f64>) -> Array1<f64> {
        &y_means - &self.means.dot(&weights)
    }
}

/// Relative objective change used by the stopping rules.
pub(crate) fn relative_change(prev: f64, cur: f64) -> f64 {
    (prev - cur).abs() / cur.abs().max(f64::MIN_POSITIVE)
}

/// Extracts a support from a fitted coefficient matrix.
///
/// Rows whose `l_q` norm exceeds `1e-6` times the largest row norm survive;
/// at most `budget` of them are kept, largest norm first (ties to the
/// smaller index). The returned order is by decreasing row norm.
pub fn extract_support(coef: &CoefficientMatrix, q: RowNorm, budget: Option<usize>) -> SupportSet {
    let norms: Vec<f64> = (0..coef.n_features())
        .map(|i| q.norm(coef.feature(i)))
        .collect();
    let top = norms.iter().fold(0.0f64, |m, &v| m.max(v));
    if top == 0.0 {
        return SupportSet::empty();
    }
    let eps = 1e-6 * top;
    let mut rows: Vec<usize> = (0..norms.len()).filter(|&i| norms[i] > eps).collect();
    rows.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    if let Some(k) = budget {
        rows.truncate(k);
    }
    SupportSet::new(rows).expect("row indices are distinct")
}

/// Zeroes every row outside `support`, keeping biases.
pub fn restrict_to_support(coef: &CoefficientMatrix, support: &SupportSet) -> CoefficientMatrix {
    let mut w = Array2::zeros((coef.n_features(), coef.n_tasks()));
    for &i in support.indices() {
        w.row_mut(i).assign(&coef.feature(i));
    }
    CoefficientMatrix::new(w, coef.biases().to_owned()).expect("subset of finite entries")
}
