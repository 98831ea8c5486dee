//! The four selection methods behind one entry point, plus scoring and the
//! per-person evaluation of a trained model.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;

use mtfs::convex::{
    extract_support, group_lambda_max, group_solver, lasso_lambda_max, restrict_to_support,
    ridge_refit, ridge_refit_targets, weighted_lasso, ConvexConfig, ConvexFit, RowNorm,
};
use mtfs::eval::{average_protocol, per_person_curves, ProtocolSummary};
use mtfs::greedy::{omp, somp, GreedyConfig, GreedyFit, StopReason};
use mtfs::model_file::{Model, ModelSupport};
use mtfs::{predict, CoefficientMatrix, DataMatrix, Error, IndicatorResponse, Result, SupportSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    StlOmp,
    MtlSomp,
    StlLasso,
    MtlGroup,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::StlOmp, Method::MtlSomp, Method::StlLasso, Method::MtlGroup];

    pub fn name(self) -> &'static str {
        match self {
            Method::StlOmp => "stl-omp",
            Method::MtlSomp => "mtl-somp",
            Method::StlLasso => "stl-lasso",
            Method::MtlGroup => "mtl-group",
        }
    }

    pub fn is_multitask(self) -> bool {
        matches!(self, Method::MtlSomp | Method::MtlGroup)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected stl-omp, mtl-somp, stl-lasso or mtl-group)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refit {
    None,
    Ridge(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    /// Sparsity budget `K`: per task for single-task methods, shared
    /// otherwise.
    pub budget: usize,
    /// Penalty for the convex methods. `None` walks the geometric grid
    /// `lambda_max * lambda_ratio^i`, `i = 1..=lambda_steps`, and keeps the
    /// first value whose support reaches the budget.
    pub lambda: Option<f64>,
    pub lambda_ratio: f64,
    pub lambda_steps: usize,
    pub q: RowNorm,
    pub refit: Refit,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub normalize_columns: bool,
}

impl TrainConfig {
    pub fn new(method: Method, budget: usize) -> Self {
        Self {
            method,
            budget,
            lambda: None,
            lambda_ratio: 0.5,
            lambda_steps: 20,
            q: RowNorm::Linf,
            refit: Refit::None,
            max_iters: 20_000,
            rel_tol: 1e-12,
            normalize_columns: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        if let Some(l) = self.lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidConfig(format!("lambda must be positive, got {l}")));
            }
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "lambda ratio must lie in (0, 1), got {}",
                self.lambda_ratio
            )));
        }
        if self.lambda_steps == 0 {
            return Err(Error::InvalidConfig("lambda grid needs at least one step".into()));
        }
        if let Refit::Ridge(a) = self.refit {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::InvalidConfig(format!("ridge alpha must be positive, got {a}")));
            }
        }
        self.convex(1.0).validate()
    }

    fn convex(&self, lambda: f64) -> ConvexConfig {
        ConvexConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            q: self.q,
            ..ConvexConfig::new(lambda)
        }
    }

    fn greedy(&self) -> GreedyConfig {
        GreedyConfig {
            normalize_columns: self.normalize_columns,
            ..GreedyConfig::new(self.budget)
        }
    }

    /// Effective settings, echoed into the model file.
    pub fn echo(&self) -> Vec<(String, String)> {
        let q = match self.q {
            RowNorm::L2 => "2",
            RowNorm::Linf => "inf",
        };
        let (refit, alpha) = match self.refit {
            Refit::None => ("none".to_string(), None),
            Refit::Ridge(a) => ("ridge".to_string(), Some(a)),
        };
        let mut out = vec![
            ("method", self.method.name().to_string()),
            ("budget", self.budget.to_string()),
            ("lambda", self.lambda.map_or("auto".into(), |l| format!("{l:?}"))),
            ("lambda-ratio", format!("{:?}", self.lambda_ratio)),
            ("lambda-steps", self.lambda_steps.to_string()),
            ("q", q.to_string()),
            ("refit", refit),
        ];
        if let Some(a) = alpha {
            out.push(("alpha", format!("{a:?}")));
        }
        out.extend([
            ("max-iters", self.max_iters.to_string()),
            ("tol", format!("{:?}", self.rel_tol)),
            ("normalize-columns", self.normalize_columns.to_string()),
        ]);
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

/// Result of the selection stage before any refit.
struct Selection {
    support: ModelSupport,
    coefficients: CoefficientMatrix,
    warnings: Vec<String>,
}

fn greedy_warnings(fit: &GreedyFit, task: Option<usize>) -> Vec<String> {
    let prefix = task.map_or(String::new(), |l| format!("task {l}: "));
    let mut w: Vec<String> = fit.warnings.iter().map(|m| format!("{prefix}{m}")).collect();
    if fit.stop == StopReason::Exhausted {
        w.push(format!(
            "{prefix}selection stopped at {} features: no admissible candidate left",
            fit.support.len()
        ));
    }
    w
}

fn convex_warning(fit: &ConvexFit, lambda: f64, task: Option<usize>) -> Option<String> {
    (!fit.converged).then(|| {
        let prefix = task.map_or(String::new(), |l| format!("task {l}: "));
        format!(
            "{prefix}solver did not converge within {} iterations at lambda {lambda:?}",
            fit.iterations_used
        )
    })
}

/// Runs `solve` down the lambda grid until the support reaches the budget.
fn lambda_search<F>(cfg: &TrainConfig, lambda_max: f64, mut solve: F) -> Result<(ConvexFit, f64, Option<String>)>
where
    F: FnMut(f64) -> Result<(ConvexFit, usize)>,
{
    if let Some(l) = cfg.lambda {
        let (fit, _) = solve(l)?;
        return Ok((fit, l, None));
    }
    if lambda_max <= 0.0 {
        let (fit, _) = solve(1.0)?;
        return Ok((fit, 1.0, Some("targets are constant; the penalized fit is zero".into())));
    }
    let mut lambda = lambda_max;
    let mut last = None;
    for _ in 0..cfg.lambda_steps {
        lambda *= cfg.lambda_ratio;
        let (fit, size) = solve(lambda)?;
        if size >= cfg.budget {
            return Ok((fit, lambda, None));
        }
        last = Some((fit, size));
    }
    let (fit, size) = last.expect("at least one grid step");
    Ok((
        fit,
        lambda,
        Some(format!(
            "lambda grid ended at {lambda:?} with {size} of {} features",
            cfg.budget
        )),
    ))
}

fn select(x: &DataMatrix, y: &IndicatorResponse, cfg: &TrainConfig) -> Result<Selection> {
    let n_tasks = y.n_tasks();
    match cfg.method {
        Method::MtlSomp => {
            let fit = somp(x, y, &cfg.greedy())?;
            Ok(Selection {
                warnings: greedy_warnings(&fit, None),
                support: ModelSupport::Shared(fit.support),
                coefficients: fit.coefficients,
            })
        }
        Method::StlOmp => {
            cfg.greedy().validate(x.rows(), x.cols())?;
            let fits: Vec<GreedyFit> = (0..n_tasks)
                .into_par_iter()
                .map(|l| omp(x, y.column(l), &cfg.greedy()))
                .collect::<Result<_>>()?;
            let mut w = Array2::zeros((x.cols(), n_tasks));
            let mut b = Array1::zeros(n_tasks);
            let mut warnings = Vec::new();
            let mut supports = Vec::with_capacity(n_tasks);
            for (l, fit) in fits.into_iter().enumerate() {
                w.column_mut(l).assign(&fit.coefficients.task(0));
                b[l] = fit.coefficients.biases()[0];
                warnings.extend(greedy_warnings(&fit, Some(l)));
                supports.push(fit.support);
            }
            Ok(Selection {
                support: ModelSupport::PerTask(supports),
                coefficients: CoefficientMatrix::new(w, b)?,
                warnings,
            })
        }
        Method::MtlGroup => {
            let lmax = group_lambda_max(x, y, cfg.q)?;
            let (fit, lambda, note) = lambda_search(cfg, lmax, |lambda| {
                let fit = group_solver(x, y, &cfg.convex(lambda))?;
                let size = extract_support(&fit.coefficients, cfg.q, None).len();
                Ok((fit, size))
            })?;
            let support = extract_support(&fit.coefficients, cfg.q, Some(cfg.budget));
            let mut warnings: Vec<String> = note.into_iter().collect();
            warnings.extend(convex_warning(&fit, lambda, None));
            Ok(Selection {
                coefficients: restrict_to_support(&fit.coefficients, &support),
                support: ModelSupport::Shared(support),
                warnings,
            })
        }
        Method::StlLasso => {
            let weights = y.task_weights();
            let per_task: Vec<(Array1<f64>, f64, SupportSet, Vec<String>)> = (0..n_tasks)
                .into_par_iter()
                .map(|l| {
                    let lmax = weights[l] * lasso_lambda_max(x, y.column(l))?;
                    let (fit, lambda, note) = lambda_search(cfg, lmax, |lambda| {
                        let fit = weighted_lasso(x, y.column(l), weights[l], &cfg.convex(lambda))?;
                        let size = fit.coefficients.task(0).iter().filter(|v| **v != 0.0).count();
                        Ok((fit, size))
                    })?;
                    let support = extract_support(&fit.coefficients, RowNorm::Linf, Some(cfg.budget));
                    let kept = restrict_to_support(&fit.coefficients, &support);
                    let mut warnings: Vec<String> = note.into_iter().map(|n| format!("task {l}: {n}")).collect();
                    warnings.extend(convex_warning(&fit, lambda, Some(l)));
                    Ok((kept.task(0).to_owned(), kept.biases()[0], support, warnings))
                })
                .collect::<Result<_>>()?;
            let mut w = Array2::zeros((x.cols(), n_tasks));
            let mut b = Array1::zeros(n_tasks);
            let mut supports = Vec::with_capacity(n_tasks);
            let mut warnings = Vec::new();
            for (l, (c, bias, s, warn)) in per_task.into_iter().enumerate() {
                w.column_mut(l).assign(&c);
                b[l] = bias;
                supports.push(s);
                warnings.extend(warn);
            }
            Ok(Selection {
                support: ModelSupport::PerTask(supports),
                coefficients: CoefficientMatrix::new(w, b)?,
                warnings,
            })
        }
    }
}

fn refit(x: &DataMatrix, y: &IndicatorResponse, sel: &Selection, alpha: f64) -> Result<CoefficientMatrix> {
    match &sel.support {
        ModelSupport::Shared(s) if s.is_empty() => Ok(sel.coefficients.clone()),
        ModelSupport::Shared(s) => ridge_refit(x, y, s, alpha),
        ModelSupport::PerTask(supports) => {
            let mut w = Array2::zeros((x.cols(), y.n_tasks()));
            let mut b = sel.coefficients.biases().to_owned();
            for (l, s) in supports.iter().enumerate() {
                if s.is_empty() {
                    continue;
                }
                let target = y.column(l).insert_axis(Axis(1));
                let c = ridge_refit_targets(x, target, s, alpha)?;
                w.column_mut(l).assign(&c.task(0));
                b[l] = c.biases()[0];
            }
            CoefficientMatrix::new(w, b)
        }
    }
}

/// Selects features with the configured method and optionally refits the
/// weights by ridge regression on the selected support.
pub fn train(x: &DataMatrix, y: &IndicatorResponse, cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    if x.rows() != y.n_samples() {
        return Err(Error::DimensionMismatch {
            what: "label count",
            expected: x.rows(),
            got: y.n_samples(),
        });
    }
    let sel = select(x, y, cfg)?;
    let coefficients = match cfg.refit {
        Refit::None => sel.coefficients.clone(),
        Refit::Ridge(alpha) => refit(x, y, &sel, alpha)?,
    };
    let model = Model {
        method: cfg.method.name().to_string(),
        config: cfg.echo(),
        warnings: sel.warnings,
        support: sel.support,
        coefficients,
    };
    model.validate()?;
    Ok(model)
}

/// `M x L` verification scores, using only the stored support rows.
pub fn score(model: &Model, x: &DataMatrix) -> Result<Array2<f64>> {
    let c = &model.coefficients;
    if c.n_features() != x.cols() {
        return Err(Error::DimensionMismatch {
            what: "feature count of test data",
            expected: c.n_features(),
            got: x.cols(),
        });
    }
    let rows = model.support.union();
    let mut w = Array2::zeros((c.n_features(), c.n_tasks()));
    for &i in &rows {
        w.row_mut(i).assign(&c.feature(i));
    }
    predict(x, &CoefficientMatrix::new(w, c.biases().to_owned())?)
}

/// Per-person ROC analysis of `model` on labelled test data.
pub fn evaluate(model: &Model, x: &DataMatrix, labels: &[usize], grid_step: f64) -> Result<ProtocolSummary> {
    let scores = score(model, x)?;
    let curves = per_person_curves(scores.view(), labels)?;
    average_protocol(&curves, grid_step)
}
