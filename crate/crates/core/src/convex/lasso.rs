use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;

use super::prox::soft_threshold;
use super::{relative_change, CenteredDesign, ConvexConfig, ConvexFit};
use crate::error::{check_dim, Result};
use crate::linear_model::{CoefficientMatrix, DataMatrix, IndicatorResponse};

/// Stationarity slack, relative to the penalty, required before a solve is
/// declared converged.
const KKT_SLACK: f64 = 1e-7;

/// `min_{c,b} ||y - X c - b 1||^2 + lambda ||c||_1` by cyclic coordinate
/// descent on centered data.
pub fn lasso(x: &DataMatrix, y: ArrayView1<f64>, cfg: &ConvexConfig) -> Result<ConvexFit> {
    weighted_lasso(x, y, 1.0, cfg)
}

/// `min_{c,b} weight ||y - X c - b 1||^2 + lambda ||c||_1`.
pub fn weighted_lasso(
    x: &DataMatrix,
    y: ArrayView1<f64>,
    weight: f64,
    cfg: &ConvexConfig,
) -> Result<ConvexFit> {
    cfg.validate()?;
    check_dim("target length", x.rows(), y.len())?;
    let design = CenteredDesign::new(x);
    let xt = design.xc.t().as_standard_layout().into_owned();
    let sol = solve_centered(&xt, y, weight, cfg);
    let y_mean = y.mean().expect("non-empty target");
    let w = sol.c.insert_axis(Axis(1));
    let b = design.biases(Array1::from_elem(1, y_mean).view(), w.view());
    Ok(ConvexFit {
        coefficients: CoefficientMatrix::new(w, b)?,
        objective_trace: sol.trace,
        converged: sol.converged,
        iterations_used: sol.iterations,
    })
}

/// Smallest `lambda` for which the LASSO solution is exactly zero:
/// `2 max_j |x~_j . (y - mean(y))|`.
pub fn lasso_lambda_max(x: &DataMatrix, y: ArrayView1<f64>) -> Result<f64> {
    check_dim("target length", x.rows(), y.len())?;
    let design = CenteredDesign::new(x);
    let xt = design.xc.t().as_standard_layout().into_owned();
    let ym = y.mean().expect("non-empty target");
    let yc = y.mapv(|v| v - ym);
    Ok(xt
        .rows()
        .into_iter()
        .fold(0.0f64, |m, xj| m.max(2.0 * xj.dot(&yc).abs())))
}

/// Solves the summed single-task objective as independent LASSO problems,
/// task `l` weighted by `1/N_l` and all sharing `lambda`.
pub fn solve_all_single_task(
    x: &DataMatrix,
    y: &IndicatorResponse,
    cfg: &ConvexConfig,
) -> Result<ConvexFit> {
    cfg.validate()?;
    check_dim("response rows", x.rows(), y.n_samples())?;
    let design = CenteredDesign::new(x);
    let xt = design.xc.t().as_standard_layout().into_owned();
    let weights = y.task_weights();
    let solutions: Vec<Solution> = (0..y.n_tasks())
        .into_par_iter()
        .map(|l| solve_centered(&xt, y.column(l), weights[l], cfg))
        .collect();

    let iterations = solutions.iter().map(|s| s.iterations).max().unwrap_or(0);
    let mut trace = vec![0.0; iterations];
    let mut w = Array2::zeros((x.cols(), y.n_tasks()));
    for (l, sol) in solutions.iter().enumerate() {
        w.column_mut(l).assign(&sol.c);
        let last = *sol.trace.last().unwrap_or(&0.0);
        for (t, v) in trace.iter_mut().enumerate() {
            *v += sol.trace.get(t).copied().unwrap_or(last);
        }
    }
    let y_means = y.matrix().mean_axis(Axis(0)).expect("non-empty response");
    let b = design.biases(y_means.view(), w.view());
    Ok(ConvexFit {
        coefficients: CoefficientMatrix::new(w, b)?,
        objective_trace: trace,
        converged: solutions.iter().all(|s| s.converged),
        iterations_used: iterations,
    })
}

struct Solution {
    c: Array1<f64>,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
}

/// Coordinate descent; `xt` holds the centered columns as rows.
fn solve_centered(
    xt: &Array2<f64>,
    y: ArrayView1<f64>,
    weight: f64,
    cfg: &ConvexConfig,
) -> Solution {
    let d = xt.nrows();
    let ym = y.mean().expect("non-empty target");
    let yc = y.mapv(|v| v - ym);
    let sq: Vec<f64> = xt.rows().into_iter().map(|xj| xj.dot(&xj)).collect();
    // Penalty on the unweighted squared error.
    let lam = cfg.lambda / weight;
    let half = 0.5 * lam;

    let objective = |r: &Array1<f64>, c: &Array1<f64>| {
        weight * r.dot(r) + cfg.lambda * c.iter().map(|v| v.abs()).sum::<f64>()
    };

    let mut c = Array1::<f64>::zeros(d);
    let mut r = yc.clone();
    let mut prev = objective(&r, &c);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        for j in 0..d {
            if sq[j] == 0.0 {
                continue;
            }
            let xj = xt.row(j);
            let rho = xj.dot(&r) + sq[j] * c[j];
            let updated = soft_threshold(rho, half) / sq[j];
            let delta = updated - c[j];
            if delta != 0.0 {
                r.scaled_add(-delta, &xj);
                c[j] = updated;
            }
        }
        let cur = objective(&r, &c);
        trace.push(cur);
        let rel = relative_change(prev, cur);
        prev = cur;
        if rel < cfg.rel_tol {
            // Refresh the residual to shed accumulated update error, then
            // require the stationarity certificate before stopping.
            r = &yc - &xt.t().dot(&c);
            if kkt_violation(xt, &r, &c, lam) <= KKT_SLACK * lam {
                converged = true;
                break;
            }
        }
    }
    Solution {
        c,
        trace,
        converged,
        iterations,
    }
}

/// Largest violation of the LASSO optimality conditions for
/// `||r||^2 + lam ||c||_1` with `r` the centered residual.
fn kkt_violation(xt: &Array2<f64>, r: &Array1<f64>, c: &Array1<f64>, lam: f64) -> f64 {
    xt.rows()
        .into_iter()
        .zip(c.iter())
        .map(|(xj, &cj)| {
            let g = 2.0 * xj.dot(r);
            if cj != 0.0 {
                (g - lam * cj.signum()).abs()
            } else {
                (g.abs() - lam).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}
