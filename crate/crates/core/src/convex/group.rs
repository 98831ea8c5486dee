use ndarray::{Array2, ArrayView2, Axis};

use super::{relative_change, CenteredDesign, ConvexConfig, ConvexFit, RowNorm, StepRule};
use crate::error::{check_dim, Error, Result};
use crate::linalg::spectral_norm_estimate;
use crate::linear_model::{CoefficientMatrix, DataMatrix, IndicatorResponse};

const POWER_ITERATIONS: usize = 50;
/// Inflation of the power-iteration estimate, which approaches the top
/// singular value from below.
const FIXED_STEP_MARGIN: f64 = 1.01;

/// `min_{C,b} sum_l (1/N_l) Err(c_l, b_l) + lambda ||C||_{1,q}` by
/// accelerated proximal gradient with function-value restarts.
pub fn group_solver(x: &DataMatrix, y: &IndicatorResponse, cfg: &ConvexConfig) -> Result<ConvexFit> {
    check_dim("response rows", x.rows(), y.n_samples())?;
    group_solver_weighted(x, y.matrix(), &y.task_weights(), cfg)
}

/// Group solver on arbitrary real targets with explicit task weights.
pub fn group_solver_weighted(
    x: &DataMatrix,
    targets: ArrayView2<f64>,
    weights: &[f64],
    cfg: &ConvexConfig,
) -> Result<ConvexFit> {
    cfg.validate()?;
    check_dim("target rows", x.rows(), targets.nrows())?;
    check_dim("task weights", targets.ncols(), weights.len())?;
    if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid("task weights must be positive and finite"));
    }
    let design = CenteredDesign::new(x);
    let y_means = targets.mean_axis(Axis(0)).expect("non-empty targets");
    let tc = &targets - &y_means;
    let problem = Problem {
        xc: &design.xc,
        tc: &tc,
        weights,
        lambda: cfg.lambda,
        q: cfg.q,
    };

    let (d, l) = (x.cols(), targets.ncols());
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    let mut lipschitz = match cfg.step_rule {
        StepRule::Fixed => {
            let s = spectral_norm_estimate(design.xc.view(), POWER_ITERATIONS);
            2.0 * s * s * wmax * FIXED_STEP_MARGIN
        }
        StepRule::Backtracking => {
            // Largest Hessian diagonal entry: a lower bound on the constant.
            let col_sq = design
                .xc
                .columns()
                .into_iter()
                .map(|c| c.dot(&c))
                .fold(0.0, f64::max);
            2.0 * wmax * col_sq
        }
    };
    if lipschitz <= 0.0 {
        // All-constant dictionary: the loss does not depend on C.
        lipschitz = 1.0;
    }

    let mut current = Array2::<f64>::zeros((d, l));
    let mut f_current = problem.objective(&current);
    let mut extrapolated = current.clone();
    let mut momentum = 1.0f64;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let (mut next, mut f_next) = problem.prox_step(&extrapolated, &mut lipschitz, cfg.step_rule);
        if f_next > f_current {
            // Momentum overshoot: restart from the current iterate.
            momentum = 1.0;
            let step = problem.prox_step(&current, &mut lipschitz, cfg.step_rule);
            next = step.0;
            f_next = step.1;
            if f_next > f_current {
                next = current.clone();
                f_next = f_current;
            }
        }
        let momentum_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        extrapolated = &next + &((&next - &current) * ((momentum - 1.0) / momentum_next));
        momentum = momentum_next;

        let rel = relative_change(f_current, f_next);
        current = next;
        f_current = f_next;
        trace.push(f_current);
        if rel < cfg.rel_tol {
            converged = true;
            break;
        }
    }

    let biases = design.biases(y_means.view(), current.view());
    Ok(ConvexFit {
        coefficients: CoefficientMatrix::new(current, biases)?,
        objective_trace: trace,
        converged,
        iterations_used: iterations,
    })
}

/// Smallest `lambda` with an all-zero solution: the largest dual row norm
/// of the loss gradient at `C = 0` (l1 for `q = inf`, l2 for `q = 2`).
pub fn group_lambda_max(x: &DataMatrix, y: &IndicatorResponse, q: RowNorm) -> Result<f64> {
    check_dim("response rows", x.rows(), y.n_samples())?;
    let design = CenteredDesign::new(x);
    let y_means = y.matrix().mean_axis(Axis(0)).expect("non-empty response");
    let tc = &y.matrix() - &y_means;
    let weights = y.task_weights();
    let problem = Problem {
        xc: &design.xc,
        tc: &tc,
        weights: &weights,
        lambda: 1.0,
        q,
    };
    let (g, _) = problem.gradient(&Array2::zeros((x.cols(), y.n_tasks())));
    Ok(g.rows()
        .into_iter()
        .map(|row| q.dual_norm(row))
        .fold(0.0, f64::max))
}

/// Objective of the group program for given coefficients, evaluated on the
/// raw data (biases included).
pub fn group_objective(
    x: &DataMatrix,
    y: &IndicatorResponse,
    coef: &CoefficientMatrix,
    lambda: f64,
    q: RowNorm,
) -> Result<f64> {
    let loss = crate::linear_model::multitask_loss(x, y, coef)?;
    let penalty: f64 = (0..coef.n_features()).map(|i| q.norm(coef.feature(i))).sum();
    Ok(loss + lambda * penalty)
}

struct Problem<'a> {
    xc: &'a Array2<f64>,
    tc: &'a Array2<f64>,
    weights: &'a [f64],
    lambda: f64,
    q: RowNorm,
}

impl Problem<'_> {
    fn residual(&self, c: &Array2<f64>) -> Array2<f64> {
        self.tc - &self.xc.dot(c)
    }

    fn smooth_from_residual(&self, r: &Array2<f64>) -> f64 {
        r.columns()
            .into_iter()
            .zip(self.weights)
            .map(|(col, w)| w * col.dot(&col))
            .sum()
    }

    fn penalty(&self, c: &Array2<f64>) -> f64 {
        c.rows().into_iter().map(|row| self.q.norm(row)).sum()
    }

    fn objective(&self, c: &Array2<f64>) -> f64 {
        self.smooth_from_residual(&self.residual(c)) + self.lambda * self.penalty(c)
    }

    /// Gradient of the weighted loss and the loss value.
    fn gradient(&self, c: &Array2<f64>) -> (Array2<f64>, f64) {
        let r = self.residual(c);
        let f = self.smooth_from_residual(&r);
        let mut g = self.xc.t().dot(&r);
        for (mut col, &w) in g.columns_mut().into_iter().zip(self.weights) {
            col *= -2.0 * w;
        }
        (g, f)
    }

    fn prox(&self, v: &Array2<f64>, t: f64) -> Array2<f64> {
        let mut out = Array2::zeros(v.raw_dim());
        for (mut o, row) in out.rows_mut().into_iter().zip(v.rows()) {
            o.assign(&self.q.prox(row, t));
        }
        out
    }

    /// One proximal gradient step from `at`, growing the Lipschitz estimate
    /// until the quadratic upper bound holds when backtracking.
    fn prox_step(&self, at: &Array2<f64>, lipschitz: &mut f64, rule: StepRule) -> (Array2<f64>, f64) {
        let (g, f_at) = self.gradient(at);
        loop {
            let step = 1.0 / *lipschitz;
            let z = self.prox(&(at - &(&g * step)), self.lambda * step);
            let f_z = self.smooth_from_residual(&self.residual(&z));
            let diff = &z - at;
            let bound = f_at + (&g * &diff).sum() + 0.5 * *lipschitz * diff.mapv(|v| v * v).sum();
            let tol = 1e-12 * f_at.abs().max(1.0);
            if rule == StepRule::Fixed || f_z <= bound + tol || !lipschitz.is_finite() {
                return (z.clone(), f_z + self.lambda * self.penalty(&z));
            }
            *lipschitz *= 2.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::{extract_support, lasso, solve_all_single_task, weighted_lasso};
    use crate::linear_model::build_indicator;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    use rand_pcg::Pcg64;

    fn problem(seed: u64, n: usize, d: usize, l: usize) -> (DataMatrix, IndicatorResponse) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let x = DataMatrix::new(Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal))).unwrap();
        let labels: Vec<Option<usize>> = (0..n)
            .map(|i| if i % (l + 1) == l { None } else { Some(i % (l + 1)) })
            .collect();
        (x, build_indicator(&labels, l).unwrap())
    }

    #[test]
    fn above_threshold_is_zero() {
        let (x, y) = problem(31, 30, 6, 3);
        for q in [RowNorm::Linf, RowNorm::L2] {
            let lmax = group_lambda_max(&x, &y, q).unwrap();
            let mut cfg = ConvexConfig::new(lmax * 1.0001);
            cfg.q = q;
            let fit = group_solver(&x, &y, &cfg).unwrap();
            assert!(fit.coefficients.weights().iter().all(|&v| v == 0.0));
            cfg.lambda = 0.8 * lmax;
            let fit = group_solver(&x, &y, &cfg).unwrap();
            assert!(fit.coefficients.weights().iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn single_task_reduces_to_weighted_lasso() {
        let (x, y) = problem(32, 30, 5, 1);
        let mut cfg = ConvexConfig::new(0.02);
        cfg.rel_tol = 1e-15;
        cfg.max_iters = 200_000;
        let g = group_solver(&x, &y, &cfg).unwrap();
        let w = 1.0 / y.class_counts()[0] as f64;
        let l = weighted_lasso(&x, y.column(0), w, &cfg).unwrap();
        for j in 0..5 {
            assert!(
                (g.coefficients.task(0)[j] - l.coefficients.task(0)[j]).abs() <= 1e-8,
                "{} vs {}",
                g.coefficients.task(0),
                l.coefficients.task(0)
            );
        }
        // plain lasso with the rescaled penalty agrees too
        let p = lasso(&x, y.column(0), &ConvexConfig::new(0.02 / w)).unwrap();
        let diff = &p.coefficients.task(0) - &l.coefficients.task(0);
        assert!(diff.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn matches_long_run_reference() {
        for (seed, q) in [(33, RowNorm::Linf), (34, RowNorm::L2)] {
            let (x, y) = problem(seed, 30, 4, 2);
            let lam = 0.3 * group_lambda_max(&x, &y, q).unwrap();
            let mut cfg = ConvexConfig::new(lam);
            cfg.q = q;
            cfg.rel_tol = 1e-10;
            cfg.max_iters = 5_000;
            let fit = group_solver(&x, &y, &cfg).unwrap();
            let mut long = cfg.clone();
            long.rel_tol = 1e-11;
            long.max_iters = 50_000;
            let reference = group_solver(&x, &y, &long).unwrap();
            let a = group_objective(&x, &y, &fit.coefficients, lam, q).unwrap();
            let b = group_objective(&x, &y, &reference.coefficients, lam, q).unwrap();
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            assert!((a - fit.objective_trace.last().unwrap()).abs() <= 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn fixed_step_agrees_with_backtracking() {
        let (x, y) = problem(35, 40, 8, 3);
        let lam = 0.2 * group_lambda_max(&x, &y, RowNorm::Linf).unwrap();
        let mut cfg = ConvexConfig::new(lam);
        cfg.rel_tol = 1e-13;
        let bt = group_solver(&x, &y, &cfg).unwrap();
        cfg.step_rule = StepRule::Fixed;
        let fx = group_solver(&x, &y, &cfg).unwrap();
        let a = bt.objective_trace.last().unwrap();
        let b = fx.objective_trace.last().unwrap();
        assert!((a - b).abs() <= 1e-8 * a.max(1.0));
        for t in [&bt.objective_trace, &fx.objective_trace] {
            for w in t.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
        }
    }

    #[test]
    fn linf_rows_share_their_maximum() {
        // Shared-support data: every task depends on the same three rows.
        let mut rng = Pcg64::seed_from_u64(36);
        let (n, d, l) = (60, 20, 4);
        let xa = Array2::from_shape_fn((n, d), |_| rng.sample(StandardNormal));
        let mut c = Array2::zeros((d, l));
        for &i in &[2usize, 7, 11] {
            for t in 0..l {
                c[[i, t]] = rng.random_range(1.0..2.0);
            }
        }
        let targets = xa.dot(&c) + Array2::from_shape_fn((n, l), |_| 0.1 * rng.sample::<f64, _>(StandardNormal));
        let x = DataMatrix::new(xa).unwrap();
        let w = vec![0.1; l];
        let mut cfg = ConvexConfig::new(2.0);
        cfg.rel_tol = 1e-12;
        let group = group_solver_weighted(&x, targets.view(), &w, &cfg).unwrap();
        let tie_rows = |coef: &CoefficientMatrix| {
            (0..d)
                .filter(|&i| {
                    let row = coef.feature(i);
                    let m = row.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    m > 1e-6 && row.iter().filter(|v| (v.abs() - m).abs() <= 1e-6 * m.max(1.0)).count() >= 2
                })
                .count()
        };
        // independent per-task lasso at the matching per-task penalty
        let mut single = Array2::zeros((d, l));
        for (t, &wt) in w.iter().enumerate() {
            let fit = weighted_lasso(&x, targets.column(t), wt, &ConvexConfig::new(2.0 / l as f64)).unwrap();
            single.column_mut(t).assign(&fit.coefficients.task(0));
        }
        let single = CoefficientMatrix::new(single, ndarray::Array1::zeros(l)).unwrap();
        assert!(tie_rows(&group.coefficients) > tie_rows(&single));
        let s = extract_support(&group.coefficients, RowNorm::Linf, None);
        assert_eq!(s.sorted(), vec![2, 7, 11]);
    }

    #[test]
    fn single_task_path_and_group_path_share_loss_scaling() {
        let (x, y) = problem(37, 25, 6, 2);
        let cfg = ConvexConfig::new(1e3);
        let a = solve_all_single_task(&x, &y, &cfg).unwrap();
        let b = group_solver(&x, &y, &cfg).unwrap();
        // both all-zero at a huge penalty: objective equals the loss at zero
        let z = group_objective(&x, &y, &b.coefficients, 1e3, RowNorm::Linf).unwrap();
        assert!((a.objective_trace.last().unwrap() - z).abs() <= 1e-12 * z);
    }
}
