use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{center_columns, cholesky_solve};
use crate::linear_model::{CoefficientMatrix, DataMatrix, IndicatorResponse, SupportSet};

/// Re-estimates the weights of a fixed support by ridge regression, one
/// task per indicator column. Rows outside the support are zero.
pub fn ridge_refit(
    x: &DataMatrix,
    y: &IndicatorResponse,
    support: &SupportSet,
    alpha: f64,
) -> Result<CoefficientMatrix> {
    check_dim("response rows", x.rows(), y.n_samples())?;
    ridge_refit_targets(x, y.matrix(), support, alpha)
}

/// Ridge refit against arbitrary real targets (`N x L`).
pub fn ridge_refit_targets(
    x: &DataMatrix,
    targets: ArrayView2<f64>,
    support: &SupportSet,
    alpha: f64,
) -> Result<CoefficientMatrix> {
    check_dim("target rows", x.rows(), targets.nrows())?;
    if support.is_empty() {
        return Err(Error::invalid("ridge refit needs a non-empty support"));
    }
    support.check_bound(x.cols())?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::config(format!("ridge alpha must be positive, got {alpha}")));
    }
    // Work on the sorted support so the result depends only on the set.
    let cols = support.sorted();
    let (xs, x_means) = center_columns(x.select_columns(&cols).view());
    let y_means = targets.mean_axis(Axis(0)).expect("non-empty targets");
    let tc = &targets - &y_means;

    let mut gram = xs.t().dot(&xs);
    for i in 0..cols.len() {
        gram[[i, i]] += alpha;
    }
    let rhs = xs.t().dot(&tc);
    let sol = cholesky_solve(gram.view(), rhs.view())?;

    let mut weights = Array2::zeros((x.cols(), targets.ncols()));
    for (k, &j) in cols.iter().enumerate() {
        weights.row_mut(j).assign(&sol.row(k));
    }
    let biases: Array1<f64> = &y_means - &x_means.dot(&sol);
    CoefficientMatrix::new(weights, biases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear_model::build_indicator;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    use rand_pcg::Pcg64;

    fn setup(seed: u64) -> (DataMatrix, IndicatorResponse) {
        let mut rng = Pcg64::seed_from_u64(seed);
        let x = DataMatrix::new(Array2::from_shape_fn((30, 12), |_| rng.sample(StandardNormal))).unwrap();
        let labels: Vec<Option<usize>> = (0..30).map(|i| if i % 3 == 2 { None } else { Some(i % 3) }).collect();
        (x, build_indicator(&labels, 2).unwrap())
    }

    #[test]
    fn large_alpha_shrinks_to_means() {
        let (x, y) = setup(41);
        let s = SupportSet::new(vec![1, 4, 9]).unwrap();
        let c = ridge_refit(&x, &y, &s, 1e12).unwrap();
        assert!(c.weights().iter().all(|v| v.abs() < 1e-9));
        for l in 0..2 {
            assert!((c.biases()[l] - y.column(l).mean().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn small_alpha_matches_least_squares() {
        let (x, y) = setup(42);
        let s = SupportSet::new(vec![0, 5, 7, 8]).unwrap();
        let c = ridge_refit(&x, &y, &s, 1e-10).unwrap();
        // least squares with intercept through the normal equations of [1, X_S]
        let xs = x.select_columns(&s.sorted());
        let mut a = Array2::ones((30, 5));
        a.slice_mut(ndarray::s![.., 1..]).assign(&xs);
        let g = a.t().dot(&a);
        let b = a.t().dot(&y.matrix());
        let ls = cholesky_solve(g.view(), b.view()).unwrap();
        for l in 0..2 {
            assert!((c.biases()[l] - ls[[0, l]]).abs() < 1e-6);
            for (k, &j) in s.sorted().iter().enumerate() {
                assert!((c.task(l)[j] - ls[[k + 1, l]]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn normal_equation_residual_is_small() {
        let (x, y) = setup(43);
        let s = SupportSet::new(vec![11, 3, 6]).unwrap();
        let alpha = 1.0;
        let c = ridge_refit(&x, &y, &s, alpha).unwrap();
        let (xs, _) = center_columns(x.select_columns(&s.sorted()).view());
        let ym = y.matrix().mean_axis(Axis(0)).unwrap();
        let tc = &y.matrix() - &ym;
        for l in 0..2 {
            let cs: Array1<f64> = s.sorted().iter().map(|&j| c.task(l)[j]).collect();
            let lhs = xs.t().dot(&xs.dot(&cs)) + &cs * alpha;
            let rhs = xs.t().dot(&tc.column(l));
            let res = (&lhs - &rhs).mapv(|v| v * v).sum().sqrt();
            assert!(res <= 1e-8 * rhs.mapv(|v| v * v).sum().sqrt());
        }
        let off: Vec<usize> = (0..12).filter(|j| !s.contains(*j)).collect();
        for j in off {
            assert_eq!(c.feature(j).iter().filter(|v| **v != 0.0).count(), 0);
        }
    }

    #[test]
    fn support_order_does_not_matter() {
        let (x, y) = setup(44);
        let a = ridge_refit(&x, &y, &SupportSet::new(vec![2, 9, 5]).unwrap(), 0.5).unwrap();
        let b = ridge_refit(&x, &y, &SupportSet::new(vec![9, 5, 2]).unwrap(), 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let (x, y) = setup(45);
        assert!(ridge_refit(&x, &y, &SupportSet::empty(), 1.0).is_err());
        assert!(ridge_refit(&x, &y, &SupportSet::new(vec![1]).unwrap(), 0.0).is_err());
        assert!(ridge_refit(&x, &y, &SupportSet::new(vec![12]).unwrap(), 1.0).is_err());
    }
}
