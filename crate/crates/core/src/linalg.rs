//! Small dense linear-algebra helpers used by the solvers.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Subtracts column means, returning the centered copy and the means.
pub fn center_columns(a: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let means = a
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(a.ncols()));
    let centered = &a - &means;
    (centered, means)
}

pub fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.dot(&b)
}

pub fn norm2(a: ArrayView1<f64>) -> f64 {
    a.dot(&a).sqrt()
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
pub fn cholesky_solve(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch {
            what: "cholesky system",
            expected: n,
            got: b.nrows(),
        });
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !diag.is_finite() || diag <= 0.0 {
            return Err(Error::Numerical(format!(
                "matrix not positive definite at pivot {j} ({diag})"
            )));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    let mut x = b.to_owned();
    for mut col in x.columns_mut() {
        // forward: L z = b
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= l[[i, k]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
        // backward: L^T x = z
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= l[[k, i]] * col[k];
            }
            col[i] = s / l[[i, i]];
        }
    }
    Ok(x)
}

/// Estimates the largest singular value of `a` by power iteration on `a^T a`.
pub fn spectral_norm_estimate(a: ArrayView2<f64>, iterations: usize) -> f64 {
    let d = a.ncols();
    if d == 0 || a.nrows() == 0 {
        return 0.0;
    }
    // Deterministic, non-degenerate start vector.
    let mut v = Array1::from_shape_fn(d, |j| 1.0 + (j % 7) as f64 * 0.1);
    let n0 = norm2(v.view());
    v /= n0;
    let mut sigma = 0.0;
    for _ in 0..iterations {
        let av = a.dot(&v);
        let w = a.t().dot(&av);
        let nw = norm2(w.view());
        if nw == 0.0 {
            return 0.0;
        }
        sigma = nw.sqrt();
        v = w / nw;
    }
    sigma
}
