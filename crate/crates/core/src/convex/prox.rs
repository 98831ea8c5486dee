//! Projection and proximal operators for the row penalties.

use ndarray::{Array1, ArrayView1};

/// Euclidean projection of `v` onto the l1 ball of radius `r`.
///
/// Sorting-based threshold search: finds `theta` with
/// `sum_i max(|v_i| - theta, 0) = r` and soft-thresholds by it.
pub fn project_l1_ball(v: ArrayView1<f64>, r: f64) -> Array1<f64> {
    let r = r.max(0.0);
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= r {
        return v.to_owned();
    }
    if r == 0.0 {
        return Array1::zeros(v.len());
    }
    let mut theta = l1_threshold(v, r);
    let mut p = shrink(v, theta);
    // Rounding in the threshold can leave the result a few ulps outside the
    // ball; nudge theta upward until it is inside.
    for _ in 0..8 {
        let s: f64 = p.iter().map(|x| x.abs()).sum();
        if s <= r {
            break;
        }
        let active = p.iter().filter(|x| **x != 0.0).count().max(1);
        let bumped = theta + (s - r) / active as f64;
        theta = if bumped > theta { bumped } else { theta.next_up() };
        p = shrink(v, theta);
    }
    p
}

fn shrink(v: ArrayView1<f64>, theta: f64) -> Array1<f64> {
    v.mapv(|x| x.signum() * (x.abs() - theta).max(0.0))
}

fn l1_threshold(v: ArrayView1<f64>, r: f64) -> f64 {
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - r) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        } else {
            break;
        }
    }
    theta.max(0.0)
}

/// `argmin_u 1/2 ||u - v||^2 + t ||u||_inf`, via the Moreau decomposition
/// `v - P_{t B_1}(v)`.
pub fn prox_row_linf(v: ArrayView1<f64>, t: f64) -> Array1<f64> {
    &v - &project_l1_ball(v, t)
}

/// `argmin_u 1/2 ||u - v||^2 + t ||u||_2` (block soft-thresholding).
pub fn prox_row_l2(v: ArrayView1<f64>, t: f64) -> Array1<f64> {
    let n = v.dot(&v).sqrt();
    if n <= t {
        Array1::zeros(v.len())
    } else {
        v.mapv(|x| x * (1.0 - t / n))
    }
}

/// Scalar soft-thresholding `sign(x) max(|x| - t, 0)`.
pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}
