//! Verification scoring: ROC curves with grouped ties, AUC, TPR at a fixed
//! FPR, and averaging over per-person curves.

use std::io::Write;

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};

/// FPR at which the headline TPR is reported.
pub const REPORT_FPR: f64 = 0.1;
pub const DEFAULT_GRID_STEP: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, both coordinates non-decreasing.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

fn class_sizes(scores: &[f64], positive: &[bool]) -> Result<(usize, usize)> {
    check_dim("label count", scores.len(), positive.len())?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::invalid(format!("score {i} is NaN")));
    }
    let p = positive.iter().filter(|&&b| b).count();
    let q = positive.len() - p;
    if p == 0 || q == 0 {
        return Err(Error::invalid("ROC needs at least one positive and one negative"));
    }
    Ok((p, q))
}

/// Threshold sweep over the distinct scores in descending order; samples
/// sharing a score enter the curve together.
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Result<RocCurve> {
    let (p, q) = class_sizes(scores, positive)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    // twice the area in units of one (positive, negative) pair
    let mut area2 = 0u128;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += (fp - fp0) as u128 * (tp + tp0) as u128;
        points.push((fp as f64 / q as f64, tp as f64 / p as f64));
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2.0 * p as f64 * q as f64),
    })
}

/// Mann-Whitney estimate: the fraction of (positive, negative) pairs ranked
/// correctly, with ties counting one half.
pub fn auc_pairwise(scores: &[f64], positive: &[bool]) -> Result<f64> {
    let (p, q) = class_sizes(scores, positive)?;
    let mut twice = 0u128;
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            if si > sj {
                twice += 2;
            } else if si == sj {
                twice += 1;
            }
        }
    }
    Ok(twice as f64 / (2.0 * p as f64 * q as f64))
}

/// Trapezoidal area under a polyline of `(fpr, tpr)` points.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// TPR at `fpr` by linear interpolation. On a vertical segment the highest
/// TPR reached at that FPR is returned.
pub fn tpr_at_fpr(curve: &RocCurve, fpr: f64) -> f64 {
    let pts = &curve.points;
    let k = pts.partition_point(|&(x, _)| x <= fpr);
    if k == 0 {
        return pts[0].1;
    }
    let (x0, y0) = pts[k - 1];
    match pts.get(k) {
        Some(&(x1, y1)) if x1 > x0 => y0 + (y1 - y0) * (fpr - x0) / (x1 - x0),
        _ => y0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSummary {
    pub fpr_grid: Vec<f64>,
    pub tpr_mean: Vec<f64>,
    pub tpr_std: Vec<f64>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub tpr_at_report_mean: f64,
    pub tpr_at_report_std: f64,
    pub per_curve_auc: Vec<f64>,
    pub per_curve_tpr_at_report: Vec<f64>,
}

/// Evenly spaced FPR grid from 0 to 1 inclusive.
pub fn fpr_grid(step: f64) -> Result<Vec<f64>> {
    if !(step.is_finite() && step > 0.0 && step <= 1.0) {
        return Err(Error::config(format!("FPR grid step must lie in (0, 1], got {step}")));
    }
    let n = (1.0 / step).round().max(1.0) as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Averages per-person curves: pointwise TPR on the grid, and the mean and
/// sample standard deviation of per-person AUC and TPR at [`REPORT_FPR`].
pub fn average_protocol(curves: &[RocCurve], grid_step: f64) -> Result<ProtocolSummary> {
    if curves.is_empty() {
        return Err(Error::invalid("no ROC curves to average"));
    }
    let grid = fpr_grid(grid_step)?;
    let mut tpr_mean = Vec::with_capacity(grid.len());
    let mut tpr_std = Vec::with_capacity(grid.len());
    for &f in &grid {
        let at: Vec<f64> = curves.iter().map(|c| tpr_at_fpr(c, f)).collect();
        let (m, s) = mean_std(&at);
        tpr_mean.push(m);
        tpr_std.push(s);
    }
    let aucs: Vec<f64> = curves.iter().map(|c| c.auc).collect();
    let tprs: Vec<f64> = curves.iter().map(|c| tpr_at_fpr(c, REPORT_FPR)).collect();
    let (auc_mean, auc_std) = mean_std(&aucs);
    let (tpr_at_report_mean, tpr_at_report_std) = mean_std(&tprs);
    Ok(ProtocolSummary {
        fpr_grid: grid,
        tpr_mean,
        tpr_std,
        auc_mean,
        auc_std,
        tpr_at_report_mean,
        tpr_at_report_std,
        per_curve_auc: aucs,
        per_curve_tpr_at_report: tprs,
    })
}

/// One curve per person: column `l` of `scores` (`M x L`) ranks the test
/// samples, positives are those labelled `l`, negatives all others.
pub fn per_person_curves(scores: ArrayView2<f64>, labels: &[usize]) -> Result<Vec<RocCurve>> {
    check_dim("test labels", scores.nrows(), labels.len())?;
    if let Some(&l) = labels.iter().find(|&&l| l >= scores.ncols()) {
        return Err(Error::invalid(format!(
            "test label {l} outside the {} modelled classes",
            scores.ncols()
        )));
    }
    (0..scores.ncols())
        .into_par_iter()
        .map(|l| {
            let col = scores.column(l).to_vec();
            let pos: Vec<bool> = labels.iter().map(|&t| t == l).collect();
            roc_curve(&col, &pos).map_err(|e| Error::invalid(format!("person {l}: {e}")))
        })
        .collect()
}

pub fn write_roc_csv<W: Write>(mut w: W, s: &ProtocolSummary) -> Result<()> {
    writeln!(w, "fpr,tpr_mean,tpr_std")?;
    for ((f, m), sd) in s.fpr_grid.iter().zip(&s.tpr_mean).zip(&s.tpr_std) {
        writeln!(w, "{f},{m},{sd}")?;
    }
    w.flush()?;
    Ok(())
}

pub const SUMMARY_HEADER: &str = "method,tpr_at_0.1_mean,tpr_at_0.1_std,auc_mean,auc_std";

pub fn write_summary_csv<W: Write>(mut w: W, rows: &[(&str, &ProtocolSummary)]) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for (method, s) in rows {
        if method.contains([',', '\n', '"']) {
            return Err(Error::invalid(format!("method name {method:?} is not CSV-safe")));
        }
        writeln!(
            w,
            "{method},{},{},{},{}",
            s.tpr_at_report_mean, s.tpr_at_report_std, s.auc_mean, s.auc_std
        )?;
    }
    w.flush()?;
    Ok(())
}
