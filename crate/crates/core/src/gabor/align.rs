use ndarray::Array2;

use super::AlignedFace;
use crate::error::{Error, Result};

/// Where the eye centres land in the crop. Continuous coordinates: the
/// centre of pixel `(row, col)` is at `(col + 0.5, row + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignTargets {
    pub left: (f64, f64),
    pub right: (f64, f64),
}

impl AlignTargets {
    /// `(0.3c, 0.35c)` and `(0.7c, 0.35c)` for crop side `c`.
    pub fn default_for(crop: usize) -> Self {
        let c = crop as f64;
        Self {
            left: (0.3 * c, 0.35 * c),
            right: (0.7 * c, 0.35 * c),
        }
    }
}

fn bilinear(img: &Array2<f64>, x: f64, y: f64) -> f64 {
    let (h, w) = img.dim();
    // pixel-index coordinates, clamped to the edge
    let fx = (x - 0.5).clamp(0.0, (w - 1) as f64);
    let fy = (y - 0.5).clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (tx, ty) = (fx - x0 as f64, fy - y0 as f64);
    let top = img[[y0, x0]] * (1.0 - tx) + img[[y0, x1]] * tx;
    let bottom = img[[y1, x0]] * (1.0 - tx) + img[[y1, x1]] * tx;
    top * (1.0 - ty) + bottom * ty
}

fn inside(p: (f64, f64), h: usize, w: usize) -> bool {
    p.0.is_finite() && p.1.is_finite() && (0.0..=w as f64).contains(&p.0) && (0.0..=h as f64).contains(&p.1)
}

/// Maps the eye centres onto `targets` with a similarity transform,
/// resamples bilinearly into a `crop x crop` patch and rescales intensities
/// to `[0, 1]` (a flat patch becomes all zeros).
pub fn align_and_crop(
    image: &Array2<f64>,
    left_eye: (f64, f64),
    right_eye: (f64, f64),
    crop: usize,
    targets: &AlignTargets,
) -> Result<AlignedFace> {
    let (h, w) = image.dim();
    if h == 0 || w == 0 {
        return Err(Error::invalid("empty image"));
    }
    if crop == 0 {
        return Err(Error::config("crop size must be positive"));
    }
    for (name, p) in [("left", left_eye), ("right", right_eye)] {
        if !inside(p, h, w) {
            return Err(Error::invalid(format!(
                "{name} eye ({}, {}) lies outside the {w}x{h} image",
                p.0, p.1
            )));
        }
    }
    let src = (right_eye.0 - left_eye.0, right_eye.1 - left_eye.1);
    if src.0 == 0.0 && src.1 == 0.0 {
        return Err(Error::invalid("eye positions coincide"));
    }
    let dst = (targets.right.0 - targets.left.0, targets.right.1 - targets.left.1);
    let d2 = dst.0 * dst.0 + dst.1 * dst.1;
    if d2 == 0.0 {
        return Err(Error::config("eye targets coincide"));
    }
    // complex ratio src / dst: crop offsets -> image offsets
    let a = (src.0 * dst.0 + src.1 * dst.1) / d2;
    let b = (src.1 * dst.0 - src.0 * dst.1) / d2;

    let mut out = Array2::from_shape_fn((crop, crop), |(r, c)| {
        let px = c as f64 + 0.5 - targets.left.0;
        let py = r as f64 + 0.5 - targets.left.1;
        let sx = left_eye.0 + a * px - b * py;
        let sy = left_eye.1 + b * px + a * py;
        bilinear(image, sx, sy)
    });
    let lo = out.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        out.mapv_inplace(|v| (v - lo) / (hi - lo));
    } else {
        out.fill(0.0);
    }
    AlignedFace::new(out)
}
