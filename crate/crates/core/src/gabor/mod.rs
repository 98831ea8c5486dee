//! Gabor filter-bank features for aligned face crops.
//!
//! Kernel `(v, u)` is a Gaussian envelope times a complex plane wave with
//! wave vector `k_v (cos θ_u, sin θ_u)`, where `k_v = k_max / spacing^v` and
//! `θ_u = uπ / orientations`:
//!
//! ```text
//! ψ(z) = (k²/σ²) exp(-k²|z|² / 2σ²) exp(i k·z)
//! ```
//!
//! The real and imaginary parts are then shifted to zero mean over the
//! window. Coordinates are `(x, y)` with `x` along columns and `y` down rows.

mod align;
mod pgm;

use std::f64::consts::{PI, SQRT_2};

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

pub use align::{align_and_crop, AlignTargets};
pub use pgm::{decode_pgm, encode_pgm, ImageLoader, Pgm, PgmLoader};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams {
    pub k_max: f64,
    /// Ratio between wave numbers of neighbouring scales.
    pub spacing: f64,
    /// Envelope width in units of the wavelength.
    pub sigma: f64,
    /// Side of the square kernel window; must be odd.
    pub window: usize,
}

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            k_max: PI / 2.0,
            spacing: SQRT_2,
            sigma: 2.0 * PI,
            window: 33,
        }
    }
}

impl GaborParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k_max", self.k_max), ("spacing", self.spacing), ("sigma", self.sigma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("Gabor {name} must be positive, got {v}")));
            }
        }
        if self.window.is_multiple_of(2) {
            return Err(Error::config(format!("Gabor window must be odd, got {}", self.window)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FilterBank {
    /// Scale-major: kernel `v * orientations + u`.
    kernels: Vec<Array2<Complex64>>,
    scales: usize,
    orientations: usize,
    params: GaborParams,
}

pub fn build_filter_bank(scales: usize, orientations: usize, params: GaborParams) -> Result<FilterBank> {
    if scales == 0 || orientations == 0 {
        return Err(Error::config("filter bank needs at least one scale and one orientation"));
    }
    params.validate()?;
    let h = (params.window / 2) as f64;
    let s2 = params.sigma * params.sigma;
    let mut kernels = Vec::with_capacity(scales * orientations);
    for v in 0..scales {
        let k = params.k_max / params.spacing.powi(v as i32);
        let k2 = k * k;
        for u in 0..orientations {
            let theta = u as f64 * PI / orientations as f64;
            let (kx, ky) = (k * theta.cos(), k * theta.sin());
            let mut ker = Array2::from_shape_fn((params.window, params.window), |(r, c)| {
                let (x, y) = (c as f64 - h, r as f64 - h);
                let env = k2 / s2 * (-k2 * (x * x + y * y) / (2.0 * s2)).exp();
                Complex64::from_polar(env, kx * x + ky * y)
            });
            let mean = ker.mean().expect("non-empty window");
            ker.mapv_inplace(|z| z - mean);
            kernels.push(ker);
        }
    }
    Ok(FilterBank {
        kernels,
        scales,
        orientations,
        params,
    })
}

impl FilterBank {
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn scales(&self) -> usize {
        self.scales
    }

    pub fn orientations(&self) -> usize {
        self.orientations
    }

    pub fn kernel_size(&self) -> usize {
        self.params.window
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    pub fn kernel(&self, scale: usize, orientation: usize) -> &Array2<Complex64> {
        &self.kernels[scale * self.orientations + orientation]
    }

    pub fn kernels(&self) -> &[Array2<Complex64>] {
        &self.kernels
    }
}

/// Square grayscale crop.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedFace {
    pixels: Array2<f64>,
}

impl AlignedFace {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        let (h, w) = pixels.dim();
        if h == 0 || h != w {
            return Err(Error::invalid(format!("face crop must be square and non-empty, got {h}x{w}")));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("face crop has non-finite pixels"));
        }
        Ok(Self { pixels })
    }

    pub fn size(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }
}

/// Mirror index without repeating the edge sample (`d c b | a b c d | c b a`).
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m < n as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

/// Same-size convolution with reflective borders; returns per-pixel
/// magnitudes in row-major order.
fn magnitude_response(padded: &Array2<f64>, kernel: &Array2<Complex64>, h: usize, w: usize) -> Vec<f64> {
    let win = kernel.nrows();
    // flipped so the inner loop is a correlation over contiguous rows
    let re: Vec<f64> = kernel.as_slice().expect("standard layout").iter().rev().map(|z| z.re).collect();
    let im: Vec<f64> = kernel.as_slice().expect("standard layout").iter().rev().map(|z| z.im).collect();
    let pw = padded.ncols();
    let p = padded.as_slice().expect("standard layout");
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (mut sr, mut si) = (0.0f64, 0.0f64);
            for a in 0..win {
                let prow = &p[(y + a) * pw + x..(y + a) * pw + x + win];
                let kr = &re[a * win..(a + 1) * win];
                let ki = &im[a * win..(a + 1) * win];
                for b in 0..win {
                    sr += kr[b] * prow[b];
                    si += ki[b] * prow[b];
                }
            }
            out.push(sr.hypot(si));
        }
    }
    out
}

/// Gabor magnitudes of every kernel at every pixel, ordered by scale, then
/// orientation, then row-major pixel. Length `H * W * kernels`.
pub fn extract(face: &AlignedFace, bank: &FilterBank) -> Vec<f64> {
    let img = &face.pixels;
    let (h, w) = img.dim();
    let half = bank.kernel_size() / 2;
    let padded = Array2::from_shape_fn((h + 2 * half, w + 2 * half), |(r, c)| {
        img[[
            reflect(r as isize - half as isize, h),
            reflect(c as isize - half as isize, w),
        ]]
    });
    let maps: Vec<Vec<f64>> = bank
        .kernels
        .par_iter()
        .map(|k| magnitude_response(&padded, k, h, w))
        .collect();
    maps.concat()
}

/// Crop geometry plus filter bank: image and eye positions in, feature
/// vector out.
#[derive(Debug, Clone)]
pub struct FeaturePipeline {
    pub crop: usize,
    pub targets: AlignTargets,
    pub bank: FilterBank,
}

impl FeaturePipeline {
    pub fn new(crop: usize, bank: FilterBank) -> Result<Self> {
        if crop == 0 {
            return Err(Error::config("crop size must be positive"));
        }
        Ok(Self {
            crop,
            targets: AlignTargets::default_for(crop),
            bank,
        })
    }

    pub fn dimension(&self) -> usize {
        self.crop * self.crop * self.bank.len()
    }

    pub fn extract_face(&self, face: &AlignedFace) -> Result<Vec<f64>> {
        check_dim("face size", self.crop, face.size())?;
        Ok(extract(face, &self.bank))
    }

    pub fn features(&self, image: &Array2<f64>, left_eye: (f64, f64), right_eye: (f64, f64)) -> Result<Vec<f64>> {
        let face = align_and_crop(image, left_eye, right_eye, self.crop, &self.targets)?;
        self.extract_face(&face)
    }
}
