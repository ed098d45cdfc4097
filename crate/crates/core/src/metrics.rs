//! Image quality on the 0–255 scale.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::ImageU8;

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub ie: f64,
}

fn check(a: &ImageU8, b: &ImageU8, op: &'static str) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::dim(op, &[a.height(), a.width()], &[b.height(), b.width()]));
    }
    Ok(())
}

fn mse(a: &ImageU8, b: &ImageU8) -> f64 {
    let s: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| {
            let d = x.abs_diff(y) as u64;
            d * d
        })
        .sum();
    s as f64 / a.pixels().len() as f64
}

/// `10·log10(255² / MSE)`, capped at [`PSNR_CAP`].
pub fn psnr(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    check(a, b, "psnr")?;
    let m = mse(a, b);
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * libm::log10(255.0 * 255.0 / m)).min(PSNR_CAP))
}

/// Mean absolute difference.
pub fn interp_error(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    check(a, b, "interp_error")?;
    let s: u64 = a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| x.abs_diff(y) as u64).sum();
    Ok(s as f64 / a.pixels().len() as f64)
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA))
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.iter().map(|v| v / s).collect()
}

/// Mean structural similarity over every window position fully inside the
/// image, Gaussian-weighted 11×11 windows with σ = 1.5.
pub fn ssim(a: &ImageU8, b: &ImageU8) -> Result<f64> {
    check(a, b, "ssim")?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::dim("ssim", &[h, w], &[SSIM_WINDOW, SSIM_WINDOW]));
    }
    let g = gaussian_window();
    let c1 = (SSIM_K1 * 255.0) * (SSIM_K1 * 255.0);
    let c2 = (SSIM_K2 * 255.0) * (SSIM_K2 * 255.0);
    let (pa, pb) = (a.pixels(), b.pixels());
    let mut total = 0.0;
    let (nx, ny) = (w - SSIM_WINDOW + 1, h - SSIM_WINDOW + 1);
    for y0 in 0..ny {
        for x0 in 0..nx {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (j, gy) in g.iter().enumerate() {
                let row = (y0 + j) * w + x0;
                for (i, gx) in g.iter().enumerate() {
                    let wt = gy * gx;
                    let (va, vb) = (pa[row + i] as f64, pb[row + i] as f64);
                    ma += wt * va;
                    mb += wt * vb;
                    saa += wt * va * va;
                    sbb += wt * vb * vb;
                    sab += wt * va * vb;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        }
    }
    Ok(total / (nx * ny) as f64)
}

pub fn evaluate(pred: &ImageU8, target: &ImageU8) -> Result<MetricReport> {
    Ok(MetricReport {
        psnr: psnr(pred, target)?,
        ssim: ssim(pred, target)?,
        ie: interp_error(pred, target)?,
    })
}

/// Pixelwise rounded mean of two frames, the trivial interpolation.
pub fn average_frames(a: &ImageU8, b: &ImageU8) -> Result<ImageU8> {
    check(a, b, "average_frames")?;
    let px = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .map(|(&x, &y)| ((x as u16 + y as u16 + 1) / 2) as u8)
        .collect();
    ImageU8::new(a.width(), a.height(), px)
}
