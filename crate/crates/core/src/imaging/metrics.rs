//! Structural similarity and region-restricted PSNR.

use super::ImagingError;
use crate::raster::{BitMask, RgbImage};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const PSNR_CAP_DB: f64 = 99.0;

const K1: f64 = 0.01;
const K2: f64 = 0.03;
const DYNAMIC_RANGE: f64 = 255.0;

fn luminance(img: &RgbImage) -> Vec<f64> {
    img.data()
        .iter()
        .map(|c| 0.299 * c[0] as f64 + 0.587 * c[1] as f64 + 0.114 * c[2] as f64)
        .collect()
}

/// Valid-mode separable Gaussian filter.
fn filter_valid(src: &[f64], w: usize, h: usize, taps: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = taps.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * src[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

/// Mean SSIM of the luminance channels over all fully contained windows.
/// The window shrinks (keeping odd size) for images smaller than 11 px.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64, ImagingError> {
    if !a.same_dims(b) {
        return Err(ImagingError::Dimensions);
    }
    let (w, h) = a.dims();
    if w == 0 || h == 0 {
        return Err(ImagingError::EmptyRegion);
    }
    let mut n = SSIM_WINDOW.min(w).min(h);
    if n % 2 == 0 {
        n -= 1;
    }
    let r = (n / 2) as f64;
    let raw: Vec<f64> = (0..n)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let taps: Vec<f64> = raw.iter().map(|t| t / total).collect();

    let la = luminance(a);
    let lb = luminance(b);
    let aa: Vec<f64> = la.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = lb.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x * y).collect();
    let (mu_a, ow, oh) = filter_valid(&la, w, h, &taps);
    let (mu_b, ..) = filter_valid(&lb, w, h, &taps);
    let (e_aa, ..) = filter_valid(&aa, w, h, &taps);
    let (e_bb, ..) = filter_valid(&bb, w, h, &taps);
    let (e_ab, ..) = filter_valid(&ab, w, h, &taps);

    let c1 = (K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (K2 * DYNAMIC_RANGE).powi(2);
    let mut sum = 0.0;
    for i in 0..ow * oh {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    Ok(sum / (ow * oh) as f64)
}

/// PSNR in dB over the pixels of `region` (all three channels), capped at 99 dB.
pub fn psnr(a: &RgbImage, b: &RgbImage, region: &BitMask) -> Result<f64, ImagingError> {
    if !a.same_dims(b) || !a.same_dims(region) {
        return Err(ImagingError::Dimensions);
    }
    let mut sq = 0u64;
    let mut n = 0u64;
    for (i, &inside) in region.data().iter().enumerate() {
        if !inside {
            continue;
        }
        for c in 0..3 {
            let d = a.data()[i][c] as i64 - b.data()[i][c] as i64;
            sq += (d * d) as u64;
        }
        n += 3;
    }
    if n == 0 {
        return Err(ImagingError::EmptyRegion);
    }
    if sq == 0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sq as f64 / n as f64;
    Ok((10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()).min(PSNR_CAP_DB))
}
