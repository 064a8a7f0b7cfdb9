//! Canny edges on color images, Laplacian edges on depth maps, and the
//! texture/depth misalignment mask built from both.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::morphology::{dilate, erode};
use crate::raster::{BitMask, DepthMap, Raster, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Hysteresis thresholds on the Sobel magnitude of 0–255 luminance.
    pub canny_low: f64,
    pub canny_high: f64,
    pub blur_sigma: f64,
    /// Threshold on |4-neighbor Laplacian| of depth, meters.
    pub laplacian_threshold: f64,
    pub dilate_radius: u32,
    pub erode_radius: u32,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self {
            canny_low: 50.0,
            canny_high: 150.0,
            blur_sigma: 1.4,
            laplacian_threshold: 0.05,
            dilate_radius: 5,
            erode_radius: 2,
        }
    }
}

impl EdgeParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.canny_low < self.canny_high) {
            return Err("canny_low must be below canny_high".into());
        }
        if self.erode_radius > self.dilate_radius {
            return Err("erode_radius must not exceed dilate_radius".into());
        }
        if !(self.blur_sigma >= 0.0) || !(self.laplacian_threshold >= 0.0) {
            return Err("blur_sigma and laplacian_threshold must be non-negative".into());
        }
        Ok(())
    }
}

const KERNEL_SCALE: f64 = 4096.0;

/// Integer Gaussian taps so the whole gradient path is exact integer arithmetic.
fn gaussian_taps(sigma: f64) -> Vec<i64> {
    if sigma <= 0.0 {
        return vec![1];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|g| (g / sum * KERNEL_SCALE).round() as i64).collect()
}

fn blur_axis(src: &Raster<i64>, taps: &[i64], horizontal: bool) -> Raster<i64> {
    let (w, h) = src.dims();
    let r = (taps.len() / 2) as i64;
    Raster::from_fn(w, h, |x, y| {
        let mut acc = 0i64;
        for (k, &t) in taps.iter().enumerate() {
            let o = k as i64 - r;
            let (sx, sy) = if horizontal {
                ((x as i64 + o).clamp(0, w as i64 - 1) as usize, y)
            } else {
                (x, (y as i64 + o).clamp(0, h as i64 - 1) as usize)
            };
            acc += t * src.get(sx, sy);
        }
        acc
    })
}

/// Canny on luminance: blur, Sobel, non-maximum suppression, hysteresis.
pub fn canny_edges(img: &RgbImage, p: &EdgeParams) -> BitMask {
    let (w, h) = img.dims();
    if w == 0 || h == 0 {
        return BitMask::filled(w, h, false);
    }
    // Luminance scaled by 1000; a uniform brightness shift moves every value
    // by the same integer and leaves all gradients bit-identical.
    let lum = img.map(|c| 299 * c[0] as i64 + 587 * c[1] as i64 + 114 * c[2] as i64);
    let taps = gaussian_taps(p.blur_sigma);
    let tap_sum: i64 = taps.iter().sum();
    let blurred = blur_axis(&blur_axis(&lum, &taps, true), &taps, false);
    let norm = 1000.0 * (tap_sum * tap_sum) as f64;

    let at = |x: i64, y: i64| -> i64 {
        *blurred.get(x.clamp(0, w as i64 - 1) as usize, y.clamp(0, h as i64 - 1) as usize)
    };
    let mut gx = Raster::filled(w, h, 0i64);
    let mut gy = Raster::filled(w, h, 0i64);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let sx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x - 1, y) + at(x - 1, y + 1));
            let sy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2 * at(x, y - 1) + at(x + 1, y - 1));
            gx.set(x as usize, y as usize, sx);
            gy.set(x as usize, y as usize, sy);
        }
    }
    let mag = gx.zip_map(&gy, |&a, &b| (a as f64).hypot(b as f64) / norm);

    let m = |x: i64, y: i64| -> f64 {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            *mag.get(x as usize, y as usize)
        }
    };
    // 0: suppressed, 1: weak, 2: strong
    let mut class = Raster::filled(w, h, 0u8);
    let tan22 = 0.414_213_562_373_095_1_f64;
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let v = m(x, y);
            if v < p.canny_low || v == 0.0 {
                continue;
            }
            let (ax, ay) = (*gx.get(x as usize, y as usize) as f64, *gy.get(x as usize, y as usize) as f64);
            let (ux, uy) = (ax.abs(), ay.abs());
            let ((dx1, dy1), (dx2, dy2)) = if uy <= ux * tan22 {
                ((-1, 0), (1, 0))
            } else if ux <= uy * tan22 {
                ((0, -1), (0, 1))
            } else if (ax > 0.0) == (ay > 0.0) {
                ((-1, -1), (1, 1))
            } else {
                ((1, -1), (-1, 1))
            };
            if v > m(x + dx1, y + dy1) && v >= m(x + dx2, y + dy2) {
                class.set(x as usize, y as usize, if v >= p.canny_high { 2 } else { 1 });
            }
        }
    }
    let mut out = BitMask::filled(w, h, false);
    let mut queue: VecDeque<(usize, usize)> = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if *class.get(x, y) == 2 {
                out.set(x, y, true);
                queue.push_back((x, y));
            }
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !*out.get(nx, ny) && *class.get(nx, ny) == 1 {
                    out.set(nx, ny, true);
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    out
}

/// Replaces misses by (max finite depth + 1 m) so silhouettes read as steps.
pub fn fill_background(depth: &DepthMap) -> Option<DepthMap> {
    let (_, hi) = depth.finite_range()?;
    let bg = hi + 1.0;
    Some(depth.map(|&d| if d.is_finite() { d } else { bg }))
}

/// |4-neighbor Laplacian| of depth above threshold. Outside the image depth is
/// extrapolated linearly, so planar ramps stay edge-free up to the border.
pub fn laplacian_edges(depth: &DepthMap, p: &EdgeParams) -> BitMask {
    let (w, h) = depth.dims();
    let Some(d) = fill_background(depth) else {
        return BitMask::filled(w, h, false);
    };
    let (wi, hi) = (w as i64, h as i64);
    let at = |x: i64, y: i64| *d.get(x.clamp(0, wi - 1) as usize, y.clamp(0, hi - 1) as usize);
    // With a linearly extrapolated neighbor the second difference vanishes.
    let second = |a: f64, c: f64, b: f64, at_border: bool| if at_border { 0.0 } else { a + b - 2.0 * c };
    BitMask::from_fn(w, h, |x, y| {
        let (x, y) = (x as i64, y as i64);
        let c = at(x, y);
        let lap = second(at(x - 1, y), c, at(x + 1, y), x == 0 || x == wi - 1)
            + second(at(x, y - 1), c, at(x, y + 1), y == 0 || y == hi - 1);
        lap.abs() > p.laplacian_threshold
    })
}

/// Band around depth discontinuities where color edges disagree with geometry.
///
/// Color edges are first restricted to the dilated depth-edge band; the union
/// with the depth edges is then dilated by `dilate_radius` and eroded by
/// `erode_radius`.
pub fn misalignment_mask(img: &RgbImage, depth: &DepthMap, p: &EdgeParams) -> BitMask {
    let color = canny_edges(img, p);
    let geo = laplacian_edges(depth, p);
    let color_near_geo = color.and(&dilate(&geo, p.dilate_radius));
    erode(&dilate(&color_near_geo.or(&geo), p.dilate_radius), p.erode_radius)
}
