//! Deterministic procedural painter.
//!
//! Normalized inverse depth is cut into [`DEPTH_BANDS`] bands. Each band gets
//! the hue `fnv1a64(prompt ++ [0] ++ [band]) % 360` at saturation 0.6 and
//! value 0.8. Candidate 0 uses that hue; candidate `j > 0` shifts it by
//! `fnv1a64(seed_le ++ j_le) % 61 − 30` degrees. Inside an inpaint mask the
//! band color is blended 70/30 with the nearest known base color; pixels under
//! a sketch use the complementary hue.

use std::time::{Duration, Instant};

use super::{PaintError, PaintKind, PaintRequest, PaintResult, Painter};
use crate::hash::{fnv1a64, Fnv1a};
use crate::imaging::nearest_color_fill;
use crate::raster::{Rgb8, RgbImage};

pub const DEPTH_BANDS: u16 = 8;
pub const MOCK_SATURATION: f64 = 0.6;
pub const MOCK_VALUE: f64 = 0.8;
pub const BAND_WEIGHT: f64 = 0.7;

#[derive(Debug, Clone, Copy, Default)]
pub struct MockPainter;

impl MockPainter {
    pub fn new() -> Self {
        Self
    }
}

pub fn depth_band(encoded: u16) -> u8 {
    let n = encoded as f64 / u16::MAX as f64;
    ((n * DEPTH_BANDS as f64).floor() as u16).min(DEPTH_BANDS - 1) as u8
}

pub fn band_hue(prompt: &str, band: u8) -> u32 {
    let h = Fnv1a::new().write(prompt.as_bytes()).write(&[0, band]).finish();
    (h % 360) as u32
}

fn candidate_shift(seed: u64, candidate: u32) -> i32 {
    if candidate == 0 {
        return 0;
    }
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(&candidate.to_le_bytes());
    (fnv1a64(&bytes) % 61) as i32 - 30
}

/// HSV to 8-bit RGB, hue in degrees.
pub fn hsv_to_rgb(hue: f64, s: f64, v: f64) -> Rgb8 {
    let h = hue.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h % 2.0 - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r, g, b].map(|ch| ((ch + m) * 255.0).round() as u8)
}

pub fn band_color(prompt: &str, band: u8, shift: i32, sketched: bool) -> Rgb8 {
    let mut hue = band_hue(prompt, band) as f64 + shift as f64;
    if sketched {
        hue += 180.0;
    }
    hsv_to_rgb(hue, MOCK_SATURATION, MOCK_VALUE)
}

fn candidate(req: &PaintRequest, index: u32, reference: Option<&RgbImage>) -> RgbImage {
    let shift = candidate_shift(req.seed, index);
    let (w, h) = (req.width(), req.height());
    let mut palette = [[[0u8; 3]; 2]; DEPTH_BANDS as usize];
    for (band, slot) in palette.iter_mut().enumerate() {
        *slot = [false, true].map(|s| band_color(&req.prompt, band as u8, shift, s));
    }
    RgbImage::from_fn(w, h, |x, y| {
        let i = y * w + x;
        let sketched = req.sketch.as_ref().is_some_and(|s| s.data()[i]);
        let color = palette[depth_band(req.depth.data()[i]) as usize][sketched as usize];
        match (&req.base, &req.mask) {
            (Some(base), Some(mask)) if !mask.data()[i] => base.data()[i],
            (Some(_), Some(_)) => match reference {
                Some(r) => {
                    let near = r.data()[i];
                    [0, 1, 2].map(|c| {
                        (BAND_WEIGHT * color[c] as f64 + (1.0 - BAND_WEIGHT) * near[c] as f64).round() as u8
                    })
                }
                None => color,
            },
            _ => color,
        }
    })
}

impl Painter for MockPainter {
    fn identity(&self) -> String {
        "mock".into()
    }

    fn paint(&self, req: &PaintRequest) -> Result<PaintResult, PaintError> {
        req.validate()?;
        let start = Instant::now();
        let reference = match (req.kind, &req.base, &req.mask) {
            (PaintKind::Generate, ..) => None,
            (_, Some(base), Some(mask)) => nearest_color_fill(base, mask).ok(),
            _ => None,
        };
        let candidates = (0..req.candidates)
            .map(|j| candidate(req, j, reference.as_ref()))
            .collect();
        Ok(PaintResult {
            candidates,
            backend: self.identity(),
            elapsed: start.elapsed().max(Duration::ZERO),
        })
    }
}
