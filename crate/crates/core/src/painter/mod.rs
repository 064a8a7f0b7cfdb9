//! The depth-conditioned generation/inpainting contract and its backends.

pub mod mock;
pub mod remote;
pub mod scorer;
pub mod wire;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::raster::{BitMask, DepthMap, Raster, RgbImage};

pub use mock::MockPainter;
pub use remote::{RemoteConfig, RemotePainter};
pub use scorer::{NullScorer, RemoteScorer, Scorer};
pub use wire::{WireImages, WireRequest, WireResponse};

pub const DEFAULT_CANDIDATES: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaintKind {
    Generate,
    Inpaint,
    SketchInpaint,
}

/// Sampler settings passed through to the backend untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaintParams {
    pub steps: u32,
    pub control_weight: f64,
    pub cfg: f64,
    pub refiner_switch: f64,
}

impl Default for PaintParams {
    fn default() -> Self {
        Self {
            steps: 50,
            control_weight: 1.5,
            cfg: 6.5,
            refiner_switch: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaintRequest {
    pub kind: PaintKind,
    pub base: Option<RgbImage>,
    pub mask: Option<BitMask>,
    /// Normalized inverse depth, see [`encode_depth`].
    pub depth: Raster<u16>,
    pub sketch: Option<BitMask>,
    pub prompt: String,
    pub negative_prompt: String,
    pub seed: u64,
    pub candidates: u32,
    pub params: PaintParams,
}

impl PaintRequest {
    pub fn generate(depth: &DepthMap, prompt: &str, negative: &str, seed: u64) -> Self {
        Self {
            kind: PaintKind::Generate,
            base: None,
            mask: None,
            depth: encode_depth(depth),
            sketch: None,
            prompt: prompt.to_string(),
            negative_prompt: negative.to_string(),
            seed,
            candidates: DEFAULT_CANDIDATES,
            params: PaintParams::default(),
        }
    }

    pub fn inpaint(
        base: RgbImage,
        mask: BitMask,
        depth: &DepthMap,
        prompt: &str,
        negative: &str,
        seed: u64,
    ) -> Self {
        Self {
            kind: PaintKind::Inpaint,
            base: Some(base),
            mask: Some(mask),
            ..Self::generate(depth, prompt, negative, seed)
        }
    }

    pub fn with_sketch(mut self, sketch: BitMask) -> Self {
        self.kind = PaintKind::SketchInpaint;
        self.sketch = Some(sketch);
        self
    }

    pub fn with_candidates(mut self, n: u32) -> Self {
        self.candidates = n;
        self
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    pub fn validate(&self) -> Result<(), PaintError> {
        let invalid = |m: &str| Err(PaintError::InvalidRequest(m.to_string()));
        if self.candidates == 0 {
            return invalid("candidate count must be at least 1");
        }
        if self.kind != PaintKind::Generate && (self.base.is_none() || self.mask.is_none()) {
            return invalid("inpaint requests need a base image and a mask");
        }
        if self.kind == PaintKind::SketchInpaint && self.sketch.is_none() {
            return invalid("sketch-inpaint requests need a sketch");
        }
        let dims = self.depth.dims();
        let mismatched = self.base.as_ref().is_some_and(|b| b.dims() != dims)
            || self.mask.as_ref().is_some_and(|m| m.dims() != dims)
            || self.sketch.as_ref().is_some_and(|s| s.dims() != dims);
        if mismatched {
            return invalid("base, mask and sketch must match the depth resolution");
        }
        Ok(())
    }
}

/// Maps depth to `(1/d − 1/d_max) / (1/d_min − 1/d_max)` scaled to 16 bits.
/// Misses become 0 (far); a map with a single finite depth becomes 65535.
pub fn encode_depth(depth: &DepthMap) -> Raster<u16> {
    let Some((lo, hi)) = depth.finite_range() else {
        return depth.map(|_| 0);
    };
    let (near, far) = (1.0 / lo, 1.0 / hi);
    let span = near - far;
    depth.map(|&d| {
        if !d.is_finite() {
            0
        } else if span <= 0.0 {
            u16::MAX
        } else {
            (((1.0 / d - far) / span).clamp(0.0, 1.0) * u16::MAX as f64).round() as u16
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaintResult {
    pub candidates: Vec<RgbImage>,
    pub backend: String,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PaintError {
    #[error("invalid paint request: {0}")]
    InvalidRequest(String),
    #[error("backend unreachable after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend returned HTTP {status} after {attempts} attempt(s): {body}")]
    Status { status: u16, attempts: u32, body: String },
    #[error("malformed backend response: {0}")]
    Protocol(String),
    #[error("candidate {index} is {got:?}, expected {expected:?}")]
    Resolution {
        index: usize,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("backend returned {got} candidate(s), expected {expected}")]
    CandidateCount { expected: u32, got: usize },
}

/// A depth-conditioned painter. Implementations must tolerate concurrent calls.
pub trait Painter: Send + Sync {
    fn identity(&self) -> String;
    fn paint(&self, req: &PaintRequest) -> Result<PaintResult, PaintError>;
}

/// Backend output after contract checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckedPaint {
    /// Candidates with out-of-mask pixels restored from the base image.
    pub result: PaintResult,
    /// Candidates exactly as the backend returned them.
    pub raw: Vec<RgbImage>,
}

/// Restores pixels outside the request's inpaint mask from its base image.
pub fn enforce_mask(req: &PaintRequest, img: &RgbImage) -> RgbImage {
    let mut out = img.clone();
    if let (Some(base), Some(mask)) = (&req.base, &req.mask) {
        for ((px, &b), &m) in out.data_mut().iter_mut().zip(base.data()).zip(mask.data()) {
            if !m {
                *px = b;
            }
        }
    }
    out
}

/// Validates the request, calls the backend, checks every candidate's shape
/// and overwrites pixels outside the inpaint mask with the base image.
pub fn paint_checked(painter: &dyn Painter, req: &PaintRequest) -> Result<CheckedPaint, PaintError> {
    req.validate()?;
    let res = painter.paint(req)?;
    if res.candidates.len() != req.candidates as usize {
        return Err(PaintError::CandidateCount {
            expected: req.candidates,
            got: res.candidates.len(),
        });
    }
    let expected = req.depth.dims();
    if let Some((index, c)) = res.candidates.iter().enumerate().find(|(_, c)| c.dims() != expected) {
        return Err(PaintError::Resolution {
            index,
            expected,
            got: c.dims(),
        });
    }
    let enforced = res.candidates.iter().map(|c| enforce_mask(req, c)).collect();
    Ok(CheckedPaint {
        raw: res.candidates,
        result: PaintResult {
            candidates: enforced,
            ..res
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_encoding_is_inverse_and_normalized() {
        let d = DepthMap::from_vec(4, 1, vec![1.0, 2.0, f64::INFINITY, 4.0]);
        let e = encode_depth(&d);
        assert_eq!(e.data()[0], 65535);
        assert_eq!(e.data()[3], 0);
        assert_eq!(e.data()[2], 0);
        // 1/2 sits at (0.5 - 0.25) / 0.75 of the range
        assert_eq!(e.data()[1], (65535.0f64 / 3.0).round() as u16);
        assert!(encode_depth(&DepthMap::filled(2, 2, 3.0)).data().iter().all(|&v| v == 65535));
    }

    #[test]
    fn validation() {
        let d = DepthMap::filled(4, 4, 1.0);
        assert!(PaintRequest::generate(&d, "p", "", 1).validate().is_ok());
        assert!(PaintRequest::generate(&d, "p", "", 1).with_candidates(0).validate().is_err());
        let mut r = PaintRequest::inpaint(RgbImage::filled(4, 4, [0; 3]), BitMask::filled(4, 4, true), &d, "p", "", 1);
        assert!(r.validate().is_ok());
        r.mask = Some(BitMask::filled(3, 4, true));
        assert!(r.validate().is_err());
        r.mask = None;
        assert!(r.validate().is_err());
    }

    struct Sloppy;

    impl Painter for Sloppy {
        fn identity(&self) -> String {
            "sloppy".into()
        }
        fn paint(&self, req: &PaintRequest) -> Result<PaintResult, PaintError> {
            Ok(PaintResult {
                candidates: vec![RgbImage::filled(req.width(), req.height(), [255; 3]); req.candidates as usize],
                backend: self.identity(),
                elapsed: Duration::ZERO,
            })
        }
    }

    #[test]
    fn out_of_mask_pixels_are_restored() {
        let d = DepthMap::filled(6, 6, 1.0);
        let base = RgbImage::from_fn(6, 6, |x, y| [x as u8, y as u8, 7]);
        let mask = BitMask::from_fn(6, 6, |x, _| x < 2);
        let req = PaintRequest::inpaint(base.clone(), mask.clone(), &d, "p", "", 3);
        let res = paint_checked(&Sloppy, &req).unwrap();
        assert!(res.raw.iter().all(|c| c.data().iter().all(|&p| p == [255; 3])));
        for c in &res.result.candidates {
            for i in 0..36 {
                if mask.data()[i] {
                    assert_eq!(c.data()[i], [255; 3]);
                } else {
                    assert_eq!(c.data()[i], base.data()[i]);
                }
            }
        }
    }
}
