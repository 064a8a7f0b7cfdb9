//! JSON envelope for `POST /v1/paint`. Rasters travel as base64 PNG: 8-bit
//! RGB for the base, 8-bit gray for mask and sketch, 16-bit gray for depth.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{PaintError, PaintKind, PaintParams, PaintRequest};
use crate::raster::{
    gray16_from_png, gray16_to_png, mask_from_png, mask_to_png, rgb_from_png, rgb_to_png, RgbImage,
};

pub const WIRE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireImages {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub depth: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketch: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub version: u32,
    pub kind: PaintKind,
    pub prompt: String,
    pub negative_prompt: String,
    pub seed: u64,
    pub n: u32,
    pub params: PaintParams,
    pub images: WireImages,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub candidates: Vec<String>,
}

pub fn encode_png(bytes: &[u8]) -> String {
    B64.encode(bytes)
}

fn decode_b64(field: &str, s: &str) -> Result<Vec<u8>, PaintError> {
    B64.decode(s)
        .map_err(|e| PaintError::Protocol(format!("{field}: invalid base64: {e}")))
}

impl WireRequest {
    pub fn from_request(req: &PaintRequest) -> Self {
        Self {
            version: WIRE_VERSION,
            kind: req.kind,
            prompt: req.prompt.clone(),
            negative_prompt: req.negative_prompt.clone(),
            seed: req.seed,
            n: req.candidates,
            params: req.params,
            images: WireImages {
                base: req.base.as_ref().map(|b| encode_png(&rgb_to_png(b))),
                mask: req.mask.as_ref().map(|m| encode_png(&mask_to_png(m))),
                depth: encode_png(&gray16_to_png(&req.depth)),
                sketch: req.sketch.as_ref().map(|s| encode_png(&mask_to_png(s))),
            },
        }
    }

    pub fn to_request(&self) -> Result<PaintRequest, PaintError> {
        if self.version != WIRE_VERSION {
            return Err(PaintError::Protocol(format!("unsupported envelope version {}", self.version)));
        }
        let png = |field: &str, e: crate::raster::PngError| PaintError::Protocol(format!("{field}: {e}"));
        let depth = gray16_from_png(&decode_b64("depth", &self.images.depth)?).map_err(|e| png("depth", e))?;
        let base = match &self.images.base {
            Some(s) => Some(rgb_from_png(&decode_b64("base", s)?).map_err(|e| png("base", e))?),
            None => None,
        };
        let mask = match &self.images.mask {
            Some(s) => Some(mask_from_png(&decode_b64("mask", s)?).map_err(|e| png("mask", e))?),
            None => None,
        };
        let sketch = match &self.images.sketch {
            Some(s) => Some(mask_from_png(&decode_b64("sketch", s)?).map_err(|e| png("sketch", e))?),
            None => None,
        };
        let req = PaintRequest {
            kind: self.kind,
            base,
            mask,
            depth,
            sketch,
            prompt: self.prompt.clone(),
            negative_prompt: self.negative_prompt.clone(),
            seed: self.seed,
            candidates: self.n,
            params: self.params,
        };
        req.validate()?;
        Ok(req)
    }
}

impl WireResponse {
    pub fn from_images(images: &[RgbImage]) -> Self {
        Self {
            candidates: images.iter().map(|c| encode_png(&rgb_to_png(c))).collect(),
        }
    }

    pub fn to_images(&self) -> Result<Vec<RgbImage>, PaintError> {
        self.candidates
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let field = format!("candidates[{i}]");
                rgb_from_png(&decode_b64(&field, s)?)
                    .map_err(|e| PaintError::Protocol(format!("{field}: {e}")))
            })
            .collect()
    }
}

/// Serialized request body; equal requests give equal bytes.
pub fn request_bytes(req: &PaintRequest) -> Vec<u8> {
    serde_json::to_vec(&WireRequest::from_request(req)).expect("wire request serializes")
}
