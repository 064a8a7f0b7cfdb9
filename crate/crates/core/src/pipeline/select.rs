//! Choosing one backend candidate.

use serde::{Deserialize, Serialize};

use crate::imaging::{psnr, ssim, ImagingError};
use crate::painter::Scorer;
use crate::raster::{BitMask, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMode {
    /// `ssim(candidate, reference) + clip`.
    Initial,
    /// `psnr(candidate, reference, region) / normalizer + clip`.
    Iterative { normalizer: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub scores: Vec<f64>,
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Highest-scoring candidate; ties go to the lowest index.
pub fn select_candidate(
    candidates: &[RgbImage],
    reference: &RgbImage,
    region: &BitMask,
    prompt: &str,
    scorer: &dyn Scorer,
    mode: SelectionMode,
) -> Result<Selection, ImagingError> {
    if candidates.is_empty() {
        return Err(ImagingError::EmptyRegion);
    }
    let scores = candidates
        .iter()
        .map(|c| {
            let fidelity = match mode {
                SelectionMode::Initial => ssim(c, reference)?,
                SelectionMode::Iterative { normalizer } => psnr(c, reference, region)? / normalizer,
            };
            Ok(fidelity + scorer.score(c, prompt))
        })
        .collect::<Result<Vec<f64>, ImagingError>>()?;
    Ok(Selection {
        index: argmax(&scores),
        scores,
    })
}

/// Selection by the text-image score alone, for outputs without a reference.
pub fn select_by_prompt(candidates: &[RgbImage], prompt: &str, scorer: &dyn Scorer) -> Selection {
    let scores: Vec<f64> = candidates.iter().map(|c| scorer.score(c, prompt)).collect();
    Selection {
        index: argmax(&scores),
        scores,
    }
}
