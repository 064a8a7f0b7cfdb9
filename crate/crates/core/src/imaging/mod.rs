//! Edge detection, morphology, misalignment masks, hole classification and
//! filling, layer compositing and similarity metrics.

pub mod compose;
pub mod edges;
pub mod fill;
pub mod metrics;
pub mod morphology;

pub use compose::{combine_final, composite};
pub use edges::{canny_edges, laplacian_edges, misalignment_mask, EdgeParams};
pub use fill::{classify_unknown, interp_inpaint, nearest_color_fill, nearest_known_index, RegionClassification};
pub use metrics::{psnr, ssim, PSNR_CAP_DB};
pub use morphology::{dilate, erode, morphology, MorphOp};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ImagingError {
    #[error("raster dimensions differ")]
    Dimensions,
    #[error("no known pixel to copy from")]
    NoReference,
    #[error("classification window must be odd, got {0}")]
    EvenWindow(usize),
    #[error("{0} sparse pixel(s) lie outside the unknown mask")]
    SparseOutsideUnknown(usize),
    #[error("metric region is empty")]
    EmptyRegion,
}
