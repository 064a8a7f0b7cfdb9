//! Scene texturing engine: room generation, projection, imaging, painter
//! backends, view planning, the texturing pipeline and persistence.

pub mod geometry;
pub mod hash;
pub mod imaging;
pub mod io;
pub mod painter;
pub mod pipeline;
pub mod planner;
pub mod projection;
pub mod raster;
pub mod room;
pub mod scene;
