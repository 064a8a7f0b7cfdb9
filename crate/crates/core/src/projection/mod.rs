//! Cameras, ray-cast depth rendering, panorama reprojection, unprojection
//! and point splatting.

pub mod bvh;
pub mod camera;
pub mod cloud;
pub mod render;

pub use bvh::{intersect_triangle, Hit, HitId, RayTriangle, Tracer};
pub use camera::{CameraError, CameraFrame, PanoCamera, PerspCamera};
pub use cloud::{
    merge_cloud, reproject_pano, splat, splat_points, stale_texture_mask, unproject,
    unproject_pano, ColoredPointCloud, OwnerId, ProjectionError, Splat,
};
pub use render::{render_pano, render_pano_depth, render_persp, render_persp_depth, DepthRender};
