//! Depth rendering by ray casting, for panoramic and pinhole cameras.

use rayon::prelude::*;

use super::bvh::{HitId, Tracer};
use super::camera::{PanoCamera, PerspCamera};
use crate::geometry::Vec3;
use crate::raster::{BitMask, DepthMap, Raster};
use crate::scene::{SurfaceLabel, TriMesh};

/// Depth plus per-pixel nearest-hit identity.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthRender {
    pub depth: DepthMap,
    pub hits: Raster<HitId>,
}

impl DepthRender {
    /// Pixels whose nearest hit belongs to mesh `mesh`.
    pub fn mesh_mask(&self, mesh: usize) -> BitMask {
        self.hits.map(|h| h.is_hit() && h.mesh as usize == mesh)
    }

    /// One mask per mesh slot.
    pub fn mesh_masks(&self, mesh_count: usize) -> Vec<BitMask> {
        (0..mesh_count).map(|m| self.mesh_mask(m)).collect()
    }

    pub fn label_mask(&self, tracer: &Tracer, label: SurfaceLabel) -> BitMask {
        self.hits.map(|h| tracer.label(*h) == Some(label))
    }
}

fn render_rows(
    tracer: &Tracer,
    width: usize,
    height: usize,
    origin: Vec3,
    dir: impl Fn(usize, usize) -> Vec3 + Sync,
) -> DepthRender {
    let mut cells = vec![(f64::INFINITY, HitId::NONE); width * height];
    cells
        .par_chunks_mut(width.max(1))
        .enumerate()
        .for_each(|(y, row)| {
            for (x, cell) in row.iter_mut().enumerate() {
                if let Some(hit) = tracer.cast(&origin, &dir(x, y)) {
                    *cell = (hit.t, hit.id);
                }
            }
        });
    let (depth, hits): (Vec<f64>, Vec<HitId>) = cells.into_iter().unzip();
    DepthRender {
        depth: Raster::from_vec(width, height, depth),
        hits: Raster::from_vec(width, height, hits),
    }
}

/// Equirectangular depth from the camera center; misses are `+inf`.
pub fn render_pano(tracer: &Tracer, cam: &PanoCamera) -> DepthRender {
    render_rows(tracer, cam.width, cam.height, cam.center, |u, v| cam.pixel_dir(u, v))
}

pub fn render_persp(tracer: &Tracer, cam: &PerspCamera) -> DepthRender {
    let frame = cam.frame();
    render_rows(tracer, cam.resolution, cam.resolution, cam.position, |x, y| {
        cam.pixel_dir_with(&frame, x, y)
    })
}

pub fn render_pano_depth(meshes: &[TriMesh], cam: &PanoCamera) -> DepthMap {
    render_pano(&Tracer::new(meshes), cam).depth
}

/// Pinhole depth plus one visibility mask per input mesh.
pub fn render_persp_depth(meshes: &[TriMesh], cam: &PerspCamera) -> (DepthMap, Vec<BitMask>) {
    let r = render_persp(&Tracer::new(meshes), cam);
    let masks = r.mesh_masks(meshes.len());
    (r.depth, masks)
}
