//! Colored point clouds: unprojection, z-buffered splatting and merging.

use serde::{Deserialize, Serialize};

use super::camera::{PanoCamera, PerspCamera};
use crate::geometry::Vec3;
use crate::raster::{BitMask, DepthMap, Raster, Rgb8, RgbImage};

/// Owner slot of a point; resolved to a name by the owning scene.
pub type OwnerId = u16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProjectionError {
    #[error("{count} masked pixel(s) have no finite depth, first at {first:?}")]
    InfiniteDepth {
        count: usize,
        first: (usize, usize),
        pixels: Vec<(usize, usize)>,
    },
    #[error("raster dimensions do not match the camera ({expected}x{expected})")]
    Dimensions { expected: usize },
}

/// World-space points with colors and provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColoredPointCloud {
    pub points: Vec<Vec3>,
    pub colors: Vec<Rgb8>,
    /// Index of the view each point was unprojected from.
    pub views: Vec<u32>,
    pub owners: Vec<OwnerId>,
}

impl ColoredPointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            points: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            views: Vec::with_capacity(n),
            owners: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: Vec3, color: Rgb8, view: u32, owner: OwnerId) {
        self.points.push(p);
        self.colors.push(color);
        self.views.push(view);
        self.owners.push(owner);
    }

    pub fn extend_from(&mut self, other: &ColoredPointCloud) {
        self.points.extend_from_slice(&other.points);
        self.colors.extend_from_slice(&other.colors);
        self.views.extend_from_slice(&other.views);
        self.owners.extend_from_slice(&other.owners);
    }

    pub fn is_consistent(&self) -> bool {
        let n = self.points.len();
        self.colors.len() == n
            && self.views.len() == n
            && self.owners.len() == n
            && self.points.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    /// Keeps points for which `keep(index)` holds, preserving order.
    pub fn filter_indices(&self, mut keep: impl FnMut(usize) -> bool) -> ColoredPointCloud {
        let mut out = ColoredPointCloud::new();
        for i in 0..self.len() {
            if keep(i) {
                out.push(self.points[i], self.colors[i], self.views[i], self.owners[i]);
            }
        }
        out
    }

    pub fn owned_by(&self, owner: OwnerId) -> ColoredPointCloud {
        self.filter_indices(|i| self.owners[i] == owner)
    }

    pub fn from_view(&self, view: u32) -> ColoredPointCloud {
        self.filter_indices(|i| self.views[i] == view)
    }

    pub fn count_owned(&self, owner: OwnerId) -> usize {
        self.owners.iter().filter(|&&o| o == owner).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec3, &Rgb8)> {
        self.points.iter().zip(self.colors.iter())
    }
}

fn check_dims<T>(r: &Raster<T>, cam: &PerspCamera) -> Result<(), ProjectionError> {
    if r.width() != cam.resolution || r.height() != cam.resolution {
        return Err(ProjectionError::Dimensions {
            expected: cam.resolution,
        });
    }
    Ok(())
}

/// Lifts every masked pixel to `position + depth · ray` with its color.
pub fn unproject(
    img: &RgbImage,
    mask: &BitMask,
    depth: &DepthMap,
    cam: &PerspCamera,
    view: u32,
    owner: OwnerId,
) -> Result<ColoredPointCloud, ProjectionError> {
    check_dims(img, cam)?;
    check_dims(mask, cam)?;
    check_dims(depth, cam)?;
    let bad: Vec<(usize, usize)> = mask
        .coords()
        .filter(|&(x, y)| !depth.get(x, y).is_finite())
        .collect();
    if let Some(&first) = bad.first() {
        return Err(ProjectionError::InfiniteDepth {
            count: bad.len(),
            first,
            pixels: bad,
        });
    }
    let frame = cam.frame();
    let mut out = ColoredPointCloud::with_capacity(mask.count());
    for (x, y) in mask.coords() {
        let p = cam.position + cam.pixel_dir_with(&frame, x, y) * *depth.get(x, y);
        out.push(p, *img.get(x, y), view, owner);
    }
    Ok(out)
}

/// Panoramic counterpart of [`unproject`]; pixels without finite depth are skipped.
pub fn unproject_pano(
    img: &RgbImage,
    mask: &BitMask,
    depth: &DepthMap,
    cam: &PanoCamera,
    view: u32,
    owner: OwnerId,
) -> ColoredPointCloud {
    let mut out = ColoredPointCloud::new();
    for (u, v) in mask.coords() {
        let d = *depth.get(u, v);
        if d.is_finite() {
            out.push(cam.center + cam.pixel_dir(u, v) * d, *img.get(u, v), view, owner);
        }
    }
    out
}

/// Result of z-buffered point rasterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    pub image: RgbImage,
    pub known: BitMask,
    /// Ray length of the winning point; `+inf` where nothing landed.
    pub depth: DepthMap,
    /// Index of the winning point; `u32::MAX` where nothing landed.
    pub winner: Raster<u32>,
}

/// Rasterizes points as disks of `radius` pixels; nearest point wins and
/// equal depths resolve to the lowest point index.
pub fn splat_points<'a>(
    points: impl IntoIterator<Item = (&'a Vec3, &'a Rgb8)>,
    cam: &PerspCamera,
    radius: u32,
) -> Splat {
    let res = cam.resolution;
    let mut image = RgbImage::filled(res, res, [0, 0, 0]);
    let mut depth = DepthMap::filled(res, res, f64::INFINITY);
    let mut winner = Raster::filled(res, res, u32::MAX);
    let frame = cam.frame();
    let r = radius as i64;
    let r2 = r * r;
    let n = res as i64;
    for (i, (p, c)) in points.into_iter().enumerate() {
        let Some((x, y, d)) = cam.project_with(&frame, p) else {
            continue;
        };
        if !(x > -(r as f64) - 1.0 && y > -(r as f64) - 1.0 && x < (n + r + 1) as f64 && y < (n + r + 1) as f64) {
            continue;
        }
        let (cx, cy) = (x.floor() as i64, y.floor() as i64);
        for dy in -r..=r {
            let py = cy + dy;
            if py < 0 || py >= n {
                continue;
            }
            for dx in -r..=r {
                let px = cx + dx;
                if px < 0 || px >= n || dx * dx + dy * dy > r2 {
                    continue;
                }
                let k = py as usize * res + px as usize;
                if d < depth.data()[k] {
                    depth.data_mut()[k] = d;
                    image.data_mut()[k] = *c;
                    winner.data_mut()[k] = i as u32;
                }
            }
        }
    }
    let known = winner.map(|&w| w != u32::MAX);
    Splat {
        image,
        known,
        depth,
        winner,
    }
}

pub fn splat(pc: &ColoredPointCloud, cam: &PerspCamera, radius: u32) -> Splat {
    splat_points(pc.iter(), cam, radius)
}

/// Lifts the panorama into world space with its depth and splats it into `cam`.
pub fn reproject_pano(
    pano: &RgbImage,
    pano_depth: &DepthMap,
    pano_cam: &PanoCamera,
    cam: &PerspCamera,
    radius: u32,
) -> (RgbImage, BitMask) {
    let mut pts = Vec::with_capacity(pano.len());
    let mut cols = Vec::with_capacity(pano.len());
    for v in 0..pano.height() {
        for u in 0..pano.width() {
            let d = *pano_depth.get(u, v);
            if d.is_finite() {
                pts.push(pano_cam.center + pano_cam.pixel_dir(u, v) * d);
                cols.push(*pano.get(u, v));
            }
        }
    }
    let s = splat_points(pts.iter().zip(cols.iter()), cam, radius);
    (s.image, s.known)
}

/// Pixels where splatted texture lies behind the true surface by more than `eps`.
pub fn stale_texture_mask(splat_depth: &DepthMap, gt_depth: &DepthMap, eps: f64) -> BitMask {
    splat_depth.zip_map(gt_depth, |&s, &g| s.is_finite() && s > g + eps)
}

/// Set union as concatenation; provenance is carried along unchanged.
pub fn merge_cloud(base: &ColoredPointCloud, add: &ColoredPointCloud) -> ColoredPointCloud {
    let mut out = ColoredPointCloud::with_capacity(base.len() + add.len());
    out.extend_from(base);
    out.extend_from(add);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cam() -> PerspCamera {
        PerspCamera::look_at(Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0), 50.0, 32).unwrap()
    }

    #[test]
    fn single_center_pixel_unprojects_along_the_view_ray() {
        let c = cam();
        let img = RgbImage::filled(32, 32, [9, 8, 7]);
        let mask = BitMask::from_fn(32, 32, |x, y| x == 16 && y == 16);
        let depth = DepthMap::filled(32, 32, 2.0);
        let pc = unproject(&img, &mask, &depth, &c, 3, 1).unwrap();
        assert_eq!(pc.len(), 1);
        let expected = c.position + c.pixel_dir(16, 16) * 2.0;
        assert!((pc.points[0] - expected).norm() < 1e-15);
        assert_eq!((pc.colors[0], pc.views[0], pc.owners[0]), ([9, 8, 7], 3, 1));
    }

    #[test]
    fn empty_mask_gives_empty_cloud() {
        let c = cam();
        let pc = unproject(
            &RgbImage::filled(32, 32, [0; 3]),
            &BitMask::filled(32, 32, false),
            &DepthMap::filled(32, 32, f64::INFINITY),
            &c,
            0,
            0,
        )
        .unwrap();
        assert!(pc.is_empty());
    }

    #[test]
    fn infinite_depth_under_mask_is_reported() {
        let c = cam();
        let mut depth = DepthMap::filled(32, 32, 1.0);
        depth.set(4, 5, f64::INFINITY);
        let err = unproject(
            &RgbImage::filled(32, 32, [0; 3]),
            &BitMask::filled(32, 32, true),
            &depth,
            &c,
            0,
            0,
        )
        .unwrap_err();
        assert!(matches!(err, ProjectionError::InfiniteDepth { count: 1, first: (4, 5), .. }));
    }

    #[test]
    fn splat_basics() {
        let c = cam();
        let s = splat(&ColoredPointCloud::new(), &c, 1);
        assert_eq!(s.known.count(), 0);

        let mut pc = ColoredPointCloud::new();
        let ray = c.pixel_dir(10, 20);
        pc.push(c.position + ray * 2.0, [200, 0, 0], 0, 0);
        pc.push(c.position + ray * 1.0, [0, 200, 0], 0, 0);
        let s = splat(&pc, &c, 0);
        assert_eq!(s.known.count(), 1);
        assert_eq!(*s.image.get(10, 20), [0, 200, 0]);
        assert_eq!(*s.winner.get(10, 20), 1);
        assert_eq!(splat(&pc, &c, 1).known.count(), 5);
    }

    #[test]
    fn equal_depth_ties_go_to_the_lower_index() {
        let c = cam();
        let p = c.position + c.pixel_dir(3, 3) * 1.5;
        let mut pc = ColoredPointCloud::new();
        pc.push(p, [1, 1, 1], 0, 0);
        pc.push(p, [2, 2, 2], 0, 0);
        assert_eq!(*splat(&pc, &c, 0).image.get(3, 3), [1, 1, 1]);
    }

    #[test]
    fn stale_mask_threshold() {
        let gt = DepthMap::filled(4, 4, 1.0);
        assert_eq!(stale_texture_mask(&gt, &gt, 0.01).count(), 0);
        let mut s = gt.clone();
        s.set(2, 1, 2.0);
        let m = stale_texture_mask(&s, &gt, 0.01);
        assert_eq!(m.coords().collect::<Vec<_>>(), vec![(2, 1)]);
    }

    #[test]
    fn merge_is_concatenation() {
        let mut a = ColoredPointCloud::new();
        a.push(Vec3::x(), [1, 2, 3], 0, 1);
        let mut b = ColoredPointCloud::new();
        b.push(Vec3::y(), [4, 5, 6], 1, 2);
        b.push(Vec3::z(), [7, 8, 9], 1, 2);
        assert_eq!(merge_cloud(&ColoredPointCloud::new(), &b), b);
        let m = merge_cloud(&a, &b);
        assert_eq!(m.len(), a.len() + b.len());
        assert_eq!(m.owned_by(2), b);
    }
}
