use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::{any_perpendicular, Vec3};

pub const DEFAULT_PANO_HEIGHT: usize = 1024;
pub const DEFAULT_PERSP_RESOLUTION: usize = 1024;
pub const DEFAULT_FOCAL: f64 = 500.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CameraError {
    #[error("camera position coincides with its target")]
    ZeroViewDirection,
    #[error("focal length must be > 0, got {0}")]
    Focal(f64),
    #[error("resolution must be > 0")]
    Resolution,
}

/// Room-centered equirectangular camera.
///
/// Column `u` spans azimuth `[-π, π)` measured from `+x` toward `+y` (plus the
/// yaw offset); row `v` spans polar angle `[0, π]` measured from `+z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanoCamera {
    pub center: Vec3,
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub yaw: f64,
}

impl PanoCamera {
    pub fn new(center: Vec3, height: usize) -> Self {
        Self {
            center,
            width: 2 * height,
            height,
            yaw: 0.0,
        }
    }

    /// Unit ray through the center of pixel `(u, v)`.
    pub fn pixel_dir(&self, u: usize, v: usize) -> Vec3 {
        self.dir_at(u as f64 + 0.5, v as f64 + 0.5)
    }

    /// Unit ray at continuous image coordinates (pixel `i` spans `[i, i+1)`).
    pub fn dir_at(&self, u: f64, v: f64) -> Vec3 {
        let azimuth = -PI + TAU * u / self.width as f64 + self.yaw;
        let polar = PI * v / self.height as f64;
        let (sp, cp) = polar.sin_cos();
        let (sa, ca) = azimuth.sin_cos();
        Vec3::new(sp * ca, sp * sa, cp)
    }

    /// Continuous image coordinates of a direction; inverse of [`Self::dir_at`].
    pub fn dir_to_coords(&self, dir: &Vec3) -> (f64, f64) {
        let d = dir.normalize();
        let polar = d.z.clamp(-1.0, 1.0).acos();
        let azimuth = (d.y.atan2(d.x) - self.yaw + PI).rem_euclid(TAU);
        (
            azimuth / TAU * self.width as f64,
            polar / PI * self.height as f64,
        )
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Pinhole camera with square images; depth is Euclidean ray length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerspCamera {
    pub position: Vec3,
    pub target: Vec3,
    pub up: Vec3,
    pub focal: f64,
    pub resolution: usize,
}

/// Orthonormal camera frame: image x follows `right`, image y follows `-up`.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

impl PerspCamera {
    pub fn look_at(position: Vec3, target: Vec3, focal: f64, resolution: usize) -> Result<Self, CameraError> {
        let cam = Self {
            position,
            target,
            up: Vec3::z(),
            focal,
            resolution,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if !((self.target - self.position).norm() > 1e-12) {
            return Err(CameraError::ZeroViewDirection);
        }
        if !(self.focal > 0.0 && self.focal.is_finite()) {
            return Err(CameraError::Focal(self.focal));
        }
        if self.resolution == 0 {
            return Err(CameraError::Resolution);
        }
        Ok(())
    }

    pub fn with_focal(mut self, focal: f64) -> Self {
        self.focal = focal;
        self
    }

    pub fn forward(&self) -> Vec3 {
        (self.target - self.position).normalize()
    }

    /// Camera frame; the up hint is replaced when parallel to the view axis.
    pub fn frame(&self) -> CameraFrame {
        let forward = self.forward();
        let mut right = forward.cross(&self.up);
        if right.norm() < 1e-9 {
            right = forward.cross(&any_perpendicular(&forward));
            if right.norm() < 1e-9 {
                right = any_perpendicular(&forward);
            }
        }
        let right = right.normalize();
        let up = right.cross(&forward);
        CameraFrame { right, up, forward }
    }

    fn principal(&self) -> f64 {
        self.resolution as f64 / 2.0
    }

    /// Unit ray through the center of pixel `(x, y)`.
    pub fn pixel_dir(&self, x: usize, y: usize) -> Vec3 {
        self.pixel_dir_with(&self.frame(), x, y)
    }

    #[inline]
    pub fn pixel_dir_with(&self, f: &CameraFrame, x: usize, y: usize) -> Vec3 {
        let c = self.principal();
        let px = x as f64 + 0.5 - c;
        let py = y as f64 + 0.5 - c;
        (f.forward * self.focal + f.right * px - f.up * py).normalize()
    }

    /// Continuous image coordinates and ray length of a world point, if it is
    /// in front of the camera.
    #[inline]
    pub fn project_with(&self, f: &CameraFrame, p: &Vec3) -> Option<(f64, f64, f64)> {
        let rel = p - self.position;
        let z = rel.dot(&f.forward);
        if z <= 1e-9 {
            return None;
        }
        let c = self.principal();
        let x = c + self.focal * rel.dot(&f.right) / z;
        let y = c - self.focal * rel.dot(&f.up) / z;
        Some((x, y, rel.norm()))
    }

    pub fn project(&self, p: &Vec3) -> Option<(f64, f64, f64)> {
        self.project_with(&self.frame(), p)
    }

    /// Pixel containing the projection of `p`, if inside the image.
    pub fn project_pixel(&self, p: &Vec3) -> Option<(usize, usize, f64)> {
        let (x, y, d) = self.project(p)?;
        let r = self.resolution as f64;
        if x >= 0.0 && y >= 0.0 && x < r && y < r {
            Some((x as usize, y as usize, d))
        } else {
            None
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.resolution * self.resolution
    }
}
