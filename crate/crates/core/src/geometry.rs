//! Small geometric vocabulary shared by every module.

use nalgebra::{Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;

/// Axis-aligned bounding box in world coordinates (meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut bb = Self::empty();
        for p in points {
            bb.grow(p);
        }
        bb
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }

    /// Closed containment with a small tolerance for round-off.
    pub fn contains_aabb(&self, other: &Aabb, tol: f64) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] - tol && other.max[i] <= self.max[i] + tol)
    }

    pub fn contains_point(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Euclidean distance from a point to the box (zero inside).
    pub fn distance_to(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d2 += v * v;
        }
        d2.sqrt()
    }

    /// Slab test; returns the entry parameter if the ray hits the box.
    pub fn ray_hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let inv = 1.0 / dir[i];
            let mut ta = (self.min[i] - origin[i]) * inv;
            let mut tb = (self.max[i] - origin[i]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            // NaN (0 * inf) means the ray is parallel and on the slab plane.
            if !ta.is_nan() {
                t0 = t0.max(ta);
            }
            if !tb.is_nan() {
                t1 = t1.min(tb);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Rigid transform with uniform scale: `world = rotation * (scale * local) + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl Default for Similarity {
    fn default() -> Self {
        Self::identity()
    }
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self {
            translation: t,
            ..Self::identity()
        }
    }

    pub fn with_yaw(mut self, yaw: f64) -> Self {
        self.rotation = UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw);
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * (p * self.scale) + self.translation
    }

    /// Rotation part as a matrix, convenient for bulk point transforms.
    pub fn rotation_matrix(&self) -> Rotation3<f64> {
        self.rotation.to_rotation_matrix()
    }
}

/// Rotation by `angle` about the vertical axis.
pub fn yaw_rotation(angle: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vec3::z_axis(), angle)
}

/// Any unit vector perpendicular to `v`.
pub fn any_perpendicular(v: &Vec3) -> Vec3 {
    let helper = if v.z.abs() < 0.9 { Vec3::z() } else { Vec3::y() };
    v.cross(&helper).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aabb_ray_hit_and_distance() {
        let bb = Aabb {
            min: Vec3::new(-1.0, -1.0, -1.0),
            max: Vec3::new(1.0, 1.0, 1.0),
        };
        let t = bb.ray_hit(&Vec3::new(-5.0, 0.0, 0.0), &Vec3::x()).unwrap();
        assert!((t - 4.0).abs() < 1e-12);
        assert!(bb.ray_hit(&Vec3::new(-5.0, 2.0, 0.0), &Vec3::x()).is_none());
        assert_eq!(bb.distance_to(&Vec3::zeros()), 0.0);
        assert!((bb.distance_to(&Vec3::new(4.0, 0.0, 0.0)) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_applies_scale_then_rotation_then_translation() {
        let s = Similarity::from_translation(Vec3::new(1.0, 0.0, 0.0))
            .with_yaw(std::f64::consts::FRAC_PI_2)
            .with_scale(2.0);
        let p = s.apply(&Vec3::new(1.0, 0.0, 0.0));
        assert!((p - Vec3::new(1.0, 2.0, 0.0)).norm() < 1e-12);
    }
}
