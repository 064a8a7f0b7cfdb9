//! Camera selection for object texturing and room refinement.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec3};
use crate::projection::camera::{DEFAULT_FOCAL, DEFAULT_PERSP_RESOLUTION};
use crate::projection::{CameraError, PerspCamera, Tracer};
use crate::scene::{object_aspect_ratio, ObjectInstance, RoomSpec, SceneError, TriMesh};

pub const FOCAL_STEP: f64 = 1.1;
pub const BASIC_RADIUS_FACTOR: f64 = 1.1;
pub const ADDITIONAL_RADIUS_FACTOR: f64 = 0.7;
pub const MIN_STANDOFF: f64 = 0.3;
pub const SPLIT_ASPECT_RATIO: f64 = 1.5;
pub const ELEVATION_RANGE: (f64, f64) = (FRAC_PI_6, FRAC_PI_3);
/// Projected object width the initial view aims for, as a fraction of the image.
pub const INITIAL_WIDTH_FRACTION: f64 = 0.5;
/// Smallest span of the floor/ceiling in a refinement view, as a fraction of the image.
pub const REFINEMENT_SPAN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("object {id} is (partly) behind the panorama camera")]
    BehindCamera { id: String },
    #[error("camera position {0:?} is not strictly inside the room")]
    CameraOutsideRoom(Vec3),
    #[error("no camera for object {id} survives room and standoff filtering")]
    NoViews { id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewRole {
    Initial,
    Basic,
    AdditionalGroup0,
    AdditionalGroup1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannedView {
    pub camera: PerspCamera,
    pub role: ViewRole,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewPlan {
    pub object_id: String,
    pub initial: PerspCamera,
    /// Views after the initial one, in visit order.
    pub views: Vec<PlannedView>,
    /// Candidate count before room/standoff filtering.
    pub candidates: usize,
    /// Candidates removed by filtering, in generation order.
    pub dropped: Vec<PlannedView>,
}

impl ViewPlan {
    /// Initial camera followed by the planned views; index = view index.
    pub fn cameras(&self) -> Vec<PerspCamera> {
        std::iter::once(self.initial)
            .chain(self.views.iter().map(|v| v.camera))
            .collect()
    }

    /// Keeps only the first `n` views after the initial one.
    pub fn truncated(mut self, n: usize) -> Self {
        self.views.truncate(n);
        self
    }
}

fn projected_bounds(cam: &PerspCamera, corners: &[Vec3; 8]) -> Option<(f64, f64, f64, f64)> {
    let frame = cam.frame();
    let mut b = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in corners {
        let (x, y, _) = cam.project_with(&frame, c)?;
        b = (b.0.min(x), b.1.min(y), b.2.max(x), b.3.max(y));
    }
    Some(b)
}

fn fits(cam: &PerspCamera, corners: &[Vec3; 8]) -> bool {
    let r = cam.resolution as f64;
    projected_bounds(cam, corners).is_some_and(|(x0, y0, x1, y1)| x0 >= 0.0 && y0 >= 0.0 && x1 <= r && y1 <= r)
}

fn projected_width(cam: &PerspCamera, corners: &[Vec3; 8]) -> f64 {
    projected_bounds(cam, corners).map_or(0.0, |(x0, _, x1, _)| x1 - x0)
}

/// Camera at `pano_center` aimed at the object's AABB center. The focal length
/// grows from 500 px in ×1.1 steps until the projected AABB is at least half
/// the image wide, stopping early if the next step would push the box out of
/// the image. Objects that do not fit at 500 px step the focal down instead.
pub fn initial_view(obj: &ObjectInstance, room: &RoomSpec, pano_center: Vec3) -> Result<PerspCamera, PlanError> {
    if !room.strictly_contains(&pano_center) {
        return Err(PlanError::CameraOutsideRoom(pano_center));
    }
    let bb = obj.aabb();
    let mut cam = PerspCamera::look_at(pano_center, bb.center(), DEFAULT_FOCAL, DEFAULT_PERSP_RESOLUTION)?;
    let corners = bb.corners();
    if projected_bounds(&cam, &corners).is_none() {
        return Err(PlanError::BehindCamera { id: obj.id.clone() });
    }
    let target = INITIAL_WIDTH_FRACTION * cam.resolution as f64;
    if fits(&cam, &corners) {
        while projected_width(&cam, &corners) < target {
            let next = cam.with_focal(cam.focal * FOCAL_STEP);
            if !fits(&next, &corners) {
                break;
            }
            cam = next;
        }
    } else {
        while !fits(&cam, &corners) && cam.focal > 1e-3 {
            cam = cam.with_focal(cam.focal / FOCAL_STEP);
        }
    }
    Ok(cam)
}

fn spherical(center: Vec3, radius: f64, polar: f64, azimuth: f64) -> Vec3 {
    center + radius * Vec3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos())
}

/// All candidate views before filtering, in visit order.
pub fn candidate_views(obj: &ObjectInstance, rng_seed: u64) -> Result<Vec<PlannedView>, PlanError> {
    let bb = obj.aabb();
    let (c, diag) = (bb.center(), bb.diagonal());
    let ratio = object_aspect_ratio(obj)?;
    let mut out = Vec::new();
    let mut push = |pos: Vec3, target: Vec3, role| -> Result<(), PlanError> {
        let camera = PerspCamera::look_at(pos, target, DEFAULT_FOCAL, DEFAULT_PERSP_RESOLUTION)?;
        out.push(PlannedView { camera, role });
        Ok(())
    };
    for polar in [FRAC_PI_4, 3.0 * FRAC_PI_4] {
        for k in 0..4 {
            let az = FRAC_PI_4 + k as f64 * FRAC_PI_2;
            push(spherical(c, BASIC_RADIUS_FACTOR * diag, polar, az), c, ViewRole::Basic)?;
        }
    }
    let groups: Vec<(Vec3, ViewRole)> = if ratio < SPLIT_ASPECT_RATIO {
        vec![(c, ViewRole::AdditionalGroup0)]
    } else {
        let offset = obj.long_axis() * (obj.footprint().0 / 3.0);
        vec![
            (c + offset, ViewRole::AdditionalGroup0),
            (c - offset, ViewRole::AdditionalGroup1),
        ]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let radius = ADDITIONAL_RADIUS_FACTOR * diag;
    for (gc, role) in groups {
        for sign in [1.0, -1.0] {
            for k in 0..4 {
                let elevation: f64 = rng.random_range(ELEVATION_RANGE.0..=ELEVATION_RANGE.1);
                let az = k as f64 * FRAC_PI_2;
                push(spherical(gc, radius, FRAC_PI_2 - sign * elevation, az), gc, role)?;
            }
        }
    }
    Ok(out)
}

/// Initial view plus the basic and additional views that lie strictly inside
/// the room and at least [`MIN_STANDOFF`] from the object's AABB.
pub fn plan_views(obj: &ObjectInstance, room: &RoomSpec, rng_seed: u64) -> Result<ViewPlan, PlanError> {
    obj.validate()?;
    let initial = initial_view(obj, room, room.center())?;
    let bb = obj.aabb();
    let all = candidate_views(obj, rng_seed)?;
    let candidates = all.len();
    let (views, dropped): (Vec<_>, Vec<_>) = all.into_iter().partition(|v| {
        room.strictly_contains(&v.camera.position) && bb.distance_to(&v.camera.position) >= MIN_STANDOFF
    });
    if views.is_empty() {
        return Err(PlanError::NoViews { id: obj.id.clone() });
    }
    Ok(ViewPlan {
        object_id: obj.id.clone(),
        initial,
        views,
        candidates,
        dropped,
    })
}

/// Largest focal `500 · 1.1^k` (integer k) at which a centered span of
/// `span` meters at distance `dist` still fits in `resolution` pixels.
pub fn fitting_focal(span: f64, dist: f64, resolution: usize) -> f64 {
    let limit = resolution as f64 * dist / span;
    let mut k = (limit / DEFAULT_FOCAL).ln() / FOCAL_STEP.ln();
    k = k.floor();
    let mut f = DEFAULT_FOCAL * FOCAL_STEP.powi(k as i32);
    // Guard the boundary against round-off in the logarithms.
    while f * span / dist > resolution as f64 {
        f /= FOCAL_STEP;
    }
    while f * FOCAL_STEP * span / dist <= resolution as f64 {
        f *= FOCAL_STEP;
    }
    f
}

/// Overhead (floor) and upward (ceiling) cameras at the room center.
pub fn refinement_views(room: &RoomSpec) -> Result<(PerspCamera, PerspCamera), PlanError> {
    let c = room.center();
    let span = room.width.max(room.depth);
    let focal = fitting_focal(span, room.height / 2.0, DEFAULT_PERSP_RESOLUTION);
    let down = PerspCamera::look_at(c, Vec3::new(c.x, c.y, 0.0), focal, DEFAULT_PERSP_RESOLUTION)?;
    let up = PerspCamera::look_at(c, Vec3::new(c.x, c.y, room.height), focal, DEFAULT_PERSP_RESOLUTION)?;
    Ok((down, up))
}

/// Area-weighted uniform samples on a mesh surface.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Vec<Vec3> {
    let tris = mesh.triangles().len();
    if tris == 0 || n == 0 {
        return Vec::new();
    }
    let mut cumulative = Vec::with_capacity(tris);
    let mut acc = 0.0;
    for t in 0..tris {
        acc += mesh.triangle_area(t);
        cumulative.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let pick = rng.random::<f64>() * acc;
            let t = cumulative.partition_point(|&c| c < pick).min(tris - 1);
            let [a, b, c] = mesh.triangle(t);
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect()
}

/// Whether `p` is inside `cam`'s image and not occluded by anything in `tracer`.
pub fn visible_from(tracer: &Tracer, cam: &PerspCamera, p: &Vec3, tol: f64) -> bool {
    if cam.project_pixel(p).is_none() {
        return false;
    }
    let rel = p - cam.position;
    let dist = rel.norm();
    match tracer.cast(&cam.position, &(rel / dist)) {
        Some(hit) => hit.t >= dist - tol,
        None => true,
    }
}

/// Fraction of `samples` not visible from any of `cameras`.
pub fn uncovered_fraction(tracer: &Tracer, cameras: &[PerspCamera], samples: &[Vec3]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let hidden = samples
        .iter()
        .filter(|p| !cameras.iter().any(|c| visible_from(tracer, c, p, 1e-6)))
        .count();
    hidden as f64 / samples.len() as f64
}

/// Azimuth of `p` around `center` in `[0, 2π)`.
pub fn azimuth(center: &Vec3, p: &Vec3) -> f64 {
    (p.y - center.y).atan2(p.x - center.x).rem_euclid(2.0 * PI)
}

/// True if the ray from `cam` toward its target passes through `bb`.
pub fn looks_at_box(cam: &PerspCamera, bb: &Aabb) -> bool {
    bb.ray_hit(&cam.position, &cam.forward()).is_some()
}
