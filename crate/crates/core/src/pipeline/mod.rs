//! Scene texturing: coarse panoramas, per-object warp-and-inpaint, candidate
//! selection, resumable scene jobs and edits.

pub mod coarse;
pub mod edit;
pub mod job;
pub mod object;
pub mod select;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::hash::Fnv1a;
use crate::imaging::{EdgeParams, ImagingError};
use crate::painter::{PaintError, PaintParams, DEFAULT_CANDIDATES};
use crate::planner::PlanError;
use crate::projection::camera::{DEFAULT_PANO_HEIGHT, DEFAULT_PERSP_RESOLUTION};
use crate::projection::{
    CameraError, ColoredPointCloud, OwnerId, PanoCamera, PerspCamera, ProjectionError,
};
use crate::raster::{BitMask, RgbImage};
use crate::scene::{Scene, SceneError, ROOM_OWNER};

pub use coarse::{coarse_stage, occlusion_mask, scene_prompt, CoarseResult, RefinementPatch};
pub use edit::{apply_edit, apply_object_edit, apply_region_edit, EditCommand, EditError, EditOutcome, RegionEdit};
pub use job::{fingerprint, texture_scene, JobFailure, JobState};
pub use object::{plan_seed, step_object, texture_object, ObjectContext, ObjectRun, ObjectState, ViewRecord};
pub use select::{select_candidate, select_by_prompt, Selection, SelectionMode};

/// Room pano, floor and ceiling patches use these view indices in the room partition.
pub const PANO_VIEW: u32 = 0;
pub const FLOOR_VIEW: u32 = 1;
pub const CEILING_VIEW: u32 = 2;
/// View index of points created by region edits.
pub const EDIT_VIEW: u32 = u32::MAX;

/// Missing fields take their defaults, so partial JSON configs are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub pano_height: usize,
    /// Perspective view resolution; planned cameras are rescaled to it with
    /// their field of view preserved.
    pub view_resolution: usize,
    pub pano_yaw: f64,
    pub edges: EdgeParams,
    pub classify_window: usize,
    pub classify_threshold: f64,
    pub splat_radius: u32,
    pub stale_eps: f64,
    pub occlusion_eps: f64,
    /// Dilation radius of the scoring band around dense inpaint masks.
    pub band_radius: u32,
    pub psnr_normalizer: f64,
    pub candidates: u32,
    pub params: PaintParams,
    /// Caps the number of planned views after the initial one.
    pub max_views: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pano_height: DEFAULT_PANO_HEIGHT,
            view_resolution: DEFAULT_PERSP_RESOLUTION,
            pano_yaw: 0.0,
            edges: EdgeParams::default(),
            classify_window: 7,
            classify_threshold: 0.3,
            splat_radius: 1,
            stale_eps: 0.01,
            occlusion_eps: 0.01,
            band_radius: 8,
            psnr_normalizer: 50.0,
            candidates: DEFAULT_CANDIDATES,
            params: PaintParams::default(),
            max_views: None,
        }
    }
}

impl PipelineConfig {
    pub fn pano_camera(&self, scene: &Scene) -> PanoCamera {
        let mut cam = PanoCamera::new(scene.room.center(), self.pano_height);
        cam.yaw = self.pano_yaw;
        cam
    }

    /// Same field of view at the configured resolution.
    pub fn rescale(&self, cam: &PerspCamera) -> PerspCamera {
        let mut out = *cam;
        out.focal = cam.focal * self.view_resolution as f64 / cam.resolution as f64;
        out.resolution = self.view_resolution;
        out
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Paint(#[from] PaintError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("resume state does not match this scene: {0}")]
    StateMismatch(String),
}

/// Per-call seed: FNV-1a over (job seed, object id, view index, purpose).
pub fn call_seed(job_seed: u64, object: &str, view: u32, purpose: &str) -> u64 {
    Fnv1a::new()
        .write(&job_seed.to_le_bytes())
        .write(object.as_bytes())
        .write(&[0])
        .write(&view.to_le_bytes())
        .write(purpose.as_bytes())
        .finish()
}

/// Owner slot names; slot 0 is always the room.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnerRegistry {
    names: Vec<String>,
}

impl Default for OwnerRegistry {
    fn default() -> Self {
        Self {
            names: vec![ROOM_OWNER.to_string()],
        }
    }
}

impl OwnerRegistry {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, name: &str) -> Option<OwnerId> {
        self.names.iter().position(|n| n == name).map(|i| i as OwnerId)
    }

    pub fn name(&self, id: OwnerId) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    /// Existing slot for `name`, or a new one appended at the end.
    pub fn intern(&mut self, name: &str) -> OwnerId {
        match self.get(name) {
            Some(id) => id,
            None => {
                self.names.push(name.to_string());
                (self.names.len() - 1) as OwnerId
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Coarse,
    Object,
    Edit,
    Done,
}

/// One logged pipeline step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: u64,
    pub stage: Stage,
    pub object_id: Option<String>,
    pub view_index: Option<u32>,
    pub purpose: String,
    /// SHA-256 of the serialized paint request, if a backend was called.
    pub request_digest: Option<String>,
    /// SHA-256 over the returned candidates' pixels.
    pub response_digest: Option<String>,
    pub scores: Vec<f64>,
    pub selected: Option<usize>,
    pub new_points: usize,
    /// Source pixels of new points that fall inside the misalignment mask.
    pub misaligned_sources: usize,
    pub total_points: usize,
    /// Point count per owner slot after the step.
    pub owner_counts: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JobLog {
    pub entries: Vec<LogEntry>,
}

impl JobLog {
    pub fn backend_calls(&self) -> usize {
        self.entries.iter().filter(|e| e.request_digest.is_some()).count()
    }
}

pub fn owner_counts(cloud: &ColoredPointCloud, owners: &OwnerRegistry) -> Vec<usize> {
    let mut counts = vec![0usize; owners.names().len()];
    for &o in &cloud.owners {
        if let Some(c) = counts.get_mut(o as usize) {
            *c += 1;
        }
    }
    counts
}

/// Progress notification for subscribers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub stage: Stage,
    pub object_id: Option<String>,
    pub view_index: Option<u32>,
    pub percent: f64,
    pub scores: Vec<f64>,
    pub selected: Option<usize>,
    pub message: String,
}

/// Receives progress, per-view audit records and checkpoints. All methods
/// default to no-ops.
pub trait Observer: Send + Sync {
    fn progress(&self, _event: &ProgressEvent) {}
    fn view(&self, _record: &ViewRecord) {}
    /// Called after every accepted view; `object_done` marks object boundaries.
    fn checkpoint(&self, _state: &JobState, _object_done: bool) {}
}

pub struct NoopObserver;

impl Observer for NoopObserver {}

/// A textured scene: panoramas, refinement patches and the owner-partitioned cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TexturedScene {
    pub scene: Scene,
    pub pano_camera: PanoCamera,
    pub panorama: RgbImage,
    pub empty_panorama: RgbImage,
    pub patches: Vec<RefinementPatch>,
    pub cloud: ColoredPointCloud,
    pub owners: OwnerRegistry,
    pub log: JobLog,
    pub revision: u64,
    pub seed: u64,
}

impl TexturedScene {
    /// Every point's owner is the room or an object of the scene.
    pub fn check_owners(&self) -> Result<(), String> {
        for (i, &o) in self.cloud.owners.iter().enumerate() {
            let Some(name) = self.owners.name(o) else {
                return Err(format!("point {i} has unregistered owner slot {o}"));
            };
            if name != ROOM_OWNER && self.scene.object(name).is_none() {
                return Err(format!("point {i} is owned by missing object {name}"));
            }
        }
        Ok(())
    }

    pub fn owner_counts(&self) -> Vec<(String, usize)> {
        self.owners
            .names()
            .iter()
            .cloned()
            .zip(owner_counts(&self.cloud, &self.owners))
            .collect()
    }

    /// Points of one owner by name.
    pub fn owned(&self, name: &str) -> ColoredPointCloud {
        match self.owners.get(name) {
            Some(id) => self.cloud.owned_by(id),
            None => ColoredPointCloud::new(),
        }
    }
}

pub(crate) fn digest_images(images: &[RgbImage]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for img in images {
        h.update((img.width() as u64).to_le_bytes());
        h.update((img.height() as u64).to_le_bytes());
        for px in img.data() {
            h.update(px);
        }
    }
    hex::encode(h.finalize())
}

/// Nearest-color fill that tolerates masks with no known pixel by using mid gray.
pub(crate) fn fill_or_gray(img: &RgbImage, unknown: &BitMask) -> RgbImage {
    crate::imaging::nearest_color_fill(img, unknown).unwrap_or_else(|_| {
        let mut out = img.clone();
        for (px, &u) in out.data_mut().iter_mut().zip(unknown.data()) {
            if u {
                *px = [128, 128, 128];
            }
        }
        out
    })
}

/// Room center, the fixed panorama position.
pub fn pano_center(scene: &Scene) -> Vec3 {
    scene.room.center()
}
