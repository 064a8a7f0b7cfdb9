//! Request and response bodies.

use serde::{Deserialize, Serialize};

use scenepaint_core::geometry::Vec3;
use scenepaint_core::pipeline::{EditOutcome, ProgressEvent, Stage};
use scenepaint_core::projection::PerspCamera;
use scenepaint_core::scene::{RoomSpec, ScenePrompts};

pub const REVISION_HEADER: &str = "x-scene-revision";

/// Preview resolution when the camera string gives none.
pub const DEFAULT_PREVIEW_RESOLUTION: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub id: String,
    pub description: String,
    pub min: Vec3,
    pub max: Vec3,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescriptor {
    pub revision: u64,
    pub seed: u64,
    pub room: RoomSpec,
    pub prompts: ScenePrompts,
    pub objects: Vec<ObjectSummary>,
    pub textured: bool,
    pub room_points: usize,
    pub total_points: usize,
    /// A stored checkpoint that `resume` would continue from.
    pub resumable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobKind {
    Texture,
    Edit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JobPhase {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobPhase {
    pub fn is_finished(self) -> bool {
        matches!(self, JobPhase::Done | JobPhase::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub id: u64,
    pub kind: JobKind,
    pub phase: JobPhase,
    pub stage: Option<Stage>,
    pub object_id: Option<String>,
    pub view_index: Option<u32>,
    /// Never decreases for a given job.
    pub percent: f64,
    /// Unix time of the last update, in milliseconds.
    pub updated_ms: u64,
    pub error: Option<String>,
    /// Scene revision produced by the job, once done.
    pub revision: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TextureRequest {
    #[serde(default)]
    pub seed: Option<u64>,
    /// Continue from the stored checkpoint if there is one.
    #[serde(default)]
    pub resume: bool,
    /// `mock` or a backend base URL; the project's backend when absent.
    #[serde(default)]
    pub backend: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobAccepted {
    pub job_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditResponse {
    pub job_id: u64,
    /// Position of this mutation in the service's execution order.
    pub sequence: u64,
    pub revision: u64,
    pub outcome: EditOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    /// Machine-readable code such as `rejected` or `conflict`.
    pub error: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceEvent {
    pub job_id: u64,
    pub phase: JobPhase,
    pub revision: u64,
    #[serde(flatten)]
    pub progress: ProgressEvent,
}

/// `px,py,pz,tx,ty,tz[,focal[,resolution]]`. Without a focal the field of
/// view matches the planner's default cameras.
pub fn parse_camera(s: &str) -> Result<PerspCamera, String> {
    let nums = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("not a number: {t:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    if !(6..=8).contains(&nums.len()) {
        return Err(format!("expected 6 to 8 comma-separated numbers, got {}", nums.len()));
    }
    let resolution = match nums.get(7) {
        Some(&r) if r >= 1.0 && r.fract() == 0.0 && r <= 4096.0 => r as usize,
        Some(r) => return Err(format!("bad resolution {r}")),
        None => DEFAULT_PREVIEW_RESOLUTION,
    };
    let focal = nums.get(6).copied().unwrap_or(500.0 * resolution as f64 / 1024.0);
    let position = Vec3::new(nums[0], nums[1], nums[2]);
    let target = Vec3::new(nums[3], nums[4], nums[5]);
    PerspCamera::look_at(position, target, focal, resolution).map_err(|e| e.to_string())
}

pub fn format_camera(cam: &PerspCamera) -> String {
    let (p, t) = (cam.position, cam.target);
    format!("{},{},{},{},{},{},{},{}", p.x, p.y, p.z, t.x, t.y, t.z, cam.focal, cam.resolution)
}
