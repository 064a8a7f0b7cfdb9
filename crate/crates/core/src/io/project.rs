//! Project directories: a JSON project file plus digest-checked binary sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ply::{import_mesh, PlyError};
use crate::geometry::{Similarity, Vec3};
use crate::painter::{MockPainter, NullScorer, Painter, RemoteConfig, RemotePainter, RemoteScorer, Scorer};
use crate::pipeline::{JobState, PipelineConfig, TexturedScene};
use crate::scene::{ObjectInstance, RoomSpec, Scene, SceneError, ScenePrompts, TriMesh};

pub const PROJECT_VERSION: u32 = 1;
pub const PROJECT_FILE: &str = "project.json";
pub const ENV_BACKEND_URL: &str = "SCENEPAINT_BACKEND_URL";
pub const ENV_API_KEY: &str = "SCENEPAINT_API_KEY";

const INTERIOR_FILE: &str = "interior.bin";
const MESH_DIR: &str = "meshes";
const CHECKPOINT_FILE: &str = "checkpoint.bin";
const RESULT_FILE: &str = "result.bin";

#[derive(Debug, thiserror::Error)]
pub enum ProjectError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("unsupported project version {0} (expected {PROJECT_VERSION})")]
    UnknownVersion(u32),
    #[error("sidecar {0} is missing")]
    MissingSidecar(String),
    #[error("sidecar {0} does not match its recorded digest")]
    Digest(String),
    #[error("invalid project: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Ply(#[from] PlyError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ProjectError + '_ {
    move |source| ProjectError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendConfig {
    Mock,
    Remote(RemoteConfig),
}

impl BackendConfig {
    /// Applies the URL and API key environment overrides through `var`.
    pub fn with_env(&self, var: impl Fn(&str) -> Option<String>) -> BackendConfig {
        let mut out = self.clone();
        if let Some(url) = var(ENV_BACKEND_URL).filter(|u| !u.is_empty()) {
            out = match out {
                BackendConfig::Remote(mut rc) => {
                    rc.url = url;
                    BackendConfig::Remote(rc)
                }
                BackendConfig::Mock => BackendConfig::Remote(RemoteConfig::new(url)),
            };
        }
        if let BackendConfig::Remote(rc) = &mut out {
            if let Some(key) = var(ENV_API_KEY).filter(|k| !k.is_empty()) {
                rc.api_key = Some(key);
            }
        }
        out
    }

    pub fn from_env(&self) -> BackendConfig {
        self.with_env(|k| std::env::var(k).ok())
    }

    pub fn painter(&self) -> Box<dyn Painter> {
        match self {
            BackendConfig::Mock => Box::new(MockPainter::new()),
            BackendConfig::Remote(rc) => Box::new(RemotePainter::new(rc.clone())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScorerConfig {
    #[default]
    Null,
    Remote(RemoteConfig),
}

impl ScorerConfig {
    pub fn scorer(&self) -> Box<dyn Scorer> {
        match self {
            ScorerConfig::Null => Box::new(NullScorer),
            ScorerConfig::Remote(rc) => {
                let mut rc = rc.clone();
                if rc.api_key.is_none() {
                    rc.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
                }
                Box::new(RemoteScorer::new(rc))
            }
        }
    }
}

/// In-memory project.
#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub version: u32,
    pub seed: u64,
    pub backend: BackendConfig,
    pub scorer: ScorerConfig,
    pub pipeline: PipelineConfig,
    /// Export directory, relative to the project directory.
    pub output_dir: String,
    pub scene: Scene,
    pub checkpoint: Option<JobState>,
    pub result: Option<TexturedScene>,
}

impl Project {
    pub fn new(scene: Scene, seed: u64) -> Self {
        Self {
            version: PROJECT_VERSION,
            seed,
            backend: BackendConfig::Mock,
            scorer: ScorerConfig::Null,
            pipeline: PipelineConfig::default(),
            output_dir: "output".into(),
            scene,
            checkpoint: None,
            result: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProjectError> {
        if self.version != PROJECT_VERSION {
            return Err(ProjectError::UnknownVersion(self.version));
        }
        self.scene.validate()?;
        if let Some(ts) = &self.result {
            if ts.scene != self.scene {
                return Err(ProjectError::Invalid("textured result belongs to a different scene".into()));
            }
            ts.check_owners().map_err(ProjectError::Invalid)?;
            if !ts.cloud.is_consistent() {
                return Err(ProjectError::Invalid("point cloud arrays differ in length".into()));
            }
            let (w, h) = (ts.pano_camera.height * 2, ts.pano_camera.height);
            if ts.panorama.dims() != (w, h) || ts.empty_panorama.dims() != (w, h) {
                return Err(ProjectError::Invalid("panorama size does not match the panorama camera".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ObjectDoc {
    id: String,
    description: String,
    transform: Similarity,
    mesh: Sidecar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneDoc {
    room: RoomSpec,
    prompts: ScenePrompts,
    interior: Sidecar,
    objects: Vec<ObjectDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProjectDoc {
    version: u32,
    seed: u64,
    backend: BackendConfig,
    #[serde(default)]
    scorer: ScorerConfig,
    pipeline: PipelineConfig,
    output_dir: String,
    scene: SceneDoc,
    #[serde(default)]
    checkpoint: Option<Sidecar>,
    #[serde(default)]
    result: Option<Sidecar>,
}

fn write_sidecar<T: Serialize>(dir: &Path, file: &str, value: &T) -> Result<Sidecar, ProjectError> {
    let bytes = bincode::serialize(value).map_err(|e| ProjectError::Invalid(e.to_string()))?;
    let path = dir.join(file);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&path, &bytes).map_err(io_err(&path))?;
    Ok(Sidecar {
        file: file.to_string(),
        sha256: crate::hash::sha256_hex(&bytes),
    })
}

fn read_sidecar<T: DeserializeOwned>(dir: &Path, car: &Sidecar) -> Result<T, ProjectError> {
    if car.file.contains("..") || Path::new(&car.file).is_absolute() {
        return Err(ProjectError::Invalid(format!("sidecar path {} escapes the project", car.file)));
    }
    let path = dir.join(&car.file);
    let bytes = match fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(ProjectError::MissingSidecar(car.file.clone())),
        Err(e) => return Err(io_err(&path)(e)),
    };
    if crate::hash::sha256_hex(&bytes) != car.sha256 {
        return Err(ProjectError::Digest(car.file.clone()));
    }
    bincode::deserialize(&bytes).map_err(|e| ProjectError::Parse {
        path,
        message: e.to_string(),
    })
}

fn remove_if_present(path: &Path) -> Result<(), ProjectError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(path)(e)),
        _ => Ok(()),
    }
}

/// Writes `project.json` and its sidecars into `dir`; stale sidecars are removed.
pub fn save_project(project: &Project, dir: &Path) -> Result<(), ProjectError> {
    project.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let interior = write_sidecar(dir, INTERIOR_FILE, &project.scene.interior)?;
    let mut objects = Vec::new();
    let mut mesh_files = Vec::new();
    for o in project.scene.objects() {
        let file = format!("{MESH_DIR}/{}.bin", o.id);
        objects.push(ObjectDoc {
            id: o.id.clone(),
            description: o.description.clone(),
            transform: o.transform,
            mesh: write_sidecar(dir, &file, &o.mesh)?,
        });
        mesh_files.push(file);
    }
    let mesh_dir = dir.join(MESH_DIR);
    if let Ok(entries) = fs::read_dir(&mesh_dir) {
        for entry in entries.flatten() {
            let rel = format!("{MESH_DIR}/{}", entry.file_name().to_string_lossy());
            if !mesh_files.contains(&rel) {
                remove_if_present(&entry.path())?;
            }
        }
    }
    let checkpoint = match &project.checkpoint {
        Some(s) => Some(write_sidecar(dir, CHECKPOINT_FILE, s)?),
        None => {
            remove_if_present(&dir.join(CHECKPOINT_FILE))?;
            None
        }
    };
    let result = match &project.result {
        Some(r) => Some(write_sidecar(dir, RESULT_FILE, r)?),
        None => {
            remove_if_present(&dir.join(RESULT_FILE))?;
            None
        }
    };
    let doc = ProjectDoc {
        version: project.version,
        seed: project.seed,
        backend: project.backend.clone(),
        scorer: project.scorer.clone(),
        pipeline: project.pipeline.clone(),
        output_dir: project.output_dir.clone(),
        scene: SceneDoc {
            room: project.scene.room.clone(),
            prompts: project.scene.prompts.clone(),
            interior,
            objects,
        },
        checkpoint,
        result,
    };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| ProjectError::Invalid(e.to_string()))?;
    text.push('\n');
    let path = dir.join(PROJECT_FILE);
    fs::write(&path, text).map_err(io_err(&path))
}

pub fn load_project(dir: &Path) -> Result<Project, ProjectError> {
    let path = dir.join(PROJECT_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| ProjectError::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if let Some(v) = raw.get("version").and_then(|v| v.as_u64()) {
        if v != PROJECT_VERSION as u64 {
            return Err(ProjectError::UnknownVersion(v as u32));
        }
    }
    let doc: ProjectDoc = serde_json::from_value(raw).map_err(|e| ProjectError::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    let interior: TriMesh = read_sidecar(dir, &doc.scene.interior)?;
    let objects = doc
        .scene
        .objects
        .iter()
        .map(|o| {
            let mesh: TriMesh = read_sidecar(dir, &o.mesh)?;
            mesh.validate()?;
            Ok(ObjectInstance::new(o.id.clone(), mesh, o.transform, o.description.clone()))
        })
        .collect::<Result<Vec<_>, ProjectError>>()?;
    let scene = Scene::from_parts(doc.scene.room, interior, objects, doc.scene.prompts)?;
    let project = Project {
        version: doc.version,
        seed: doc.seed,
        backend: doc.backend,
        scorer: doc.scorer,
        pipeline: doc.pipeline,
        output_dir: doc.output_dir,
        scene,
        checkpoint: doc.checkpoint.as_ref().map(|c| read_sidecar(dir, c)).transpose()?,
        result: doc.result.as_ref().map(|c| read_sidecar(dir, c)).transpose()?,
    };
    project.validate()?;
    Ok(project)
}

/// Scene description used to create projects: a room plus objects given as
/// cuboids or mesh files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub room: RoomSpec,
    #[serde(default)]
    pub prompts: ScenePrompts,
    /// Interior mesh file; generated from `room` when absent.
    #[serde(default)]
    pub interior: Option<String>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub shape: ShapeSpec,
    #[serde(default = "Vec3::zeros")]
    pub translation: Vec3,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeSpec {
    /// Box of this size centered on the object origin.
    Cuboid([f64; 3]),
    /// PLY mesh path, relative to the spec file.
    Mesh(String),
}

/// Builds and validates the scene; relative mesh paths resolve against `base`.
pub fn build_scene(spec: &SceneSpec, base: &Path) -> Result<Scene, ProjectError> {
    let interior = match &spec.interior {
        Some(p) => import_mesh(&base.join(p))?,
        None => crate::room::generate_empty_room(&spec.room)?,
    };
    let objects = spec
        .objects
        .iter()
        .map(|o| {
            let mesh = match &o.shape {
                ShapeSpec::Cuboid(s) => TriMesh::cuboid(Vec3::new(s[0], s[1], s[2])),
                ShapeSpec::Mesh(p) => import_mesh(&base.join(p))?,
            };
            let xf = Similarity::from_translation(o.translation).with_yaw(o.yaw).with_scale(o.scale);
            Ok(ObjectInstance::new(o.id.clone(), mesh, xf, o.description.clone()))
        })
        .collect::<Result<Vec<_>, ProjectError>>()?;
    Ok(Scene::from_parts(spec.room.clone(), interior, objects, spec.prompts.clone())?)
}
