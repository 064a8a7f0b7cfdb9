//! Files: PLY clouds and meshes, project directories.

pub mod ply;
pub mod project;

pub use ply::{export_mesh, export_ply, import_mesh, import_ply, PlyCloud, PlyError};
pub use project::{
    build_scene, load_project, save_project, BackendConfig, ObjectSpec, Project, ProjectError, SceneSpec,
    ScorerConfig, ShapeSpec,
};
