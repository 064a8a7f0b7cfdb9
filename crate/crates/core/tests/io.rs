mod common;

use std::fs;
use std::sync::Mutex;

use scenepaint_core::geometry::Vec3;
use scenepaint_core::io::ply::{cloud_to_bytes, read_cloud, CLOUD_RECORD_BYTES};
use scenepaint_core::io::{export_ply, import_ply, load_project, save_project, PlyError, Project};
use scenepaint_core::painter::{MockPainter, NullScorer};
use scenepaint_core::pipeline::{texture_scene, JobState, NoopObserver, Observer};
use scenepaint_core::projection::ColoredPointCloud;

use common::*;

fn random_cloud(n: usize, owners: u16, seed: u64) -> ColoredPointCloud {
    let mut rng = Lcg(seed);
    let mut cloud = ColoredPointCloud::new();
    for _ in 0..n {
        // Stored precision is f32.
        let mut c = || (rng.unit() * 8.0 - 4.0) as f32 as f64;
        let p = Vec3::new(c(), c(), c());
        cloud.points.push(p);
        cloud.colors.push([rng.below(256) as u8, rng.below(256) as u8, rng.below(256) as u8]);
        cloud.views.push(0);
        cloud.owners.push(rng.below(owners as usize) as u16);
    }
    cloud
}

#[test]
fn ply_round_trip_is_field_equal() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cloud.ply");
    let cloud = random_cloud(10_000, 3, 11);
    let names: Vec<String> = ["room", "bed", "my table"].map(String::from).to_vec();
    export_ply(&path, &cloud, &names).unwrap();
    let back = import_ply(&path).unwrap();
    assert_eq!(back.owner_names, names);
    assert_eq!(back.cloud.points, cloud.points);
    assert_eq!(back.cloud.colors, cloud.colors);
    assert_eq!(back.cloud.owners, cloud.owners);
    assert_eq!(fs::read(&path).unwrap(), cloud_to_bytes(&back.cloud, &back.owner_names));
}

#[test]
fn one_point_file_layout() {
    let cloud = random_cloud(1, 1, 2);
    let bytes = cloud_to_bytes(&cloud, &["room".into()]);
    let text = String::from_utf8_lossy(&bytes);
    assert!(text.contains("element vertex 1\n"));
    let header_len = text.find("end_header\n").unwrap() + "end_header\n".len();
    assert_eq!(bytes.len() - header_len, CLOUD_RECORD_BYTES);
    assert_eq!(CLOUD_RECORD_BYTES, 17);
    assert_eq!(read_cloud(&bytes[..]).unwrap().cloud.len(), 1);
}

#[test]
fn empty_cloud_export_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let err = export_ply(&dir.path().join("x.ply"), &ColoredPointCloud::new(), &[]).unwrap_err();
    assert!(matches!(err, PlyError::EmptyCloud));
}

fn snapshot(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = walk(dir)
        .into_iter()
        .map(|p| (p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap().flatten() {
        let p = entry.path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

struct FirstCheckpoint(Mutex<Option<JobState>>);

impl Observer for FirstCheckpoint {
    fn checkpoint(&self, state: &JobState, _object_done: bool) {
        let mut slot = self.0.lock().unwrap();
        if slot.is_none() && state.current.is_some() {
            *slot = Some(state.clone());
        }
    }
}

#[test]
fn project_save_load_save_is_byte_stable_and_resumable() {
    let scene = two_box_scene();
    let mut project = Project::new(scene.clone(), 42);
    project.pipeline = small_config();
    let observer = FirstCheckpoint(Mutex::new(None));
    let full = texture_scene(&scene, &MockPainter, &NullScorer, &project.pipeline, 42, &observer, None).unwrap();
    project.checkpoint = observer.0.lock().unwrap().take();
    assert!(project.checkpoint.is_some());
    project.result = Some(full.clone());

    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    save_project(&project, a.path()).unwrap();
    let loaded = load_project(a.path()).unwrap();
    assert_eq!(loaded, project);
    save_project(&loaded, b.path()).unwrap();
    assert_eq!(snapshot(a.path()), snapshot(b.path()));

    // The stored mid-object checkpoint resumes to the same result.
    let resumed = texture_scene(
        &loaded.scene,
        &MockPainter,
        &NullScorer,
        &loaded.pipeline,
        loaded.seed,
        &NoopObserver,
        loaded.checkpoint.clone(),
    )
    .unwrap();
    assert_eq!(resumed, full);

    // Dropping the result removes its sidecar.
    let mut bare = loaded;
    bare.result = None;
    save_project(&bare, a.path()).unwrap();
    assert!(!a.path().join("result.bin").exists());
    assert_eq!(load_project(a.path()).unwrap().result, None);
}

#[test]
fn missing_sidecar_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    save_project(&Project::new(two_box_scene(), 1), dir.path()).unwrap();
    fs::remove_file(dir.path().join("meshes/bed.bin")).unwrap();
    let err = load_project(dir.path()).unwrap_err();
    assert!(err.to_string().contains("meshes/bed.bin"), "{err}");
}
