//! Whole-scene texturing jobs with resumable state.

use serde::{Deserialize, Serialize};

use super::coarse::{all_meshes, coarse_stage, empty_room_depth, scene_depth, CoarseResult};
use super::object::{plan_seed, step_object, ObjectContext, ObjectRun, ObjectState};
use super::{
    JobLog, LogEntry, Observer, OwnerRegistry, PipelineConfig, PipelineError,
    ProgressEvent, Stage, TexturedScene,
};
use crate::painter::{Painter, Scorer};
use crate::planner::plan_views;
use crate::projection::{ColoredPointCloud, Tracer};
use crate::scene::Scene;

const COARSE_PERCENT: f64 = 10.0;

/// Everything needed to continue a job; saved at every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobState {
    pub seed: u64,
    /// Digest of the scene and configuration the job was started with.
    pub fingerprint: String,
    pub coarse: Option<CoarseResult>,
    pub owners: OwnerRegistry,
    pub log: JobLog,
    /// Room points plus every completed object.
    pub cloud: ColoredPointCloud,
    pub completed: Vec<String>,
    pub current: Option<ObjectState>,
}

impl JobState {
    pub fn new(scene: &Scene, config: &PipelineConfig, seed: u64) -> Self {
        Self {
            seed,
            fingerprint: fingerprint(scene, config, seed),
            coarse: None,
            owners: OwnerRegistry::default(),
            log: JobLog::default(),
            cloud: ColoredPointCloud::new(),
            completed: Vec::new(),
            current: None,
        }
    }

    /// Overall percent implied by the state.
    pub fn percent(&self, object_count: usize) -> f64 {
        if self.coarse.is_none() {
            return 0.0;
        }
        if object_count == 0 {
            return 100.0;
        }
        COARSE_PERCENT + (100.0 - COARSE_PERCENT) * self.completed.len() as f64 / object_count as f64
    }
}

/// Digest over the scene, configuration and seed.
pub fn fingerprint(scene: &Scene, config: &PipelineConfig, seed: u64) -> String {
    let mut bytes = bincode::serialize(scene).expect("scene serializes");
    bytes.extend(serde_json::to_vec(config).expect("config serializes"));
    bytes.extend(seed.to_le_bytes());
    crate::hash::sha256_hex(&bytes)
}

/// A stopped job: the error plus the state to resume from.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("texturing stopped: {error}")]
pub struct JobFailure {
    pub error: PipelineError,
    pub state: Box<JobState>,
}

fn fail(error: PipelineError, state: &JobState) -> JobFailure {
    JobFailure {
        error,
        state: Box::new(state.clone()),
    }
}

/// Coarse stage, then every object in id order. With `resume`, work already
/// recorded in the state is skipped; the result equals an uninterrupted run.
pub fn texture_scene(
    scene: &Scene,
    painter: &dyn Painter,
    scorer: &dyn Scorer,
    config: &PipelineConfig,
    seed: u64,
    observer: &dyn Observer,
    resume: Option<JobState>,
) -> Result<TexturedScene, JobFailure> {
    let mut state = match resume {
        Some(s) => {
            if s.fingerprint != fingerprint(scene, config, seed) {
                let blank = JobState::new(scene, config, seed);
                return Err(fail(
                    PipelineError::StateMismatch("scene, configuration or seed differ from the saved job".into()),
                    &blank,
                ));
            }
            s
        }
        None => JobState::new(scene, config, seed),
    };
    let objects = scene.objects();
    let n = objects.len();

    if state.coarse.is_none() {
        let mut log = state.log.clone();
        let coarse = coarse_stage(scene, painter, scorer, config, observer, seed, &mut log)
            .map_err(|e| fail(e, &state))?;
        state.cloud = coarse.room_cloud.clone();
        state.coarse = Some(coarse);
        state.log = log;
        observer.checkpoint(&state, true);
    }
    let coarse = state.coarse.clone().expect("coarse stage done");

    let tracer = Tracer::new(&all_meshes(scene));
    let full_depth = scene_depth(scene, &coarse.pano_camera);
    let empty_depth = empty_room_depth(scene, &coarse.pano_camera);
    let ctx_for = |obj: &crate::scene::ObjectInstance| ObjectContext {
        tracer: &tracer,
        pano_camera: &coarse.pano_camera,
        foreground: (&coarse.panorama, &full_depth),
        background: (&coarse.empty_panorama, &empty_depth),
        prompt: scene.object_prompt(obj),
        negative_prompt: scene.prompts.negative.clone(),
        job_seed: seed,
    };

    for (k, obj) in objects.iter().enumerate() {
        if state.completed.contains(&obj.id) {
            continue;
        }
        let plan = match plan_views(obj, &scene.room, plan_seed(seed, &obj.id)) {
            Ok(p) => match config.max_views {
                Some(m) => p.truncated(m),
                None => p,
            },
            Err(e) => {
                log::warn!("skipping object {}: {e}", obj.id);
                state.log.entries.push(LogEntry {
                    step: state.log.entries.len() as u64,
                    stage: Stage::Object,
                    object_id: Some(obj.id.clone()),
                    view_index: None,
                    purpose: format!("plan-failed: {e}"),
                    request_digest: None,
                    response_digest: None,
                    scores: Vec::new(),
                    selected: None,
                    new_points: 0,
                    misaligned_sources: 0,
                    total_points: state.cloud.len(),
                    owner_counts: super::owner_counts(&state.cloud, &state.owners),
                });
                state.completed.push(obj.id.clone());
                observer.checkpoint(&state, true);
                continue;
            }
        };
        let current = match state.current.take() {
            Some(c) if c.object_id == obj.id => c,
            _ => ObjectState {
                object_id: obj.id.clone(),
                owner: state.owners.intern(&obj.id),
                next_view: 0,
                cloud: ColoredPointCloud::new(),
            },
        };
        state.current = Some(current);
        let ctx = ctx_for(obj);
        let percent = |done: u32, total: u32| {
            COARSE_PERCENT
                + (100.0 - COARSE_PERCENT) * (k as f64 + done as f64 / total.max(1) as f64) / n as f64
        };
        loop {
            let current = state.current.as_mut().expect("object in progress");
            let mut run = ObjectRun {
                log: &mut state.log,
                owners: &state.owners,
                scene_cloud: &state.cloud,
                percent: &percent,
            };
            match step_object(painter, scorer, config, observer, &ctx, k + 1, &plan, current, &mut run) {
                Ok(Some(_)) => observer.checkpoint(&state, false),
                Ok(None) => break,
                Err(e) => return Err(fail(e, &state)),
            }
        }
        let current = state.current.take().expect("object in progress");
        state.cloud.extend_from(&current.cloud);
        state.completed.push(obj.id.clone());
        observer.checkpoint(&state, true);
    }

    observer.progress(&ProgressEvent {
        stage: Stage::Done,
        object_id: None,
        view_index: None,
        percent: 100.0,
        scores: Vec::new(),
        selected: None,
        message: "done".into(),
    });
    Ok(TexturedScene {
        scene: scene.clone(),
        pano_camera: coarse.pano_camera,
        panorama: coarse.panorama,
        empty_panorama: coarse.empty_panorama,
        patches: coarse.patches,
        cloud: state.cloud,
        owners: state.owners,
        log: state.log,
        revision: 0,
        seed,
    })
}
