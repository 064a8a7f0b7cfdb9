//! Shared state and the single mutation worker.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard, Weak};
use std::time::{SystemTime, UNIX_EPOCH};

use tokio::sync::{broadcast, mpsc, oneshot};

use scenepaint_core::io::project::ENV_API_KEY;
use scenepaint_core::io::{save_project, BackendConfig, Project};
use scenepaint_core::painter::RemoteConfig;
use scenepaint_core::pipeline::{
    apply_edit, texture_scene, EditCommand, JobState, Observer, ProgressEvent, Stage, TexturedScene,
};
use scenepaint_core::scene::ROOM_OWNER;

use crate::api::{
    EditResponse, JobAccepted, JobKind, JobPhase, JobStatus, ObjectSummary, SceneDescriptor, ServiceEvent,
    TextureRequest,
};
use crate::error::ApiError;

const EVENT_BUFFER: usize = 256;

enum Task {
    Texture {
        job: u64,
        request: TextureRequest,
    },
    Edit {
        job: u64,
        command: Box<EditCommand>,
        expected: Option<u64>,
        reply: oneshot::Sender<Result<EditResponse, ApiError>>,
    },
}

struct Shared {
    /// The project without its result, which lives in `result`.
    project: Project,
    result: Option<Arc<TexturedScene>>,
    revision: u64,
    jobs: BTreeMap<u64, JobStatus>,
    next_job: u64,
    executed: u64,
}

pub struct Service {
    shared: Mutex<Shared>,
    queue: mpsc::UnboundedSender<Task>,
    events: broadcast::Sender<ServiceEvent>,
    dir: Option<PathBuf>,
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl Service {
    /// Starts the worker on the current tokio runtime. With a directory, the
    /// project is saved there after every mutation and at object checkpoints.
    pub fn start(mut project: Project, dir: Option<PathBuf>) -> Arc<Service> {
        let result = project.result.take().map(Arc::new);
        let revision = result.as_ref().map_or(0, |r| r.revision);
        let (queue, rx) = mpsc::unbounded_channel();
        let service = Arc::new(Service {
            shared: Mutex::new(Shared {
                project,
                result,
                revision,
                jobs: BTreeMap::new(),
                next_job: 1,
                executed: 0,
            }),
            queue,
            events: broadcast::channel(EVENT_BUFFER).0,
            dir,
        });
        tokio::spawn(worker(Arc::downgrade(&service), rx));
        service
    }

    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn revision(&self) -> u64 {
        self.lock().revision
    }

    pub fn result(&self) -> Option<Arc<TexturedScene>> {
        self.lock().result.clone()
    }

    /// Current project, result included.
    pub fn project(&self) -> Project {
        let shared = self.lock();
        let mut project = shared.project.clone();
        project.result = shared.result.as_deref().cloned();
        project
    }

    pub fn subscribe(&self) -> broadcast::Receiver<ServiceEvent> {
        self.events.subscribe()
    }

    pub fn describe(&self) -> SceneDescriptor {
        let shared = self.lock();
        let scene = &shared.project.scene;
        let counts = |name: &str| {
            shared.result.as_ref().map_or(0, |ts| {
                ts.owners.get(name).map_or(0, |slot| ts.cloud.owners.iter().filter(|&&o| o == slot).count())
            })
        };
        SceneDescriptor {
            revision: shared.revision,
            seed: shared.project.seed,
            room: scene.room.clone(),
            prompts: scene.prompts.clone(),
            objects: scene
                .objects()
                .iter()
                .map(|o| {
                    let bb = o.aabb();
                    ObjectSummary {
                        id: o.id.clone(),
                        description: o.description.clone(),
                        min: bb.min,
                        max: bb.max,
                        points: counts(&o.id),
                    }
                })
                .collect(),
            textured: shared.result.is_some(),
            room_points: counts(ROOM_OWNER),
            total_points: shared.result.as_ref().map_or(0, |ts| ts.cloud.len()),
            resumable: shared.project.checkpoint.is_some(),
        }
    }

    pub fn job(&self, id: u64) -> Option<JobStatus> {
        self.lock().jobs.get(&id).cloned()
    }

    fn new_job(shared: &mut Shared, kind: JobKind) -> u64 {
        let id = shared.next_job;
        shared.next_job += 1;
        shared.jobs.insert(
            id,
            JobStatus {
                id,
                kind,
                phase: JobPhase::Queued,
                stage: None,
                object_id: None,
                view_index: None,
                percent: 0.0,
                updated_ms: now_ms(),
                error: None,
                revision: None,
            },
        );
        id
    }

    pub fn submit_texture(&self, request: TextureRequest) -> Result<JobAccepted, ApiError> {
        if let Some(b) = &request.backend {
            backend_config(b)?;
        }
        let mut shared = self.lock();
        let job = Self::new_job(&mut shared, JobKind::Texture);
        // Sent under the lock so queue order matches job ids.
        self.queue
            .send(Task::Texture { job, request })
            .map_err(|_| ApiError::Internal("worker stopped".into()))?;
        Ok(JobAccepted { job_id: job })
    }

    /// Queues an edit and waits for it. `expected` is the revision the
    /// caller last saw; a mismatch at execution time is a conflict.
    pub async fn submit_edit(&self, command: EditCommand, expected: Option<u64>) -> Result<EditResponse, ApiError> {
        let (reply, done) = oneshot::channel();
        {
            let mut shared = self.lock();
            let job = Self::new_job(&mut shared, JobKind::Edit);
            self.queue
                .send(Task::Edit {
                    job,
                    command: Box::new(command),
                    expected,
                    reply,
                })
                .map_err(|_| ApiError::Internal("worker stopped".into()))?;
        }
        done.await.map_err(|_| ApiError::Internal("edit was dropped".into()))?
    }

    fn update_job(&self, id: u64, f: impl FnOnce(&mut JobStatus)) -> Option<(JobStatus, u64)> {
        let mut shared = self.lock();
        let revision = shared.revision;
        let status = shared.jobs.get_mut(&id)?;
        f(status);
        status.updated_ms = now_ms();
        Some((status.clone(), revision))
    }

    fn publish(&self, job: u64, phase: JobPhase, revision: u64, progress: ProgressEvent) {
        // No subscribers is fine.
        let _ = self.events.send(ServiceEvent {
            job_id: job,
            phase,
            revision,
            progress,
        });
    }

    fn finish(&self, job: u64, outcome: Result<u64, String>) {
        let done = self.update_job(job, |s| match &outcome {
            Ok(rev) => {
                s.phase = JobPhase::Done;
                s.stage = Some(Stage::Done);
                s.percent = 100.0;
                s.revision = Some(*rev);
            }
            Err(e) => {
                s.phase = JobPhase::Failed;
                s.error = Some(e.clone());
            }
        });
        if let Some((status, revision)) = done {
            self.publish(
                job,
                status.phase,
                revision,
                ProgressEvent {
                    stage: status.stage.unwrap_or(Stage::Done),
                    object_id: status.object_id.clone(),
                    view_index: status.view_index,
                    percent: status.percent,
                    scores: Vec::new(),
                    selected: None,
                    message: status.error.clone().unwrap_or_else(|| "done".into()),
                },
            );
        }
    }

    fn save(&self, project: &Project) {
        if let Some(dir) = &self.dir {
            if let Err(e) = save_project(project, dir) {
                tracing::error!("saving project to {}: {e}", dir.display());
            }
        }
    }

    fn run_texture(&self, job: u64, request: TextureRequest) -> Result<u64, String> {
        let (project, resume, painter) = {
            let mut shared = self.lock();
            if let Some(seed) = request.seed {
                shared.project.seed = seed;
            }
            let painter = match &request.backend {
                Some(b) => {
                    let backend = backend_config(b).map_err(|e| e.to_string())?;
                    shared.project.backend = backend.clone();
                    with_api_key(backend).painter()
                }
                None => shared.project.backend.from_env().painter(),
            };
            let resume = if request.resume {
                let state = shared.project.checkpoint.clone();
                if state.is_none() {
                    tracing::warn!("no checkpoint to resume from; starting over");
                }
                state
            } else {
                None
            };
            shared.executed += 1;
            (shared.project.clone(), resume, painter)
        };
        self.update_job(job, |s| s.phase = JobPhase::Running);
        let scorer = project.scorer.scorer();
        let observer = JobObserver {
            service: self,
            job,
            project: &project,
        };
        let outcome = texture_scene(
            &project.scene,
            painter.as_ref(),
            scorer.as_ref(),
            &project.pipeline,
            project.seed,
            &observer,
            resume,
        );
        let mut saved = project;
        match outcome {
            Ok(ts) => {
                saved.checkpoint = None;
                saved.result = Some(ts);
                self.save(&saved);
                let mut shared = self.lock();
                shared.project.checkpoint = None;
                shared.result = saved.result.take().map(Arc::new);
                shared.revision += 1;
                Ok(shared.revision)
            }
            Err(failure) => {
                saved.checkpoint = Some(*failure.state);
                self.save(&saved);
                self.lock().project.checkpoint = saved.checkpoint;
                Err(failure.error.to_string())
            }
        }
    }

    fn run_edit(&self, job: u64, command: &EditCommand, expected: Option<u64>) -> Result<EditResponse, ApiError> {
        let (ts, project, sequence) = {
            let mut shared = self.lock();
            if let Some(rev) = expected {
                if rev != shared.revision {
                    return Err(ApiError::Conflict(format!(
                        "scene is at revision {}, not {rev}",
                        shared.revision
                    )));
                }
            }
            let ts = shared
                .result
                .clone()
                .ok_or_else(|| ApiError::Conflict("the scene has not been textured yet".into()))?;
            shared.executed += 1;
            (ts, shared.project.clone(), shared.executed)
        };
        self.update_job(job, |s| s.phase = JobPhase::Running);
        let painter = project.backend.from_env().painter();
        let scorer = project.scorer.scorer();
        let observer = JobObserver {
            service: self,
            job,
            project: &project,
        };
        let (next, outcome) = apply_edit(&ts, command, painter.as_ref(), scorer.as_ref(), &project.pipeline, &observer)
            .map_err(|e| {
                if e.is_rejection() {
                    ApiError::Rejected(e.to_string())
                } else {
                    ApiError::Backend(e.to_string())
                }
            })?;
        if outcome.noop {
            return Ok(EditResponse {
                job_id: job,
                sequence,
                revision: self.revision(),
                outcome,
            });
        }
        let mut saved = project;
        saved.scene = next.scene.clone();
        // A checkpoint of the old layout can no longer resume.
        saved.checkpoint = None;
        saved.result = Some(next);
        self.save(&saved);
        let mut shared = self.lock();
        shared.project.scene = saved.scene;
        shared.project.checkpoint = None;
        shared.result = saved.result.map(Arc::new);
        shared.revision += 1;
        Ok(EditResponse {
            job_id: job,
            sequence,
            revision: shared.revision,
            outcome,
        })
    }
}

fn backend_config(spec: &str) -> Result<BackendConfig, ApiError> {
    match spec {
        "mock" => Ok(BackendConfig::Mock),
        url if url.starts_with("http://") || url.starts_with("https://") => {
            Ok(BackendConfig::Remote(RemoteConfig::new(url)))
        }
        other => Err(ApiError::BadRequest(format!("backend must be `mock` or an http(s) URL, not {other:?}"))),
    }
}

/// An explicitly chosen backend still takes its API key from the environment.
fn with_api_key(backend: BackendConfig) -> BackendConfig {
    match backend {
        BackendConfig::Remote(mut rc) => {
            rc.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
            BackendConfig::Remote(rc)
        }
        mock => mock,
    }
}

struct JobObserver<'a> {
    service: &'a Service,
    job: u64,
    project: &'a Project,
}

impl Observer for JobObserver<'_> {
    fn progress(&self, event: &ProgressEvent) {
        let updated = self.service.update_job(self.job, |s| {
            s.stage = Some(event.stage);
            s.object_id = event.object_id.clone();
            s.view_index = event.view_index;
            s.percent = s.percent.max(event.percent.clamp(0.0, 100.0));
        });
        if let Some((status, revision)) = updated {
            let mut progress = event.clone();
            progress.percent = status.percent;
            self.service.publish(self.job, status.phase, revision, progress);
        }
    }

    fn checkpoint(&self, state: &JobState, object_done: bool) {
        if object_done && self.service.dir.is_some() {
            let mut project = self.project.clone();
            project.checkpoint = Some(state.clone());
            self.service.save(&project);
            self.service.lock().project.checkpoint = project.checkpoint;
        }
    }
}

async fn worker(service: Weak<Service>, mut rx: mpsc::UnboundedReceiver<Task>) {
    while let Some(task) = rx.recv().await {
        let Some(svc) = service.upgrade() else { break };
        let handle = tokio::task::spawn_blocking(move || match task {
            Task::Texture { job, request } => {
                let outcome = svc.run_texture(job, request);
                if let Err(e) = &outcome {
                    tracing::warn!("texture job {job} failed: {e}");
                }
                svc.finish(job, outcome);
            }
            Task::Edit {
                job,
                command,
                expected,
                reply,
            } => {
                let outcome = svc.run_edit(job, &command, expected);
                svc.finish(job, outcome.as_ref().map(|r| r.revision).map_err(|e| e.to_string()));
                let _ = reply.send(outcome);
            }
        });
        if let Err(e) = handle.await {
            tracing::error!("worker task panicked: {e}");
        }
    }
}
