//! Iterative texturing of one object from its planned views.

use serde::{Deserialize, Serialize};

use super::select::{select_candidate, Selection, SelectionMode};
use super::{
    call_seed, digest_images, fill_or_gray, owner_counts, JobLog, LogEntry, Observer, OwnerRegistry,
    PipelineConfig, PipelineError, ProgressEvent, Stage,
};
use crate::hash::Fnv1a;
use crate::imaging::{
    classify_unknown, combine_final, composite, dilate, interp_inpaint, misalignment_mask,
};
use crate::painter::{paint_checked, PaintRequest, Painter, Scorer};
use crate::planner::ViewPlan;
use crate::projection::{
    merge_cloud, render_persp, reproject_pano, splat, stale_texture_mask, unproject, ColoredPointCloud,
    OwnerId, PanoCamera, PerspCamera, Tracer,
};
use crate::raster::{BitMask, DepthMap, RgbImage};

/// Audit record of one accepted view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewRecord {
    pub object_id: String,
    pub owner: OwnerId,
    pub view_index: u32,
    pub camera: PerspCamera,
    pub misalignment: BitMask,
    /// Pixels unprojected into new points.
    pub source: BitMask,
    /// Final image of the view.
    pub image: RgbImage,
}

/// Read-only inputs shared by every object of a job.
pub struct ObjectContext<'a> {
    pub tracer: &'a Tracer,
    pub pano_camera: &'a PanoCamera,
    /// Panorama composited over the object (with its depth).
    pub foreground: (&'a RgbImage, &'a DepthMap),
    /// Panorama used behind the object.
    pub background: (&'a RgbImage, &'a DepthMap),
    pub prompt: String,
    pub negative_prompt: String,
    pub job_seed: u64,
}

pub(crate) struct Services<'a> {
    pub painter: &'a dyn Painter,
    pub scorer: &'a dyn Scorer,
    pub config: &'a PipelineConfig,
}

pub(crate) struct Painted {
    pub image: RgbImage,
    pub selection: Selection,
    pub request_digest: String,
    pub response_digest: String,
}

pub(crate) fn request_digest(req: &PaintRequest) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    let meta = serde_json::json!({
        "kind": req.kind,
        "prompt": req.prompt,
        "negative_prompt": req.negative_prompt,
        "seed": req.seed,
        "n": req.candidates,
        "params": req.params,
        "width": req.width(),
        "height": req.height(),
    });
    h.update(meta.to_string().as_bytes());
    h.update(req.depth.data().iter().flat_map(|v| v.to_le_bytes()).collect::<Vec<u8>>());
    for mask in [&req.mask, &req.sketch].into_iter().flatten() {
        h.update(mask.data().iter().map(|&b| b as u8).collect::<Vec<u8>>());
    }
    if let Some(base) = &req.base {
        h.update(base.data().iter().flatten().copied().collect::<Vec<u8>>());
    }
    hex::encode(h.finalize())
}

/// Calls the backend and picks a candidate. Scores use the raw candidates;
/// the returned image has out-of-mask pixels restored.
pub(crate) fn paint_and_select(
    sv: &Services,
    req: &PaintRequest,
    reference: &RgbImage,
    region: &BitMask,
    mode: SelectionMode,
) -> Result<Painted, PipelineError> {
    let checked = paint_checked(sv.painter, req)?;
    let selection = select_candidate(&checked.raw, reference, region, &req.prompt, sv.scorer, mode)?;
    Ok(Painted {
        image: checked.result.candidates[selection.index].clone(),
        response_digest: digest_images(&checked.raw),
        request_digest: request_digest(req),
        selection,
    })
}

/// Fills `unknown` in an already nearest-filled image: dense holes through
/// the backend, sparse holes by interpolation.
pub(crate) fn complete_unknown(
    sv: &Services,
    filled: &RgbImage,
    unknown: &BitMask,
    depth: &DepthMap,
    prompt: &str,
    negative: &str,
    seed: u64,
) -> Result<(RgbImage, Option<Painted>), PipelineError> {
    let cfg = sv.config;
    let classes = classify_unknown(unknown, cfg.classify_window, cfg.classify_threshold)?;
    let painted = if classes.dense.any() {
        let req = PaintRequest::inpaint(filled.clone(), classes.dense.clone(), depth, prompt, negative, seed)
            .with_candidates(cfg.candidates);
        let req = PaintRequest { params: cfg.params, ..req };
        let band = dilate(&classes.dense, cfg.band_radius).and_not(&classes.dense);
        let mode = if band.any() {
            SelectionMode::Iterative { normalizer: cfg.psnr_normalizer }
        } else {
            SelectionMode::Initial
        };
        Some(paint_and_select(sv, &req, filled, &band, mode)?)
    } else {
        None
    };
    let base = painted.as_ref().map_or(filled, |p| &p.image);
    let interp = interp_inpaint(base, &classes.sparse)?;
    let out = combine_final(filled, &interp, base, unknown, &classes.sparse)?;
    Ok((out, painted))
}

/// In-progress object state; advanced atomically per accepted view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub object_id: String,
    pub owner: OwnerId,
    pub next_view: u32,
    pub cloud: ColoredPointCloud,
}

/// Result of one view before it is committed.
struct ViewOutcome {
    points: ColoredPointCloud,
    record: ViewRecord,
    painted: Option<Painted>,
    purpose: &'static str,
}

fn object_seed(ctx: &ObjectContext, object: &str, view: u32, purpose: &str) -> u64 {
    call_seed(ctx.job_seed, object, view, purpose)
}

fn initial_view(
    sv: &Services,
    ctx: &ObjectContext,
    mesh_index: usize,
    state: &ObjectState,
    cam: &PerspCamera,
) -> Result<Option<ViewOutcome>, PipelineError> {
    let cfg = sv.config;
    let render = render_persp(ctx.tracer, cam);
    let obj_mask = render.mesh_mask(mesh_index);
    if !obj_mask.any() {
        log::warn!("object {} is not visible in its initial view; skipping", state.object_id);
        return Ok(None);
    }
    let (fg, fg_cov) = reproject_pano(ctx.foreground.0, ctx.foreground.1, ctx.pano_camera, cam, cfg.splat_radius);
    let (bg, bg_cov) = reproject_pano(ctx.background.0, ctx.background.1, ctx.pano_camera, cam, cfg.splat_radius);
    let fused = composite(&fg, &bg, &obj_mask)?;
    let covered = composite_mask(&fg_cov, &bg_cov, &obj_mask);
    let reference = fill_or_gray(&fused, &covered.not());
    let seed = object_seed(ctx, &state.object_id, 0, "initial");
    let req = PaintRequest::inpaint(reference.clone(), obj_mask.clone(), &render.depth, &ctx.prompt, &ctx.negative_prompt, seed)
        .with_candidates(cfg.candidates);
    let req = PaintRequest { params: cfg.params, ..req };
    let painted = paint_and_select(sv, &req, &reference, &obj_mask, SelectionMode::Initial)?;
    let mis = misalignment_mask(&painted.image, &render.depth, &cfg.edges);
    let source = obj_mask.and_not(&mis);
    let points = unproject(&painted.image, &source, &render.depth, cam, 0, state.owner)?;
    Ok(Some(ViewOutcome {
        points,
        record: ViewRecord {
            object_id: state.object_id.clone(),
            owner: state.owner,
            view_index: 0,
            camera: *cam,
            misalignment: mis,
            source,
            image: painted.image.clone(),
        },
        painted: Some(painted),
        purpose: "initial",
    }))
}

fn composite_mask(a: &BitMask, b: &BitMask, select_a: &BitMask) -> BitMask {
    BitMask::from_vec(
        a.width(),
        a.height(),
        (0..a.len())
            .map(|i| if select_a.data()[i] { a.data()[i] } else { b.data()[i] })
            .collect(),
    )
}

fn novel_view(
    sv: &Services,
    ctx: &ObjectContext,
    mesh_index: usize,
    state: &ObjectState,
    cam: &PerspCamera,
    view: u32,
) -> Result<Option<ViewOutcome>, PipelineError> {
    let cfg = sv.config;
    let render = render_persp(ctx.tracer, cam);
    let obj_mask = render.mesh_mask(mesh_index);
    if !obj_mask.any() {
        return Ok(None);
    }
    let warped = splat(&state.cloud, cam, cfg.splat_radius);
    let stale = stale_texture_mask(&warped.depth, &render.depth, cfg.stale_eps);
    let known = warped.known.and_not(&stale).and(&obj_mask);
    let unknown = obj_mask.and_not(&known);
    if !unknown.any() {
        return Ok(Some(ViewOutcome {
            points: ColoredPointCloud::new(),
            record: ViewRecord {
                object_id: state.object_id.clone(),
                owner: state.owner,
                view_index: view,
                camera: *cam,
                misalignment: BitMask::filled(cam.resolution, cam.resolution, false),
                source: BitMask::filled(cam.resolution, cam.resolution, false),
                image: warped.image,
            },
            painted: None,
            purpose: "novel",
        }));
    }
    let (bg, bg_cov) = reproject_pano(ctx.background.0, ctx.background.1, ctx.pano_camera, cam, cfg.splat_radius);
    let image = composite(&warped.image, &bg, &known)?;
    let missing = unknown.or(&obj_mask.or(&bg_cov).not());
    let filled = fill_or_gray(&image, &missing);
    let seed = object_seed(ctx, &state.object_id, view, "novel");
    let (final_image, painted) =
        complete_unknown(sv, &filled, &unknown, &render.depth, &ctx.prompt, &ctx.negative_prompt, seed)?;
    let mis = misalignment_mask(&final_image, &render.depth, &cfg.edges);
    let source = unknown.and_not(&mis);
    let points = unproject(&final_image, &source, &render.depth, cam, view, state.owner)?;
    Ok(Some(ViewOutcome {
        points,
        record: ViewRecord {
            object_id: state.object_id.clone(),
            owner: state.owner,
            view_index: view,
            camera: *cam,
            misalignment: mis,
            source,
            image: final_image,
        },
        painted,
        purpose: "novel",
    }))
}

/// Mutable job bookkeeping threaded through [`texture_object`].
pub struct ObjectRun<'a> {
    pub log: &'a mut JobLog,
    pub owners: &'a OwnerRegistry,
    /// Scene cloud without the object's own points, for owner accounting.
    pub scene_cloud: &'a ColoredPointCloud,
    /// Maps an object's view progress to overall job percent.
    pub percent: &'a dyn Fn(u32, u32) -> f64,
}

/// Runs the next pending view of `state`, if any, and returns its index.
/// The state only changes once the whole view succeeded, so after an error
/// a retry resumes at the failing view.
#[allow(clippy::too_many_arguments)]
pub fn step_object(
    painter: &dyn Painter,
    scorer: &dyn Scorer,
    config: &PipelineConfig,
    observer: &dyn Observer,
    ctx: &ObjectContext,
    mesh_index: usize,
    plan: &ViewPlan,
    state: &mut ObjectState,
    run: &mut ObjectRun,
) -> Result<Option<u32>, PipelineError> {
    let sv = Services {
        painter,
        scorer,
        config,
    };
    let cameras = plan.cameras();
    let total = cameras.len() as u32;
    let view = state.next_view;
    let Some(cam) = cameras.get(view as usize).map(|c| config.rescale(c)) else {
        return Ok(None);
    };
    let outcome = if view == 0 {
        initial_view(&sv, ctx, mesh_index, state, &cam)?
    } else {
        novel_view(&sv, ctx, mesh_index, state, &cam, view)?
    };
    let mut entry = LogEntry {
        step: run.log.entries.len() as u64,
        stage: Stage::Object,
        object_id: Some(state.object_id.clone()),
        view_index: Some(view),
        purpose: "skipped".into(),
        request_digest: None,
        response_digest: None,
        scores: Vec::new(),
        selected: None,
        new_points: 0,
        misaligned_sources: 0,
        total_points: 0,
        owner_counts: Vec::new(),
    };
    if let Some(o) = &outcome {
        entry.purpose = o.purpose.into();
        entry.new_points = o.points.len();
        entry.misaligned_sources = o.record.source.and(&o.record.misalignment).count();
        if let Some(p) = &o.painted {
            entry.request_digest = Some(p.request_digest.clone());
            entry.response_digest = Some(p.response_digest.clone());
            entry.scores = p.selection.scores.clone();
            entry.selected = Some(p.selection.index);
        }
        state.cloud = merge_cloud(&state.cloud, &o.points);
    }
    state.next_view += 1;
    let mut counts = owner_counts(run.scene_cloud, run.owners);
    let slot = state.owner as usize;
    if counts.len() <= slot {
        counts.resize(slot + 1, 0);
    }
    counts[slot] += state.cloud.len();
    entry.total_points = run.scene_cloud.len() + state.cloud.len();
    entry.owner_counts = counts;
    let event = ProgressEvent {
        stage: Stage::Object,
        object_id: Some(state.object_id.clone()),
        view_index: Some(view),
        percent: (run.percent)(state.next_view, total),
        scores: entry.scores.clone(),
        selected: entry.selected,
        message: format!("{} view {}/{}", state.object_id, view + 1, total),
    };
    run.log.entries.push(entry);
    if let Some(o) = &outcome {
        observer.view(&o.record);
    }
    observer.progress(&event);
    Ok(Some(view))
}

/// Textures one object through the remainder of its plan.
#[allow(clippy::too_many_arguments)]
pub fn texture_object(
    painter: &dyn Painter,
    scorer: &dyn Scorer,
    config: &PipelineConfig,
    observer: &dyn Observer,
    ctx: &ObjectContext,
    mesh_index: usize,
    plan: &ViewPlan,
    state: &mut ObjectState,
    run: &mut ObjectRun,
) -> Result<(), PipelineError> {
    while step_object(painter, scorer, config, observer, ctx, mesh_index, plan, state, run)?.is_some() {}
    Ok(())
}

/// Seed for an object's view plan.
pub fn plan_seed(job_seed: u64, object: &str) -> u64 {
    Fnv1a::new()
        .write(&job_seed.to_le_bytes())
        .write(object.as_bytes())
        .write(b"\0plan")
        .finish()
}
