//! Room panorama, empty-room panorama and floor/ceiling refinement.

use serde::{Deserialize, Serialize};

use super::object::{complete_unknown, paint_and_select, request_digest, Painted, Services};
use super::select::{select_by_prompt, SelectionMode};
use super::{
    call_seed, digest_images, fill_or_gray, JobLog, LogEntry, Observer, PipelineConfig, PipelineError,
    ProgressEvent, Stage, CEILING_VIEW, FLOOR_VIEW, PANO_VIEW,
};
use crate::imaging::dilate;
use crate::painter::{paint_checked, PaintRequest, Painter, Scorer};
use crate::planner::refinement_views;
use crate::projection::{
    render_pano, render_persp, reproject_pano, unproject, unproject_pano, ColoredPointCloud, PanoCamera,
    PerspCamera, Tracer,
};
use crate::raster::{BitMask, DepthMap, RgbImage};
use crate::scene::{Scene, SurfaceLabel};

const ROOM_OWNER_SLOT: u16 = 0;

/// Floor or ceiling texture seen from a refinement camera.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementPatch {
    pub label: SurfaceLabel,
    pub camera: PerspCamera,
    pub image: RgbImage,
    /// Pixels of the labeled surface; these were unprojected.
    pub mask: BitMask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseResult {
    pub pano_camera: PanoCamera,
    pub panorama: RgbImage,
    pub empty_panorama: RgbImage,
    /// Pano pixels whose full-scene depth differs from the empty room.
    pub occlusion: BitMask,
    pub patches: Vec<RefinementPatch>,
    /// Room partition: the empty-room panorama plus both patches.
    pub room_cloud: ColoredPointCloud,
}

/// Global prompt: style followed by every object description.
pub fn scene_prompt(scene: &Scene) -> String {
    std::iter::once(scene.prompts.style.as_str())
        .chain(scene.objects().iter().map(|o| o.description.as_str()))
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Pixels where the two depth maps disagree by more than `eps` or only one is finite.
pub fn occlusion_mask(full: &DepthMap, empty: &DepthMap, eps: f64) -> BitMask {
    full.zip_map(empty, |&a, &b| match (a.is_finite(), b.is_finite()) {
        (true, true) => (a - b).abs() > eps,
        (false, false) => false,
        _ => true,
    })
}

fn scene_meshes(scene: &Scene) -> Vec<crate::scene::TriMesh> {
    std::iter::once(scene.interior.clone())
        .chain(scene.objects().iter().map(|o| o.world_mesh()))
        .collect()
}

fn log_entry(log: &JobLog, purpose: &str, view: u32) -> LogEntry {
    LogEntry {
        step: log.entries.len() as u64,
        stage: Stage::Coarse,
        object_id: None,
        view_index: Some(view),
        purpose: purpose.into(),
        request_digest: None,
        response_digest: None,
        scores: Vec::new(),
        selected: None,
        new_points: 0,
        misaligned_sources: 0,
        total_points: 0,
        owner_counts: Vec::new(),
    }
}

#[allow(clippy::too_many_arguments)]
fn refine(
    sv: &Services,
    room_tracer: &Tracer,
    cam: &PerspCamera,
    label: SurfaceLabel,
    empty_pano: (&RgbImage, &DepthMap),
    pano_cam: &PanoCamera,
    prompt: &str,
    negative: &str,
    seed: u64,
) -> Result<(RefinementPatch, Option<Painted>, DepthMap), PipelineError> {
    let cfg = sv.config;
    let render = render_persp(room_tracer, cam);
    let target = render.label_mask(room_tracer, label);
    let (img, cov) = reproject_pano(empty_pano.0, empty_pano.1, pano_cam, cam, cfg.splat_radius);
    let unknown = target.and_not(&cov);
    let filled = fill_or_gray(&img, &cov.not());
    let (image, painted) = if unknown.any() {
        complete_unknown(sv, &filled, &unknown, &render.depth, prompt, negative, seed)?
    } else {
        (filled, None)
    };
    Ok((
        RefinementPatch {
            label,
            camera: *cam,
            image,
            mask: target,
        },
        painted,
        render.depth,
    ))
}

/// Generates the room panorama over full-scene depth, inpaints the object
/// occlusions over empty-room depth, refines floor and ceiling and lifts
/// everything into the room partition of the cloud.
pub fn coarse_stage(
    scene: &Scene,
    painter: &dyn Painter,
    scorer: &dyn Scorer,
    config: &PipelineConfig,
    observer: &dyn Observer,
    seed: u64,
    log: &mut JobLog,
) -> Result<CoarseResult, PipelineError> {
    let sv = Services {
        painter,
        scorer,
        config,
    };
    let pano_cam = config.pano_camera(scene);
    let full_tracer = Tracer::new(&scene_meshes(scene));
    let room_tracer = Tracer::new(std::slice::from_ref(&scene.interior));
    let full_depth = render_pano(&full_tracer, &pano_cam).depth;
    let empty_depth = render_pano(&room_tracer, &pano_cam).depth;
    let prompt = scene_prompt(scene);
    let negative = scene.prompts.negative.as_str();
    let progress = |percent: f64, message: &str, scores: Vec<f64>, selected: Option<usize>| {
        observer.progress(&ProgressEvent {
            stage: Stage::Coarse,
            object_id: None,
            view_index: None,
            percent,
            scores,
            selected,
            message: message.into(),
        })
    };

    let req = PaintRequest {
        params: config.params,
        ..PaintRequest::generate(&full_depth, &prompt, negative, call_seed(seed, "", PANO_VIEW, "panorama"))
            .with_candidates(config.candidates)
    };
    let checked = paint_checked(painter, &req)?;
    let sel = select_by_prompt(&checked.raw, &prompt, scorer);
    let panorama = checked.result.candidates[sel.index].clone();
    let mut entry = log_entry(log, "panorama", PANO_VIEW);
    entry.request_digest = Some(request_digest(&req));
    entry.response_digest = Some(digest_images(&checked.raw));
    entry.scores = sel.scores.clone();
    entry.selected = Some(sel.index);
    log.entries.push(entry);
    progress(3.0, "panorama", sel.scores, Some(sel.index));

    let occlusion = occlusion_mask(&full_depth, &empty_depth, config.occlusion_eps);
    let empty_panorama = if occlusion.any() {
        let mut base = panorama.clone();
        for (px, &m) in base.data_mut().iter_mut().zip(occlusion.data()) {
            if m {
                *px = [0, 0, 0];
            }
        }
        let req = PaintRequest {
            params: config.params,
            ..PaintRequest::inpaint(
                base.clone(),
                occlusion.clone(),
                &empty_depth,
                &prompt,
                negative,
                call_seed(seed, "", PANO_VIEW, "empty-room"),
            )
            .with_candidates(config.candidates)
        };
        let band = dilate(&occlusion, config.band_radius).and_not(&occlusion);
        let mode = if band.any() {
            SelectionMode::Iterative { normalizer: config.psnr_normalizer }
        } else {
            SelectionMode::Initial
        };
        let painted = paint_and_select(&sv, &req, &base, &band, mode)?;
        let mut entry = log_entry(log, "empty-room", PANO_VIEW);
        entry.request_digest = Some(painted.request_digest.clone());
        entry.response_digest = Some(painted.response_digest.clone());
        entry.scores = painted.selection.scores.clone();
        entry.selected = Some(painted.selection.index);
        log.entries.push(entry);
        progress(6.0, "empty room", painted.selection.scores.clone(), Some(painted.selection.index));
        painted.image
    } else {
        panorama.clone()
    };

    let mut room_cloud = unproject_pano(
        &empty_panorama,
        &empty_depth.finite_mask(),
        &empty_depth,
        &pano_cam,
        PANO_VIEW,
        ROOM_OWNER_SLOT,
    );
    let mut entry = log_entry(log, "room-panorama-points", PANO_VIEW);
    entry.new_points = room_cloud.len();
    entry.total_points = room_cloud.len();
    entry.owner_counts = vec![room_cloud.len()];
    log.entries.push(entry);

    let (down, up) = refinement_views(&scene.room)?;
    let mut patches = Vec::new();
    for (cam, label, view, purpose) in [
        (down, SurfaceLabel::Floor, FLOOR_VIEW, "floor"),
        (up, SurfaceLabel::Ceiling, CEILING_VIEW, "ceiling"),
    ] {
        let cam = config.rescale(&cam);
        let (patch, painted, depth) = refine(
            &sv,
            &room_tracer,
            &cam,
            label,
            (&empty_panorama, &empty_depth),
            &pano_cam,
            &prompt,
            negative,
            call_seed(seed, "", view, purpose),
        )?;
        let points = unproject(&patch.image, &patch.mask, &depth, &cam, view, ROOM_OWNER_SLOT)?;
        let mut entry = log_entry(log, purpose, view);
        if let Some(p) = &painted {
            entry.request_digest = Some(p.request_digest.clone());
            entry.response_digest = Some(p.response_digest.clone());
            entry.scores = p.selection.scores.clone();
            entry.selected = Some(p.selection.index);
        }
        entry.new_points = points.len();
        room_cloud.extend_from(&points);
        entry.total_points = room_cloud.len();
        entry.owner_counts = vec![room_cloud.len()];
        log.entries.push(entry);
        patches.push(patch);
        progress(if view == FLOOR_VIEW { 8.0 } else { 10.0 }, purpose, Vec::new(), None);
    }

    Ok(CoarseResult {
        pano_camera: pano_cam,
        panorama,
        empty_panorama,
        occlusion,
        patches,
        room_cloud,
    })
}

/// Empty-room panorama depth, needed whenever the background is reprojected.
pub fn empty_room_depth(scene: &Scene, pano_cam: &PanoCamera) -> DepthMap {
    render_pano(&Tracer::new(std::slice::from_ref(&scene.interior)), pano_cam).depth
}

/// Full-scene panorama depth.
pub fn scene_depth(scene: &Scene, pano_cam: &PanoCamera) -> DepthMap {
    render_pano(&Tracer::new(&scene_meshes(scene)), pano_cam).depth
}

pub(crate) fn all_meshes(scene: &Scene) -> Vec<crate::scene::TriMesh> {
    scene_meshes(scene)
}
