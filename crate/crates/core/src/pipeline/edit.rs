//! Region repaints and object-level edits of a textured scene.

use serde::{Deserialize, Serialize};

use super::coarse::{all_meshes, empty_room_depth};
use super::object::{paint_and_select, plan_seed, step_object, ObjectContext, ObjectRun, ObjectState, Services};
use super::select::SelectionMode;
use super::{
    call_seed, fill_or_gray, owner_counts, LogEntry, Observer, PipelineConfig, PipelineError, Stage,
    TexturedScene, EDIT_VIEW,
};
use crate::geometry::{yaw_rotation, Vec3};
use crate::imaging::dilate;
use crate::painter::{PaintRequest, Painter, Scorer};
use crate::planner::plan_views;
use crate::projection::{render_persp, splat, unproject, ColoredPointCloud, OwnerId, PerspCamera, Tracer};
use crate::raster::BitMask;
use crate::scene::{ObjectInstance, SceneError, ROOM_OWNER};

/// Depth tolerance when deciding which splatted points a region edit replaces.
pub const REGION_DEPTH_EPS: f64 = 0.01;

/// A sketch-guided repaint of the pixels `mask` of `camera`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEdit {
    pub camera: PerspCamera,
    #[serde(with = "png_mask")]
    pub mask: BitMask,
    #[serde(default, with = "png_mask_opt", skip_serializing_if = "Option::is_none")]
    pub sketch: Option<BitMask>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EditCommand {
    Add {
        object: ObjectInstance,
    },
    Remove {
        target: String,
    },
    Duplicate {
        target: String,
        new_id: String,
        offset: Vec3,
    },
    Translate {
        target: String,
        offset: Vec3,
    },
    /// Yaw about the center of the object's AABB, radians.
    Rotate {
        target: String,
        angle: f64,
    },
    /// Uniform scale about the center of the object's AABB.
    Rescale {
        target: String,
        factor: f64,
    },
    RepaintObject {
        target: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        description: Option<String>,
    },
    RepaintRegion(RegionEdit),
}

impl EditCommand {
    pub fn target(&self) -> Option<&str> {
        match self {
            EditCommand::Add { object } => Some(&object.id),
            EditCommand::Remove { target }
            | EditCommand::Duplicate { target, .. }
            | EditCommand::Translate { target, .. }
            | EditCommand::Rotate { target, .. }
            | EditCommand::Rescale { target, .. }
            | EditCommand::RepaintObject { target, .. } => Some(target),
            EditCommand::RepaintRegion(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EditError {
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("invalid edit: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

impl EditError {
    /// Errors caused by the command itself rather than by a backend.
    pub fn is_rejection(&self) -> bool {
        !matches!(self, EditError::Pipeline(PipelineError::Paint(_)))
    }
}

/// Point accounting of an applied edit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub removed: usize,
    pub added: usize,
    /// True when nothing changed (the revision is not bumped).
    pub noop: bool,
}

fn edit_entry(ts: &TexturedScene, purpose: String, object: Option<&str>, added: usize) -> LogEntry {
    LogEntry {
        step: ts.log.entries.len() as u64,
        stage: Stage::Edit,
        object_id: object.map(str::to_string),
        view_index: None,
        purpose,
        request_digest: None,
        response_digest: None,
        scores: Vec::new(),
        selected: None,
        new_points: added,
        misaligned_sources: 0,
        total_points: ts.cloud.len(),
        owner_counts: owner_counts(&ts.cloud, &ts.owners),
    }
}

fn owner_of(ts: &TexturedScene, id: &str) -> Result<OwnerId, EditError> {
    if ts.scene.object(id).is_none() {
        return Err(EditError::UnknownObject(id.into()));
    }
    Ok(ts.owners.get(id).unwrap_or(OwnerId::MAX))
}

/// Applies `map` to the object's transform and to its points.
fn transform_object(
    ts: &TexturedScene,
    id: &str,
    map: impl Fn(&Vec3) -> Vec3,
    update: impl FnOnce(&mut ObjectInstance),
) -> Result<TexturedScene, EditError> {
    let owner = owner_of(ts, id)?;
    let mut obj = ts.scene.object(id).expect("checked").clone();
    update(&mut obj);
    let mut out = ts.clone();
    out.scene.upsert_object(obj)?;
    for (p, &o) in out.cloud.points.iter_mut().zip(&ts.cloud.owners) {
        if o == owner {
            *p = map(p);
        }
    }
    Ok(out)
}

/// Pure object edits; `add` and `repaint-object` need a backend and go through [`apply_edit`].
pub fn apply_object_edit(ts: &TexturedScene, cmd: &EditCommand) -> Result<(TexturedScene, EditOutcome), EditError> {
    let (mut out, outcome) = match cmd {
        EditCommand::Translate { target, offset } => {
            check_finite(offset.as_slice(), "offset")?;
            let t = *offset;
            let out = transform_object(ts, target, |p| p + t, |o| o.transform.translation += t)?;
            (out, EditOutcome::default())
        }
        EditCommand::Rotate { target, angle } => {
            check_finite(&[*angle], "angle")?;
            let c = ts.scene.object(target).ok_or_else(|| EditError::UnknownObject(target.clone()))?.aabb().center();
            let r = yaw_rotation(*angle);
            let out = transform_object(
                ts,
                target,
                |p| r * (p - c) + c,
                |o| {
                    o.transform.rotation = r * o.transform.rotation;
                    o.transform.translation = r * (o.transform.translation - c) + c;
                },
            )?;
            (out, EditOutcome::default())
        }
        EditCommand::Rescale { target, factor } => {
            if !(*factor > 0.0 && factor.is_finite()) {
                return Err(EditError::Invalid(format!("rescale factor must be > 0, got {factor}")));
            }
            let k = *factor;
            let c = ts.scene.object(target).ok_or_else(|| EditError::UnknownObject(target.clone()))?.aabb().center();
            let out = transform_object(
                ts,
                target,
                |p| c + (p - c) * k,
                |o| {
                    o.transform.scale *= k;
                    o.transform.translation = c + (o.transform.translation - c) * k;
                },
            )?;
            (out, EditOutcome::default())
        }
        EditCommand::Remove { target } => {
            let owner = owner_of(ts, target)?;
            let mut out = ts.clone();
            out.scene.remove_object(target);
            out.cloud = ts.cloud.filter_indices(|i| ts.cloud.owners[i] != owner);
            let removed = ts.cloud.len() - out.cloud.len();
            (out, EditOutcome { removed, ..Default::default() })
        }
        EditCommand::Duplicate { target, new_id, offset } => {
            check_finite(offset.as_slice(), "offset")?;
            let owner = owner_of(ts, target)?;
            let mut copy = ts.scene.object(target).expect("checked").clone();
            copy.id = new_id.clone();
            copy.transform.translation += offset;
            let mut out = ts.clone();
            out.scene.insert_object(copy)?;
            let slot = out.owners.intern(new_id);
            let mut added = ts.cloud.owned_by(owner);
            for p in added.points.iter_mut() {
                *p += offset;
            }
            added.owners.iter_mut().for_each(|o| *o = slot);
            out.cloud.extend_from(&added);
            (out, EditOutcome { added: added.len(), ..Default::default() })
        }
        EditCommand::Add { .. } | EditCommand::RepaintObject { .. } | EditCommand::RepaintRegion(_) => {
            return Err(EditError::Invalid("this edit needs a painter backend".into()));
        }
    };
    let purpose = format!("edit:{}", kind_name(cmd));
    out.log.entries.push(edit_entry(&out, purpose, cmd.target(), outcome.added));
    out.revision += 1;
    Ok((out, outcome))
}

fn check_finite(v: &[f64], what: &str) -> Result<(), EditError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(EditError::Invalid(format!("{what} must be finite")))
    }
}

fn kind_name(cmd: &EditCommand) -> &'static str {
    match cmd {
        EditCommand::Add { .. } => "add",
        EditCommand::Remove { .. } => "remove",
        EditCommand::Duplicate { .. } => "duplicate",
        EditCommand::Translate { .. } => "translate",
        EditCommand::Rotate { .. } => "rotate",
        EditCommand::Rescale { .. } => "rescale",
        EditCommand::RepaintObject { .. } => "repaint-object",
        EditCommand::RepaintRegion(_) => "repaint-region",
    }
}

/// Textures one object of `ts.scene` from scratch against the empty-room
/// panorama and appends its points.
fn retexture(
    ts: &mut TexturedScene,
    id: &str,
    painter: &dyn Painter,
    scorer: &dyn Scorer,
    config: &PipelineConfig,
    observer: &dyn Observer,
) -> Result<usize, EditError> {
    let scene = &ts.scene;
    let mesh_index = scene.objects().iter().position(|o| o.id == id).ok_or_else(|| EditError::UnknownObject(id.into()))? + 1;
    let obj = &scene.objects()[mesh_index - 1];
    let plan = plan_views(obj, &scene.room, plan_seed(ts.seed, id)).map_err(PipelineError::from)?;
    let plan = match config.max_views {
        Some(m) => plan.truncated(m),
        None => plan,
    };
    let tracer = Tracer::new(&all_meshes(scene));
    let empty_depth = empty_room_depth(scene, &ts.pano_camera);
    let ctx = ObjectContext {
        tracer: &tracer,
        pano_camera: &ts.pano_camera,
        foreground: (&ts.empty_panorama, &empty_depth),
        background: (&ts.empty_panorama, &empty_depth),
        prompt: scene.object_prompt(obj),
        negative_prompt: scene.prompts.negative.clone(),
        job_seed: ts.seed,
    };
    let mut state = ObjectState {
        object_id: id.into(),
        owner: ts.owners.intern(id),
        next_view: 0,
        cloud: ColoredPointCloud::new(),
    };
    let mut log = std::mem::take(&mut ts.log);
    let result = {
        let mut run = ObjectRun {
            log: &mut log,
            owners: &ts.owners,
            scene_cloud: &ts.cloud,
            percent: &|done, total| 100.0 * done as f64 / total.max(1) as f64,
        };
        let mut r = Ok(());
        loop {
            match step_object(painter, scorer, config, observer, &ctx, mesh_index, &plan, &mut state, &mut run) {
                Ok(Some(_)) => {}
                Ok(None) => break,
                Err(e) => {
                    r = Err(e);
                    break;
                }
            }
        }
        r
    };
    ts.log = log;
    result?;
    ts.cloud.extend_from(&state.cloud);
    Ok(state.cloud.len())
}

/// Repaints the pixels of `edit.mask` and swaps the points they show.
///
/// Points whose center projects into the mask and that are visible there
/// (within [`REGION_DEPTH_EPS`] of the surface) are replaced by one new point
/// per masked pixel with finite depth, owned by the surface hit at that pixel.
pub fn apply_region_edit(
    ts: &TexturedScene,
    edit: &RegionEdit,
    painter: &dyn Painter,
    scorer: &dyn Scorer,
    config: &PipelineConfig,
) -> Result<(TexturedScene, EditOutcome), EditError> {
    let cam = &edit.camera;
    cam.validate().map_err(PipelineError::from)?;
    if !ts.scene.room.strictly_contains(&cam.position) {
        return Err(EditError::Invalid("edit camera is not inside the room".into()));
    }
    let res = cam.resolution;
    if edit.mask.dims() != (res, res) || edit.sketch.as_ref().is_some_and(|s| s.dims() != (res, res)) {
        return Err(EditError::Invalid(format!("mask and sketch must be {res}x{res}")));
    }
    if !edit.mask.any() {
        log::warn!("region edit with an empty mask; nothing to do");
        return Ok((ts.clone(), EditOutcome { noop: true, ..Default::default() }));
    }
    let meshes = all_meshes(&ts.scene);
    let tracer = Tracer::new(&meshes);
    let render = render_persp(&tracer, cam);
    let frame = cam.frame();
    let replaced: Vec<bool> = ts
        .cloud
        .points
        .iter()
        .map(|p| match cam.project_with(&frame, p) {
            Some((x, y, d)) if x >= 0.0 && y >= 0.0 && x < res as f64 && y < res as f64 => {
                let (px, py) = (x as usize, y as usize);
                *edit.mask.get(px, py) && d <= render.depth.get(px, py) + REGION_DEPTH_EPS
            }
            _ => false,
        })
        .collect();
    let target = edit.mask.and(&render.depth.finite_mask());
    let removed = replaced.iter().filter(|&&r| r).count();
    if removed == 0 && !target.any() {
        log::warn!("region edit covers no points and no surface; nothing to do");
        return Ok((ts.clone(), EditOutcome { noop: true, ..Default::default() }));
    }
    let retained = ts.cloud.filter_indices(|i| !replaced[i]);

    let warped = splat(&retained, cam, config.splat_radius);
    let base = fill_or_gray(&warped.image, &warped.known.not());
    let seed = edit.seed.unwrap_or_else(|| call_seed(ts.seed, "", EDIT_VIEW, "region-edit"));
    let mut req = PaintRequest::inpaint(
        base.clone(),
        edit.mask.clone(),
        &render.depth,
        &edit.prompt,
        &ts.scene.prompts.negative,
        seed,
    )
    .with_candidates(config.candidates);
    req.params = config.params;
    if let Some(sketch) = &edit.sketch {
        req = req.with_sketch(sketch.clone());
    }
    let band = dilate(&edit.mask, config.band_radius).and_not(&edit.mask);
    let mode = if band.any() {
        SelectionMode::Iterative { normalizer: config.psnr_normalizer }
    } else {
        SelectionMode::Initial
    };
    let sv = Services {
        painter,
        scorer,
        config,
    };
    let painted = paint_and_select(&sv, &req, &base, &band, mode).map_err(EditError::from)?;

    let mut out = ts.clone();
    let slots: Vec<OwnerId> = meshes
        .iter()
        .enumerate()
        .map(|(m, _)| match m {
            0 => out.owners.intern(ROOM_OWNER),
            _ => out.owners.intern(&ts.scene.objects()[m - 1].id),
        })
        .collect();
    let mut added = unproject(&painted.image, &target, &render.depth, cam, EDIT_VIEW, 0).map_err(PipelineError::from)?;
    for (o, (x, y)) in added.owners.iter_mut().zip(target.coords()) {
        *o = slots[render.hits.get(x, y).mesh as usize];
    }
    out.cloud = retained;
    out.cloud.extend_from(&added);
    let mut entry = edit_entry(&out, "edit:repaint-region".into(), None, added.len());
    entry.view_index = Some(EDIT_VIEW);
    entry.request_digest = Some(painted.request_digest);
    entry.response_digest = Some(painted.response_digest);
    entry.scores = painted.selection.scores;
    entry.selected = Some(painted.selection.index);
    out.log.entries.push(entry);
    out.revision += 1;
    Ok((out, EditOutcome { removed, added: added.len(), noop: false }))
}

/// Applies any edit. On error the input scene is untouched.
pub fn apply_edit(
    ts: &TexturedScene,
    cmd: &EditCommand,
    painter: &dyn Painter,
    scorer: &dyn Scorer,
    config: &PipelineConfig,
    observer: &dyn Observer,
) -> Result<(TexturedScene, EditOutcome), EditError> {
    match cmd {
        EditCommand::RepaintRegion(edit) => apply_region_edit(ts, edit, painter, scorer, config),
        EditCommand::Add { object } => {
            let mut out = ts.clone();
            out.scene.insert_object(object.clone())?;
            let added = retexture(&mut out, &object.id, painter, scorer, config, observer)?;
            out.log.entries.push(edit_entry(&out, "edit:add".into(), Some(&object.id), added));
            out.revision += 1;
            Ok((out, EditOutcome { added, ..Default::default() }))
        }
        EditCommand::RepaintObject { target, description } => {
            let owner = owner_of(ts, target)?;
            let mut out = ts.clone();
            if let Some(d) = description {
                let mut obj = out.scene.object(target).expect("checked").clone();
                obj.description = d.clone();
                out.scene.upsert_object(obj)?;
            }
            out.cloud = ts.cloud.filter_indices(|i| ts.cloud.owners[i] != owner);
            let removed = ts.cloud.len() - out.cloud.len();
            let added = retexture(&mut out, target, painter, scorer, config, observer)?;
            out.log.entries.push(edit_entry(&out, "edit:repaint-object".into(), Some(target), added));
            out.revision += 1;
            Ok((out, EditOutcome { removed, added, noop: false }))
        }
        _ => apply_object_edit(ts, cmd),
    }
}

pub(crate) mod png_mask {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    use crate::raster::{mask_from_png, mask_to_png, BitMask};

    pub fn serialize<S: Serializer>(mask: &BitMask, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&STANDARD.encode(mask_to_png(mask)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BitMask, D::Error> {
        let text = String::deserialize(d)?;
        let bytes = STANDARD.decode(text.as_bytes()).map_err(D::Error::custom)?;
        mask_from_png(&bytes).map_err(D::Error::custom)
    }
}

pub(crate) mod png_mask_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::raster::BitMask;

    pub fn serialize<S: Serializer>(mask: &Option<BitMask>, s: S) -> Result<S::Ok, S::Error> {
        match mask {
            Some(m) => super::png_mask::serialize(m, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BitMask>, D::Error> {
        #[derive(Deserialize)]
        struct Wrapped(#[serde(with = "super::png_mask")] BitMask);
        Ok(Option::<Wrapped>::deserialize(d)?.map(|w| w.0))
    }
}
