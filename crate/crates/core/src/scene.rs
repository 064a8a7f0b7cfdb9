//! Compositional scene description: room layout, interior mesh and posed objects.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Similarity, Vec3};

/// Owner name used for the room interior in point-cloud partitions.
pub const ROOM_OWNER: &str = "room";

const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("invalid room spec: {field}: {reason}")]
    InvalidSpec { field: String, reason: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("object `{id}` does not fit inside the room (aabb {min:?}..{max:?})")]
    Placement { id: String, min: [f64; 3], max: [f64; 3] },
    #[error("duplicate object id `{0}`")]
    DuplicateId(String),
    #[error("invalid object id `{0}` (use letters, digits, `_`, `-` or `.`)")]
    InvalidId(String),
    #[error("object `{0}` has a degenerate footprint")]
    DegenerateObject(String),
    #[error("invalid object `{id}`: {reason}")]
    InvalidObject { id: String, reason: String },
}

impl SceneError {
    fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SceneError::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceLabel {
    Wall,
    Floor,
    Ceiling,
    Baseboard,
    Door,
    Window,
    Object,
}

/// Indexed triangle mesh in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    labels: Option<Vec<SurfaceLabel>>,
}

impl TriMesh {
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        labels: Option<Vec<SurfaceLabel>>,
    ) -> Result<Self, SceneError> {
        let mesh = Self {
            vertices,
            triangles,
            labels,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if let Some(i) = self.vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(SceneError::InvalidMesh(format!("vertex {i} is not finite")));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.triangles.len() {
                return Err(SceneError::InvalidMesh(format!(
                    "{} labels for {} triangles",
                    labels.len(),
                    self.triangles.len()
                )));
            }
        }
        let n = self.vertices.len() as u32;
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(SceneError::InvalidMesh(format!(
                    "triangle {t} references a vertex out of range ({n} vertices)"
                )));
            }
            if self.triangle_area(t) <= MIN_TRIANGLE_AREA {
                return Err(SceneError::InvalidMesh(format!("triangle {t} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn labels(&self) -> Option<&[SurfaceLabel]> {
        self.labels.as_deref()
    }

    pub fn label(&self, tri: usize) -> Option<SurfaceLabel> {
        self.labels.as_ref().map(|l| l[tri])
    }

    pub fn triangle(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle(t);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        let [a, b, c] = self.triangle(t);
        (b - a).cross(&(c - a)).normalize()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    pub fn with_labels(mut self, label: SurfaceLabel) -> Self {
        self.labels = Some(vec![label; self.triangles.len()]);
        self
    }

    /// Applies a similarity transform; labels are kept.
    pub fn transformed(&self, xf: &Similarity) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| xf.apply(v)).collect(),
            triangles: self.triangles.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Axis-aligned box mesh with outward-facing normals.
    pub fn cuboid(size: Vec3) -> TriMesh {
        let h = size * 0.5;
        let bb = Aabb { min: -h, max: h };
        let mut b = MeshBuilder::default();
        let c = bb.corners();
        let faces: [([usize; 4], Vec3); 6] = [
            ([0, 2, 3, 1], -Vec3::z()),
            ([4, 5, 7, 6], Vec3::z()),
            ([0, 1, 5, 4], -Vec3::y()),
            ([2, 6, 7, 3], Vec3::y()),
            ([0, 4, 6, 2], -Vec3::x()),
            ([1, 3, 7, 5], Vec3::x()),
        ];
        for (q, facing) in faces {
            b.quad([c[q[0]], c[q[1]], c[q[2]], c[q[3]]], facing, SurfaceLabel::Object);
        }
        b.build()
    }
}

/// Accumulates labeled triangles; every face is oriented toward a caller-given direction.
#[derive(Debug, Default)]
pub(crate) struct MeshBuilder {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    labels: Vec<SurfaceLabel>,
}

impl MeshBuilder {
    pub fn triangle(&mut self, p: [Vec3; 3], facing: Vec3, label: SurfaceLabel) {
        let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
        if n.norm() * 0.5 <= MIN_TRIANGLE_AREA {
            return;
        }
        let base = self.vertices.len() as u32;
        if n.dot(&facing) >= 0.0 {
            self.vertices.extend_from_slice(&p);
        } else {
            self.vertices.extend_from_slice(&[p[0], p[2], p[1]]);
        }
        self.triangles.push([base, base + 1, base + 2]);
        self.labels.push(label);
    }

    /// Planar convex quad given in boundary order.
    pub fn quad(&mut self, q: [Vec3; 4], facing: Vec3, label: SurfaceLabel) {
        self.triangle([q[0], q[1], q[2]], facing, label);
        self.triangle([q[0], q[2], q[3]], facing, label);
    }

    pub fn build(self) -> TriMesh {
        let mut merged = MeshBuilder::default();
        let mut index = std::collections::HashMap::new();
        for (tri, label) in self.triangles.iter().zip(&self.labels) {
            let mut out = [0u32; 3];
            for (k, &vi) in tri.iter().enumerate() {
                let v = self.vertices[vi as usize];
                let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
                out[k] = *index.entry(key).or_insert_with(|| {
                    merged.vertices.push(v);
                    (merged.vertices.len() - 1) as u32
                });
            }
            merged.triangles.push(out);
            merged.labels.push(*label);
        }
        TriMesh {
            vertices: merged.vertices,
            triangles: merged.triangles,
            labels: Some(merged.labels),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeilingStyle {
    #[default]
    Flat,
    StarInset,
    DiamondInset,
    Coffered,
}

impl std::str::FromStr for CeilingStyle {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "flat" => Ok(Self::Flat),
            "star-inset" => Ok(Self::StarInset),
            "diamond-inset" => Ok(Self::DiamondInset),
            "coffered" => Ok(Self::Coffered),
            other => Err(format!("unknown ceiling style `{other}`")),
        }
    }
}

/// A door or window cut into one wall.
///
/// Walls are numbered counter-clockwise seen from above: 0 is the `-y` wall,
/// 1 the `+x` wall, 2 the `+y` wall and 3 the `-x` wall. `offset` runs along
/// the wall from its first corner in that order; `sill` is the height of the
/// opening's bottom edge (0 for doors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Opening {
    pub wall: u8,
    pub offset: f64,
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub sill: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
    #[serde(default)]
    pub baseboard: bool,
    #[serde(default = "default_baseboard_height")]
    pub baseboard_height: f64,
    #[serde(default)]
    pub doors: Vec<Opening>,
    #[serde(default)]
    pub windows: Vec<Opening>,
    #[serde(default)]
    pub ceiling: CeilingStyle,
}

fn default_baseboard_height() -> f64 {
    0.1
}

impl RoomSpec {
    pub fn new(width: f64, depth: f64, height: f64) -> Self {
        Self {
            width,
            depth,
            height,
            baseboard: false,
            baseboard_height: default_baseboard_height(),
            doors: Vec::new(),
            windows: Vec::new(),
            ceiling: CeilingStyle::Flat,
        }
    }

    /// Interior volume; floor at z = 0, centered in x/y.
    pub fn aabb(&self) -> Aabb {
        Aabb {
            min: Vec3::new(-self.width / 2.0, -self.depth / 2.0, 0.0),
            max: Vec3::new(self.width / 2.0, self.depth / 2.0, self.height),
        }
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, self.height / 2.0)
    }

    /// Strict interior test used for camera placement.
    pub fn strictly_contains(&self, p: &Vec3) -> bool {
        let bb = self.aabb();
        (0..3).all(|i| p[i] > bb.min[i] && p[i] < bb.max[i])
    }

    pub fn wall_length(&self, wall: u8) -> f64 {
        if wall % 2 == 0 {
            self.width
        } else {
            self.depth
        }
    }

    pub fn openings(&self) -> impl Iterator<Item = (SurfaceLabel, &Opening)> {
        self.doors
            .iter()
            .map(|o| (SurfaceLabel::Door, o))
            .chain(self.windows.iter().map(|o| (SurfaceLabel::Window, o)))
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        for (field, v) in [
            ("width", self.width),
            ("depth", self.depth),
            ("height", self.height),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SceneError::spec(field, format!("must be > 0, got {v}")));
            }
        }
        if self.baseboard && !(self.baseboard_height > 0.0 && self.baseboard_height < self.height)
        {
            return Err(SceneError::spec(
                "baseboard_height",
                format!("must lie in (0, height), got {}", self.baseboard_height),
            ));
        }
        let named: Vec<(String, &Opening)> = self
            .doors
            .iter()
            .enumerate()
            .map(|(i, o)| (format!("doors[{i}]"), o))
            .chain(
                self.windows
                    .iter()
                    .enumerate()
                    .map(|(i, o)| (format!("windows[{i}]"), o)),
            )
            .collect();
        for (name, o) in &named {
            if o.wall > 3 {
                return Err(SceneError::spec(format!("{name}.wall"), "must be 0..=3"));
            }
            if !(o.width > 0.0) {
                return Err(SceneError::spec(format!("{name}.width"), "must be > 0"));
            }
            if !(o.height > 0.0) {
                return Err(SceneError::spec(format!("{name}.height"), "must be > 0"));
            }
            if !(o.offset >= 0.0) || o.offset + o.width > self.wall_length(o.wall) {
                return Err(SceneError::spec(
                    format!("{name}.offset"),
                    "opening extends past the wall",
                ));
            }
            if !(o.sill >= 0.0) || o.sill + o.height >= self.height {
                return Err(SceneError::spec(
                    format!("{name}.height"),
                    "opening must end below the ceiling",
                ));
            }
        }
        for i in 0..named.len() {
            for j in i + 1..named.len() {
                let (a, b) = (named[i].1, named[j].1);
                if a.wall != b.wall {
                    continue;
                }
                let u = a.offset < b.offset + b.width && b.offset < a.offset + a.width;
                let z = a.sill < b.sill + b.height && b.sill < a.sill + a.height;
                if u && z {
                    return Err(SceneError::spec(
                        format!("{}", named[j].0),
                        format!("overlaps {}", named[i].0),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A posed object mesh with its object-level prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstance {
    pub id: String,
    /// Mesh in the object's local frame.
    pub mesh: TriMesh,
    pub transform: Similarity,
    pub description: String,
}

impl ObjectInstance {
    pub fn new(
        id: impl Into<String>,
        mesh: TriMesh,
        transform: Similarity,
        description: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            mesh,
            transform,
            description: description.into(),
        }
    }

    /// Box of the given size whose local frame is centered on the box.
    pub fn cuboid(id: impl Into<String>, size: Vec3, center: Vec3, description: &str) -> Self {
        Self::new(
            id,
            TriMesh::cuboid(size),
            Similarity::from_translation(center),
            description,
        )
    }

    pub fn world_mesh(&self) -> TriMesh {
        self.mesh.transformed(&self.transform).with_labels(SurfaceLabel::Object)
    }

    /// World-space AABB of the transformed vertices.
    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(
            self.mesh
                .vertices()
                .iter()
                .map(|v| self.transform.apply(v))
                .collect::<Vec<_>>()
                .iter(),
        )
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        validate_id(&self.id)?;
        if !(self.transform.scale > 0.0 && self.transform.scale.is_finite()) {
            return Err(SceneError::InvalidObject {
                id: self.id.clone(),
                reason: format!("scale must be > 0, got {}", self.transform.scale),
            });
        }
        if self.mesh.triangles().is_empty() {
            return Err(SceneError::InvalidObject {
                id: self.id.clone(),
                reason: "mesh has no triangles".into(),
            });
        }
        self.mesh.validate()
    }

    /// Local axes that span the horizontal footprint, after snapping the
    /// rotation to the nearest axis-aligned orientation. Returns
    /// `(long local axis, short local axis, vertical local axis)`.
    fn footprint_axes(&self) -> (usize, usize, usize) {
        let r = self.transform.rotation_matrix();
        let vertical = (0..3)
            .max_by(|&a, &b| {
                let za = (r * Vec3::ith(a, 1.0)).z.abs();
                let zb = (r * Vec3::ith(b, 1.0)).z.abs();
                za.partial_cmp(&zb).unwrap().then(b.cmp(&a))
            })
            .unwrap();
        let ext = self.mesh.aabb().extent();
        let mut horiz: Vec<usize> = (0..3).filter(|&i| i != vertical).collect();
        if ext[horiz[1]] > ext[horiz[0]] {
            horiz.swap(0, 1);
        }
        (horiz[0], horiz[1], vertical)
    }

    /// Horizontal footprint extents `(long, short)` in meters.
    pub fn footprint(&self) -> (f64, f64) {
        let (l, s, _) = self.footprint_axes();
        let ext = self.mesh.aabb().extent() * self.transform.scale;
        (ext[l], ext[s])
    }

    /// World direction of the footprint's long side, snapped to ±x or ±y.
    pub fn long_axis(&self) -> Vec3 {
        let (l, _, _) = self.footprint_axes();
        let d = self.transform.rotation_matrix() * Vec3::ith(l, 1.0);
        if d.x.abs() >= d.y.abs() {
            Vec3::new(d.x.signum(), 0.0, 0.0)
        } else {
            Vec3::new(0.0, d.y.signum(), 0.0)
        }
    }
}

/// Length-width ratio of the object's horizontal footprint (always ≥ 1).
pub fn object_aspect_ratio(obj: &ObjectInstance) -> Result<f64, SceneError> {
    let (long, short) = obj.footprint();
    if !(short > 0.0) || !long.is_finite() {
        return Err(SceneError::DegenerateObject(obj.id.clone()));
    }
    Ok(long / short)
}

pub fn validate_id(id: &str) -> Result<(), SceneError> {
    let ok = !id.is_empty()
        && id != ROOM_OWNER
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(SceneError::InvalidId(id.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenePrompts {
    /// Global prompt: style plus the description of the room's contents.
    pub style: String,
    #[serde(default)]
    pub negative: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub room: RoomSpec,
    pub interior: TriMesh,
    objects: Vec<ObjectInstance>,
    pub prompts: ScenePrompts,
}

impl Scene {
    /// Objects in ascending id order.
    pub fn objects(&self) -> &[ObjectInstance] {
        &self.objects
    }

    pub fn object(&self, id: &str) -> Option<&ObjectInstance> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Object prompt: the global style followed by the object description.
    pub fn object_prompt(&self, obj: &ObjectInstance) -> String {
        if self.prompts.style.is_empty() {
            obj.description.clone()
        } else {
            format!("{}, {}", self.prompts.style, obj.description)
        }
    }

    pub fn check_placement(&self, obj: &ObjectInstance) -> Result<(), SceneError> {
        let bb = obj.aabb();
        if !self.room.aabb().contains_aabb(&bb, 1e-9) {
            return Err(SceneError::Placement {
                id: obj.id.clone(),
                min: bb.min.into(),
                max: bb.max.into(),
            });
        }
        Ok(())
    }

    /// Inserts or replaces an object after validating it.
    pub fn upsert_object(&mut self, obj: ObjectInstance) -> Result<(), SceneError> {
        obj.validate()?;
        self.check_placement(&obj)?;
        match self.objects.binary_search_by(|o| o.id.as_str().cmp(&obj.id)) {
            Ok(i) => self.objects[i] = obj,
            Err(i) => self.objects.insert(i, obj),
        }
        Ok(())
    }

    pub fn insert_object(&mut self, obj: ObjectInstance) -> Result<(), SceneError> {
        if self.object(&obj.id).is_some() {
            return Err(SceneError::DuplicateId(obj.id));
        }
        self.upsert_object(obj)
    }

    pub fn remove_object(&mut self, id: &str) -> Option<ObjectInstance> {
        let i = self.objects.iter().position(|o| o.id == id)?;
        Some(self.objects.remove(i))
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.room.validate()?;
        self.interior.validate()?;
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.id.as_str()) {
                return Err(SceneError::DuplicateId(o.id.clone()));
            }
            o.validate()?;
            self.check_placement(o)?;
        }
        Ok(())
    }
}

impl Scene {
    /// Scene from an existing interior mesh, e.g. one loaded from disk.
    pub fn from_parts(
        room: RoomSpec,
        interior: TriMesh,
        objects: Vec<ObjectInstance>,
        prompts: ScenePrompts,
    ) -> Result<Scene, SceneError> {
        room.validate()?;
        interior.validate()?;
        let mut scene = Scene {
            room,
            interior,
            objects: Vec::with_capacity(objects.len()),
            prompts,
        };
        for obj in objects {
            scene.insert_object(obj)?;
        }
        Ok(scene)
    }
}

/// Builds a validated scene from a room layout and posed objects.
pub fn assemble_scene(
    spec: RoomSpec,
    objects: Vec<ObjectInstance>,
    prompts: ScenePrompts,
) -> Result<Scene, SceneError> {
    let interior = crate::room::generate_empty_room(&spec)?;
    let mut scene = Scene {
        room: spec,
        interior,
        objects: Vec::with_capacity(objects.len()),
        prompts,
    };
    for obj in objects {
        scene.insert_object(obj)?;
    }
    Ok(scene)
}
