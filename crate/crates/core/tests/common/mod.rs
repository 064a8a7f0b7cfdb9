//! Fixtures and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use scenepaint_core::geometry::{Similarity, Vec3};
use scenepaint_core::imaging::{canny_edges, EdgeParams};
use scenepaint_core::pipeline::{PipelineConfig, TexturedScene};
use scenepaint_core::planner::{plan_views, sample_surface, visible_from};
use scenepaint_core::projection::{intersect_triangle, PerspCamera, RayTriangle, Tracer};
use scenepaint_core::raster::{BitMask, DepthMap, Raster, RgbImage};
use scenepaint_core::scene::{
    assemble_scene, CeilingStyle, ObjectInstance, RoomSpec, Scene, ScenePrompts, TriMesh,
};

pub fn prompts() -> ScenePrompts {
    ScenePrompts {
        style: "scandinavian bedroom".into(),
        negative: "blurry".into(),
    }
}

/// 4×4×3 m room with a bed and a table on the floor.
pub fn two_box_scene() -> Scene {
    assemble_scene(
        RoomSpec::new(4.0, 4.0, 3.0),
        vec![
            ObjectInstance::cuboid("bed", Vec3::new(1.6, 1.2, 0.6), Vec3::new(1.0, 0.8, 0.3), "a wooden bed"),
            ObjectInstance::cuboid("table", Vec3::new(0.8, 0.8, 0.75), Vec3::new(-1.0, -1.0, 0.375), "a small table"),
        ],
        prompts(),
    )
    .unwrap()
}

pub fn one_box_scene() -> Scene {
    assemble_scene(
        RoomSpec::new(4.0, 4.0, 3.0),
        vec![ObjectInstance::cuboid("cube", Vec3::new(0.8, 0.8, 0.8), Vec3::new(1.0, 0.5, 0.4), "a red cube")],
        prompts(),
    )
    .unwrap()
}

pub fn empty_scene() -> Scene {
    assemble_scene(RoomSpec::new(4.0, 4.0, 3.0), vec![], prompts()).unwrap()
}

/// Reduced resolutions keep pipeline tests fast; geometry is unchanged.
pub fn small_config() -> PipelineConfig {
    PipelineConfig {
        pano_height: 256,
        view_resolution: 256,
        max_views: Some(4),
        ..PipelineConfig::default()
    }
}

pub fn scene_meshes(scene: &Scene) -> Vec<TriMesh> {
    std::iter::once(scene.interior.clone())
        .chain(scene.objects().iter().map(|o| o.world_mesh()))
        .collect()
}

/// Nearest hit over every triangle without any acceleration structure:
/// `(t, mesh index, triangle index)`; equal `t` keeps the first triangle.
pub fn brute_force_cast(meshes: &[TriMesh], origin: &Vec3, dir: &Vec3) -> Option<(f64, usize, usize)> {
    let mut best: Option<(f64, usize, usize)> = None;
    for (m, mesh) in meshes.iter().enumerate() {
        for t in 0..mesh.triangles().len() {
            if let Some(d) = intersect_triangle(origin, dir, &RayTriangle::new(mesh.triangle(t))) {
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, m, t));
                }
            }
        }
    }
    best
}

/// Set-based disk dilation: every pixel within Euclidean distance `r` of a set pixel.
pub fn oracle_dilate(mask: &BitMask, r: u32) -> BitMask {
    let pts: Vec<(i64, i64)> = mask.coords().map(|(x, y)| (x as i64, y as i64)).collect();
    let r2 = (r as i64) * (r as i64);
    BitMask::from_fn(mask.width(), mask.height(), |x, y| {
        pts.iter().any(|&(px, py)| (px - x as i64).pow(2) + (py - y as i64).pow(2) <= r2)
    })
}

/// Set-based disk erosion: pixels whose in-image disk lies in the mask; outside counts as set.
pub fn oracle_erode(mask: &BitMask, r: u32) -> BitMask {
    let ri = r as i64;
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    BitMask::from_fn(mask.width(), mask.height(), |x, y| {
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if dx * dx + dy * dy > ri * ri {
                    continue;
                }
                let (px, py) = (x as i64 + dx, y as i64 + dy);
                if px < 0 || py < 0 || px >= w || py >= h {
                    continue;
                }
                if !*mask.get(px as usize, py as usize) {
                    return false;
                }
            }
        }
        true
    })
}

/// O(N·M) nearest known pixel; ties go to the smallest row-major index.
pub fn oracle_nearest_fill(img: &RgbImage, unknown: &BitMask) -> RgbImage {
    let known: Vec<(usize, usize)> = unknown.not().coords().collect();
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        if !*unknown.get(x, y) {
            return *img.get(x, y);
        }
        let mut best = (u64::MAX, 0usize);
        for &(kx, ky) in &known {
            let d = (kx as i64 - x as i64).pow(2) as u64 + (ky as i64 - y as i64).pow(2) as u64;
            let idx = ky * img.width() + kx;
            if d < best.0 || (d == best.0 && idx < best.1) {
                best = (d, idx);
            }
        }
        img.data()[best.1]
    })
}

/// Reference 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Deterministic pseudo-random stream for fixtures.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    pub fn unit(&mut self) -> f64 {
        self.next_u64() as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

pub fn random_mask(w: usize, h: usize, density: f64, rng: &mut Lcg) -> BitMask {
    BitMask::from_fn(w, h, |_, _| rng.unit() < density)
}

/// `(covered, reachable)` over 10k surface samples of object `id`: reachable
/// samples are visible from some planned camera, covered ones have an owned
/// point within 1 cm.
pub fn surface_coverage(ts: &TexturedScene, id: &str, cfg: &PipelineConfig) -> (usize, usize) {
    let obj = ts.scene.object(id).unwrap();
    let plan = plan_views(obj, &ts.scene.room, scenepaint_core::pipeline::plan_seed(ts.seed, id)).unwrap();
    let plan = match cfg.max_views {
        Some(m) => plan.truncated(m),
        None => plan,
    };
    let cams: Vec<_> = plan.cameras().iter().map(|c| cfg.rescale(c)).collect();
    let tracer = Tracer::new(&scene_meshes(&ts.scene));
    let samples = sample_surface(&obj.world_mesh(), 10_000, 7);
    let pts = ts.owned(id);
    let cell = 0.01;
    let key = |p: &Vec3| {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    };
    let mut grid: HashMap<_, Vec<usize>> = HashMap::new();
    for (i, p) in pts.points.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i);
    }
    let (mut covered, mut reachable) = (0, 0);
    for s in &samples {
        if !cams.iter().any(|c| visible_from(&tracer, c, s, 1e-6)) {
            continue;
        }
        reachable += 1;
        let (kx, ky, kz) = key(s);
        let near = (-1..=1).any(|dx| {
            (-1..=1).any(|dy| {
                (-1..=1).any(|dz| {
                    grid.get(&(kx + dx, ky + dy, kz + dz))
                        .is_some_and(|v| v.iter().any(|&i| (pts.points[i] - s).norm() <= 0.01))
                })
            })
        });
        if near {
            covered += 1;
        }
    }
    (covered, reachable)
}

/// Brute-force depth and nearest-mesh index for every pixel of a ray generator.
pub fn brute_force_render(
    meshes: &[TriMesh],
    width: usize,
    height: usize,
    origin: Vec3,
    dir: impl Fn(usize, usize) -> Vec3 + Sync,
) -> (DepthMap, Raster<i64>) {
    use rayon::prelude::*;
    let cells: Vec<(f64, i64)> = (0..width * height)
        .into_par_iter()
        .map(|i| match brute_force_cast(meshes, &origin, &dir(i % width, i / width)) {
            Some((t, m, _)) => (t, m as i64),
            None => (f64::INFINITY, -1),
        })
        .collect();
    let (d, m): (Vec<f64>, Vec<i64>) = cells.into_iter().unzip();
    (Raster::from_vec(width, height, d), Raster::from_vec(width, height, m))
}

/// Random box room with 1 to 5 yawed boxes that keep clear of the room center.
pub fn random_box_scene(seed: u64) -> Scene {
    let mut rng = Lcg(seed.wrapping_mul(0x9e3779b97f4a7c15) ^ 0x5eed);
    let mut spec = RoomSpec::new(3.0 + 4.0 * rng.unit(), 3.0 + 4.0 * rng.unit(), 2.4 + 1.2 * rng.unit());
    spec.ceiling = [CeilingStyle::Flat, CeilingStyle::StarInset, CeilingStyle::DiamondInset, CeilingStyle::Coffered]
        [rng.below(4)];
    spec.baseboard = rng.unit() < 0.5;
    let mut scene = assemble_scene(spec.clone(), vec![], prompts()).unwrap();
    let center = spec.center();
    let count = 1 + rng.below(5);
    let mut attempts = 0;
    while scene.objects().len() < count && attempts < 200 {
        attempts += 1;
        let size = Vec3::new(0.3 + rng.unit(), 0.3 + rng.unit(), 0.3 + rng.unit());
        let pos = Vec3::new(
            (rng.unit() - 0.5) * (spec.width - 1.0),
            (rng.unit() - 0.5) * (spec.depth - 1.0),
            size.z / 2.0 + rng.unit() * 0.5,
        );
        let xf = Similarity::from_translation(pos).with_yaw(rng.unit() * std::f64::consts::TAU);
        let obj = ObjectInstance::new(format!("box{attempts}"), TriMesh::cuboid(size), xf, "box");
        if obj.aabb().distance_to(&center) < 0.3 {
            continue;
        }
        let _ = scene.insert_object(obj);
    }
    scene
}

/// Random camera strictly inside the room, outside every object, aimed at an object.
pub fn random_persp_camera(scene: &Scene, rng: &mut Lcg, resolution: usize) -> PerspCamera {
    let r = &scene.room;
    loop {
        let pos = Vec3::new(
            (rng.unit() - 0.5) * (r.width - 0.4),
            (rng.unit() - 0.5) * (r.depth - 0.4),
            0.2 + rng.unit() * (r.height - 0.4),
        );
        if scene.objects().iter().any(|o| o.aabb().distance_to(&pos) < 0.2) {
            continue;
        }
        let target = match scene.objects() {
            [] => r.center() + Vec3::new(1.0, 0.3, -0.2),
            objs => objs[rng.below(objs.len())].aabb().center(),
        };
        let focal = resolution as f64 * (0.3 + rng.unit());
        if let Ok(cam) = PerspCamera::look_at(pos, target, focal, resolution) {
            return cam;
        }
    }
}

/// Euclidean distance from `p` to a triangle (closest-point construction).
pub fn point_triangle_distance(p: &Vec3, [a, b, c]: [Vec3; 3]) -> f64 {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return (p - a).norm();
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return (p - b).norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return (p - (a + ab * (d1 / (d1 - d3)))).norm();
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return (p - c).norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return (p - (a + ac * (d2 / (d2 - d6)))).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return (p - (b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6))))).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    (p - (a + ab * (vb * denom) + ac * (vc * denom))).norm()
}

pub fn point_mesh_distance(p: &Vec3, meshes: &[TriMesh]) -> f64 {
    meshes
        .iter()
        .flat_map(|m| (0..m.triangles().len()).map(move |t| point_triangle_distance(p, m.triangle(t))))
        .fold(f64::INFINITY, f64::min)
}

/// Pixels where the BVH render differs from brute force (depth bits or
/// nearest mesh), for the room-centered panorama and one random pinhole view.
pub fn render_oracle_mismatches(scene: &Scene, pano_height: usize, persp_res: usize, cam_seed: u64) -> (usize, usize) {
    use scenepaint_core::projection::{render_pano, render_persp, PanoCamera};
    let meshes = scene_meshes(scene);
    let tracer = Tracer::new(&meshes);
    let count = |depth: &DepthMap, hits: &Raster<scenepaint_core::projection::HitId>, bd: &DepthMap, bm: &Raster<i64>| {
        (0..depth.len())
            .filter(|&i| {
                let mesh = if hits.data()[i].is_hit() { hits.data()[i].mesh as i64 } else { -1 };
                depth.data()[i].to_bits() != bd.data()[i].to_bits() || mesh != bm.data()[i]
            })
            .count()
    };
    let pano = PanoCamera::new(scene.room.center(), pano_height);
    let r = render_pano(&tracer, &pano);
    let (bd, bm) = brute_force_render(&meshes, pano.width, pano.height, pano.center, |u, v| pano.pixel_dir(u, v));
    let pano_bad = count(&r.depth, &r.hits, &bd, &bm);

    let cam = random_persp_camera(scene, &mut Lcg(cam_seed), persp_res);
    let frame = cam.frame();
    let r = render_persp(&tracer, &cam);
    let (bd, bm) = brute_force_render(&meshes, persp_res, persp_res, cam.position, |x, y| {
        cam.pixel_dir_with(&frame, x, y)
    });
    (pano_bad, count(&r.depth, &r.hits, &bd, &bm))
}

/// Counts backend calls and forwards them to the mock.
#[derive(Default)]
pub struct CountingPainter {
    pub calls: std::sync::atomic::AtomicUsize,
}

impl scenepaint_core::painter::Painter for CountingPainter {
    fn identity(&self) -> String {
        "counting-mock".into()
    }

    fn paint(
        &self,
        req: &scenepaint_core::painter::PaintRequest,
    ) -> Result<scenepaint_core::painter::PaintResult, scenepaint_core::painter::PaintError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        scenepaint_core::painter::MockPainter.paint(req)
    }
}

/// Keeps every view record, progress event and checkpoint.
#[derive(Default)]
pub struct Recorder {
    pub views: std::sync::Mutex<Vec<scenepaint_core::pipeline::ViewRecord>>,
    pub events: std::sync::Mutex<Vec<scenepaint_core::pipeline::ProgressEvent>>,
    pub checkpoints: std::sync::Mutex<Vec<(scenepaint_core::pipeline::JobState, bool)>>,
}

impl scenepaint_core::pipeline::Observer for Recorder {
    fn progress(&self, e: &scenepaint_core::pipeline::ProgressEvent) {
        self.events.lock().unwrap().push(e.clone());
    }

    fn view(&self, r: &scenepaint_core::pipeline::ViewRecord) {
        self.views.lock().unwrap().push(r.clone());
    }

    fn checkpoint(&self, s: &scenepaint_core::pipeline::JobState, object_done: bool) {
        self.checkpoints.lock().unwrap().push((s.clone(), object_done));
    }
}

/// Mock-textured scene at test resolution.
pub fn texture_small(scene: &Scene, seed: u64, observer: &dyn scenepaint_core::pipeline::Observer) -> TexturedScene {
    scenepaint_core::pipeline::texture_scene(
        scene,
        &scenepaint_core::painter::MockPainter,
        &scenepaint_core::painter::NullScorer,
        &small_config(),
        seed,
        observer,
        None,
    )
    .unwrap()
}

/// 4-neighbor Laplacian with linearly extrapolated borders and misses at
/// max finite depth + 1 m.
pub fn oracle_laplacian_edges(depth: &DepthMap, threshold: f64) -> BitMask {
    let (w, h) = depth.dims();
    let hi = depth.data().iter().copied().filter(|d| d.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    let d = |x: usize, y: usize| {
        let v = *depth.get(x, y);
        if v.is_finite() { v } else { hi + 1.0 }
    };
    let sample = |x: i64, y: i64| -> f64 {
        let (cx, cy) = (x.clamp(0, w as i64 - 1), y.clamp(0, h as i64 - 1));
        let inner = d(cx as usize, cy as usize);
        if x < 0 || x >= w as i64 {
            let step = if x < 0 { 1 } else { -1 };
            return 2.0 * inner - d((cx + step) as usize, cy as usize);
        }
        if y < 0 || y >= h as i64 {
            let step = if y < 0 { 1 } else { -1 };
            return 2.0 * inner - d(cx as usize, (cy + step) as usize);
        }
        inner
    };
    BitMask::from_fn(w, h, |x, y| {
        let (xi, yi) = (x as i64, y as i64);
        let lap = sample(xi - 1, yi) + sample(xi + 1, yi) + sample(xi, yi - 1) + sample(xi, yi + 1) - 4.0 * d(x, y);
        lap.abs() > threshold
    })
}

pub fn oracle_misalignment(img: &RgbImage, depth: &DepthMap, p: &EdgeParams) -> BitMask {
    let color = canny_edges(img, p);
    let geo = oracle_laplacian_edges(depth, p.laplacian_threshold);
    let kept = color.and(&oracle_dilate(&geo, p.dilate_radius));
    oracle_erode(&oracle_dilate(&kept.or(&geo), p.dilate_radius), p.erode_radius)
}

/// Color and depth step on the same column, plus a color-only step far away.
pub fn step_scene(w: usize, h: usize, col: usize, far_col: usize) -> (RgbImage, DepthMap) {
    let img = RgbImage::from_fn(w, h, |x, _| {
        let a: u8 = if x < col { 30 } else { 220 };
        let b: u8 = if x < far_col { 0 } else { 120 };
        [a, a.wrapping_add(b) / 2, 90]
    });
    let depth = DepthMap::from_fn(w, h, |x, _| if x < col { 2.0 } else { 3.0 });
    (img, depth)
}

pub fn seeded_layout(w: usize, h: usize, seeds: usize, rng: &mut Lcg) -> (RgbImage, BitMask) {
    let img = RgbImage::from_fn(w, h, |x, y| [(x * 7) as u8, (y * 13) as u8, (x ^ y) as u8]);
    let mut unknown = BitMask::filled(w, h, true);
    for _ in 0..seeds {
        unknown.set(rng.below(w), rng.below(h), false);
    }
    (img, unknown)
}
