mod common;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

use proptest::prelude::*;
use scenepaint_core::geometry::{Similarity, Vec3};
use scenepaint_core::planner::{candidate_views, initial_view, plan_views, refinement_views, ViewRole};
use scenepaint_core::scene::{ObjectInstance, RoomSpec, TriMesh};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Azimuth in [0, 2π).
fn azimuth(d: &Vec3) -> f64 {
    d.y.atan2(d.x).rem_euclid(2.0 * PI)
}

fn on_grid(angle: f64, offset: f64) -> bool {
    (0..4).any(|k| close(angle, (offset + k as f64 * FRAC_PI_2).rem_euclid(2.0 * PI), 1e-9))
}

#[test]
fn centered_unit_cube_gets_sixteen_views() {
    let room = RoomSpec::new(10.0, 10.0, 5.0);
    let cube = ObjectInstance::cuboid("cube", Vec3::new(1.0, 1.0, 1.0), Vec3::new(0.0, 0.0, 1.5), "cube");
    let plan = plan_views(&cube, &room, 7).unwrap();
    assert_eq!(plan.candidates, 16);
    assert_eq!(plan.views.len(), 16);
    assert!(plan.dropped.is_empty());
    let c = Vec3::new(0.0, 0.0, 1.5);
    let diag = 3f64.sqrt();
    let (mut basic, mut additional) = (0, 0);
    for v in &plan.views {
        let rel = v.camera.position - c;
        let r = rel.norm();
        match v.role {
            ViewRole::Basic => {
                basic += 1;
                assert!(close(r, 1.1 * diag, 1e-9));
                let polar = (rel.z / r).acos();
                assert!(close(polar, FRAC_PI_4, 1e-9) || close(polar, 3.0 * FRAC_PI_4, 1e-9), "polar {polar}");
                assert!(on_grid(azimuth(&rel), FRAC_PI_4));
            }
            ViewRole::AdditionalGroup0 => {
                additional += 1;
                assert!(close(r, 0.7 * diag, 1e-9));
                let elevation = (rel.z.abs() / r).asin();
                assert!((FRAC_PI_6 - 1e-12..=FRAC_PI_3 + 1e-12).contains(&elevation), "elevation {elevation}");
                assert!(on_grid(azimuth(&rel), 0.0));
            }
            other => panic!("unexpected role {other:?}"),
        }
        assert!(room.strictly_contains(&v.camera.position));
    }
    assert_eq!((basic, additional), (8, 8));
    let ups = plan.views.iter().filter(|v| v.role == ViewRole::AdditionalGroup0 && v.camera.position.z > c.z).count();
    assert_eq!(ups, 4);

    // Basic positions are closed under a quarter turn about the cube's vertical axis.
    let basics: Vec<Vec3> = plan.views.iter().filter(|v| v.role == ViewRole::Basic).map(|v| v.camera.position - c).collect();
    for p in &basics {
        let turned = Vec3::new(-p.y, p.x, p.z);
        assert!(basics.iter().any(|q| (q - turned).norm() < 1e-9));
    }
}

#[test]
fn elongated_object_splits_additional_views_at_thirds() {
    let sofa = ObjectInstance::cuboid("sofa", Vec3::new(3.0, 1.0, 1.0), Vec3::new(0.0, 0.0, 1.5), "sofa");
    let views = candidate_views(&sofa, 3).unwrap();
    assert_eq!(views.len(), 24);
    let group = |role| views.iter().filter(move |v| v.role == role).collect::<Vec<_>>();
    assert_eq!(group(ViewRole::Basic).len(), 8);
    for (role, x) in [(ViewRole::AdditionalGroup0, 1.0), (ViewRole::AdditionalGroup1, -1.0)] {
        let g = group(role);
        assert_eq!(g.len(), 8);
        for v in g {
            assert!((v.camera.target - Vec3::new(x, 0.0, 1.5)).norm() < 1e-12, "{role:?} {:?}", v.camera.target);
        }
    }
    let plan = plan_views(&sofa, &RoomSpec::new(10.0, 10.0, 5.0), 3).unwrap();
    assert_eq!(plan.candidates, 24);
}

#[test]
fn wall_adjacent_object_drops_outside_cameras() {
    let room = RoomSpec::new(4.0, 4.0, 3.0);
    let wardrobe = ObjectInstance::cuboid("wardrobe", Vec3::new(1.2, 0.6, 2.0), Vec3::new(0.5, 1.7, 1.0), "wardrobe");
    let plan = plan_views(&wardrobe, &room, 1).unwrap();
    assert!(!plan.views.is_empty());
    assert!(plan.dropped.iter().any(|v| v.role == ViewRole::Basic && v.camera.position.y >= 2.0));
    let inside = |p: &Vec3| p.x.abs() < 2.0 && p.y.abs() < 2.0 && p.z > 0.0 && p.z < 3.0;
    assert!(plan.cameras().iter().all(|c| inside(&c.position)));
    assert_eq!(plan.views.len() + plan.dropped.len(), plan.candidates);
}

#[test]
fn two_meter_object_at_four_meters_needs_focal_near_1024() {
    let room = RoomSpec::new(10.0, 10.0, 3.0);
    let panel = ObjectInstance::cuboid("panel", Vec3::new(0.02, 2.0, 0.5), Vec3::new(4.0, 0.0, 1.5), "panel");
    let cam = initial_view(&panel, &room, room.center()).unwrap();
    let grid = 500.0 * 1.1f64.powi(8);
    assert!(close(cam.focal, grid, 1e-9 * grid), "focal {}", cam.focal);
    // First grid value whose projected 2 m width reaches half the image.
    assert!(cam.focal * 2.0 / 4.0 >= 512.0);
    assert!(cam.focal / 1.1 * 2.0 / 3.99 < 512.0);
}

#[test]
fn large_object_keeps_the_default_focal() {
    let room = RoomSpec::new(10.0, 10.0, 3.0);
    let bed = ObjectInstance::cuboid("bed", Vec3::new(0.5, 2.2, 0.6), Vec3::new(1.5, 0.0, 1.0), "bed");
    assert_eq!(initial_view(&bed, &room, room.center()).unwrap().focal, 500.0);
}

#[test]
fn refinement_focal_follows_the_long_side() {
    let (down, up) = refinement_views(&RoomSpec::new(6.0, 4.0, 3.0)).unwrap();
    let span_px = |f: f64| f * 6.0 / 1.5;
    assert!(down.focal >= 0.9 * 1024.0 * 1.5 / 6.0, "focal {}", down.focal);
    assert!(span_px(down.focal) <= 1024.0 && span_px(down.focal * 1.1) > 1024.0);
    let k = (down.focal / 500.0).ln() / 1.1f64.ln();
    assert!(close(k, k.round(), 1e-9));
    assert_eq!(down.focal, up.focal);

    let (down, up) = refinement_views(&RoomSpec::new(4.0, 4.0, 3.0)).unwrap();
    assert!(((down.target - down.position).normalize() - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    assert_eq!(down.target, Vec3::zeros());
    assert_eq!(down.focal, up.focal);
}

fn ray_hits_box(o: &Vec3, d: &Vec3, lo: &Vec3, hi: &Vec3) -> bool {
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return false;
            }
            continue;
        }
        let (n, f) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
        t0 = t0.max(n.min(f));
        t1 = t1.min(n.max(f));
    }
    t0 <= t1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planned_cameras_respect_the_invariants(
        w in 3.5f64..8.0, d in 3.5f64..8.0, h in 2.5f64..4.0,
        sx in 0.3f64..1.5, sy in 0.3f64..1.5, sz in 0.3f64..1.5,
        fx in -0.45f64..0.45, fy in -0.45f64..0.45, yaw in 0.0f64..6.28, seed in any::<u64>(),
    ) {
        let room = RoomSpec::new(w, d, h);
        let size = Vec3::new(sx, sy, sz);
        let pos = Vec3::new(fx * (w - 2.0), fy * (d - 2.0), sz / 2.0);
        let obj = ObjectInstance::new("o", TriMesh::cuboid(size), Similarity::from_translation(pos).with_yaw(yaw), "o");
        prop_assume!(obj.aabb().distance_to(&room.center()) > 0.05);
        let Ok(plan) = plan_views(&obj, &room, seed) else { return Ok(()) };
        prop_assert_eq!(&plan, &plan_views(&obj, &room, seed).unwrap());
        let bb = obj.aabb();
        for v in &plan.views {
            let p = v.camera.position;
            prop_assert!(p.x.abs() < w / 2.0 && p.y.abs() < d / 2.0 && p.z > 0.0 && p.z < h);
            prop_assert!(bb.distance_to(&p) >= 0.3);
            let dir = v.camera.target - p;
            prop_assert!(ray_hits_box(&p, &dir, &bb.min, &bb.max));
        }
    }
}
