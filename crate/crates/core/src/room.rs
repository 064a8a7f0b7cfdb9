//! Procedural empty-room generator.
//!
//! The interior is a box centered in x/y with the floor at z = 0 and all
//! faces pointing into the room. Doors and windows are recessed quads (so
//! depth renders stay closed) and the ceiling carries an optional inset
//! decoration.

use std::f64::consts::TAU;

use crate::geometry::Vec3;
use crate::scene::{CeilingStyle, MeshBuilder, Opening, RoomSpec, SceneError, SurfaceLabel, TriMesh};

/// Depth of door/window recesses behind the wall plane.
pub const OPENING_RECESS: f64 = 0.05;
/// Baseboard thickness in front of the wall.
pub const BASEBOARD_THICKNESS: f64 = 0.01;

/// Named dimensions of the ceiling decorations, as fractions of the room's
/// shorter side unless noted.
pub struct CeilingStyleTable {
    pub inset_depth: f64,
    pub star_points: usize,
    pub star_outer: f64,
    pub star_inner: f64,
    pub diamond_radius: f64,
    pub coffer_cells: usize,
    pub coffer_beam: f64,
    pub coffer_depth: f64,
}

pub const CEILING_STYLES: CeilingStyleTable = CeilingStyleTable {
    inset_depth: 0.08,
    star_points: 8,
    star_outer: 0.30,
    star_inner: 0.15,
    diamond_radius: 0.30,
    coffer_cells: 3,
    coffer_beam: 0.10,
    coffer_depth: 0.06,
};

struct WallFrame {
    origin: Vec3,
    tangent: Vec3,
    inward: Vec3,
    length: f64,
}

impl WallFrame {
    fn new(spec: &RoomSpec, wall: u8) -> Self {
        let (w, d) = (spec.width / 2.0, spec.depth / 2.0);
        let (origin, tangent, inward) = match wall {
            0 => (Vec3::new(-w, -d, 0.0), Vec3::x(), Vec3::y()),
            1 => (Vec3::new(w, -d, 0.0), Vec3::y(), -Vec3::x()),
            2 => (Vec3::new(w, d, 0.0), -Vec3::x(), -Vec3::y()),
            _ => (Vec3::new(-w, d, 0.0), -Vec3::y(), Vec3::x()),
        };
        Self {
            origin,
            tangent,
            inward,
            length: spec.wall_length(wall),
        }
    }

    /// Point at `u` along the wall, height `z`, `depth` meters behind the wall plane.
    fn at(&self, u: f64, z: f64, depth: f64) -> Vec3 {
        self.origin + self.tangent * u + Vec3::z() * z - self.inward * depth
    }
}

/// Generates the labeled interior mesh for a room spec.
pub fn generate_empty_room(spec: &RoomSpec) -> Result<TriMesh, SceneError> {
    spec.validate()?;
    let mut b = MeshBuilder::default();
    let bb = spec.aabb();
    let (x0, y0, x1, y1) = (bb.min.x, bb.min.y, bb.max.x, bb.max.y);

    b.quad(
        [
            Vec3::new(x0, y0, 0.0),
            Vec3::new(x1, y0, 0.0),
            Vec3::new(x1, y1, 0.0),
            Vec3::new(x0, y1, 0.0),
        ],
        Vec3::z(),
        SurfaceLabel::Floor,
    );
    for wall in 0..4u8 {
        build_wall(&mut b, spec, wall);
    }
    match spec.ceiling {
        CeilingStyle::Flat => b.quad(
            [
                Vec3::new(x0, y0, spec.height),
                Vec3::new(x1, y0, spec.height),
                Vec3::new(x1, y1, spec.height),
                Vec3::new(x0, y1, spec.height),
            ],
            -Vec3::z(),
            SurfaceLabel::Ceiling,
        ),
        CeilingStyle::StarInset => {
            let r = spec.width.min(spec.depth);
            let n = CEILING_STYLES.star_points * 2;
            let poly: Vec<(f64, f64)> = (0..n)
                .map(|k| {
                    let a = TAU * k as f64 / n as f64;
                    let rad = if k % 2 == 0 {
                        CEILING_STYLES.star_outer
                    } else {
                        CEILING_STYLES.star_inner
                    } * r;
                    (rad * a.cos(), rad * a.sin())
                })
                .collect();
            polygon_inset_ceiling(&mut b, spec, &poly, CEILING_STYLES.inset_depth);
        }
        CeilingStyle::DiamondInset => {
            let r = spec.width.min(spec.depth) * CEILING_STYLES.diamond_radius;
            let poly = vec![(r, 0.0), (0.0, r), (-r, 0.0), (0.0, -r)];
            polygon_inset_ceiling(&mut b, spec, &poly, CEILING_STYLES.inset_depth);
        }
        CeilingStyle::Coffered => coffered_ceiling(&mut b, spec),
    }
    if spec.baseboard {
        for wall in 0..4u8 {
            build_baseboard(&mut b, spec, wall);
        }
    }
    Ok(b.build())
}

fn sorted_breaks(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    v
}

fn build_wall(b: &mut MeshBuilder, spec: &RoomSpec, wall: u8) {
    let f = WallFrame::new(spec, wall);
    let openings: Vec<(SurfaceLabel, &Opening)> =
        spec.openings().filter(|(_, o)| o.wall == wall).collect();
    let mut us = vec![0.0, f.length];
    let mut zs = vec![0.0, spec.height];
    for (_, o) in &openings {
        us.extend([o.offset, o.offset + o.width]);
        zs.extend([o.sill, o.sill + o.height]);
    }
    let us = sorted_breaks(us);
    let zs = sorted_breaks(zs);
    for i in 0..us.len() - 1 {
        for j in 0..zs.len() - 1 {
            let (um, zm) = ((us[i] + us[i + 1]) / 2.0, (zs[j] + zs[j + 1]) / 2.0);
            let inside_opening = openings.iter().any(|(_, o)| {
                um > o.offset && um < o.offset + o.width && zm > o.sill && zm < o.sill + o.height
            });
            if inside_opening {
                continue;
            }
            b.quad(
                [
                    f.at(us[i], zs[j], 0.0),
                    f.at(us[i + 1], zs[j], 0.0),
                    f.at(us[i + 1], zs[j + 1], 0.0),
                    f.at(us[i], zs[j + 1], 0.0),
                ],
                f.inward,
                SurfaceLabel::Wall,
            );
        }
    }
    let d = OPENING_RECESS;
    for (label, o) in openings {
        let (u0, u1, z0, z1) = (o.offset, o.offset + o.width, o.sill, o.sill + o.height);
        // back panel
        b.quad(
            [f.at(u0, z0, d), f.at(u1, z0, d), f.at(u1, z1, d), f.at(u0, z1, d)],
            f.inward,
            label,
        );
        // jambs, sill and head
        b.quad(
            [f.at(u0, z0, 0.0), f.at(u1, z0, 0.0), f.at(u1, z0, d), f.at(u0, z0, d)],
            Vec3::z(),
            label,
        );
        b.quad(
            [f.at(u0, z1, 0.0), f.at(u1, z1, 0.0), f.at(u1, z1, d), f.at(u0, z1, d)],
            -Vec3::z(),
            label,
        );
        b.quad(
            [f.at(u0, z0, 0.0), f.at(u0, z1, 0.0), f.at(u0, z1, d), f.at(u0, z0, d)],
            f.tangent,
            label,
        );
        b.quad(
            [f.at(u1, z0, 0.0), f.at(u1, z1, 0.0), f.at(u1, z1, d), f.at(u1, z0, d)],
            -f.tangent,
            label,
        );
    }
}

fn build_baseboard(b: &mut MeshBuilder, spec: &RoomSpec, wall: u8) {
    let f = WallFrame::new(spec, wall);
    let h = spec.baseboard_height;
    let t = BASEBOARD_THICKNESS;
    // Openings whose bottom edge sits below the baseboard interrupt it.
    let mut gaps: Vec<(f64, f64)> = spec
        .openings()
        .filter(|(_, o)| o.wall == wall && o.sill < h)
        .map(|(_, o)| (o.offset, o.offset + o.width))
        .collect();
    gaps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut segments = Vec::new();
    let mut start = 0.0;
    for (g0, g1) in gaps {
        if g0 > start {
            segments.push((start, g0));
        }
        start = start.max(g1);
    }
    if start < f.length {
        segments.push((start, f.length));
    }
    for (u0, u1) in segments {
        b.quad(
            [f.at(u0, 0.0, -t), f.at(u1, 0.0, -t), f.at(u1, h, -t), f.at(u0, h, -t)],
            f.inward,
            SurfaceLabel::Baseboard,
        );
        b.quad(
            [f.at(u0, h, 0.0), f.at(u1, h, 0.0), f.at(u1, h, -t), f.at(u0, h, -t)],
            Vec3::z(),
            SurfaceLabel::Baseboard,
        );
        for (u, facing) in [(u0, -f.tangent), (u1, f.tangent)] {
            b.quad(
                [f.at(u, 0.0, 0.0), f.at(u, 0.0, -t), f.at(u, h, -t), f.at(u, h, 0.0)],
                facing,
                SurfaceLabel::Baseboard,
            );
        }
    }
}

/// Where a ray from the origin at angle `a` leaves the star-shaped polygon.
fn polygon_at_angle(poly: &[(f64, f64)], a: f64) -> (f64, f64) {
    let d = (a.cos(), a.sin());
    let mut best = f64::INFINITY;
    for k in 0..poly.len() {
        let p = poly[k];
        let q = poly[(k + 1) % poly.len()];
        let e = (q.0 - p.0, q.1 - p.1);
        let den = d.0 * e.1 - d.1 * e.0;
        if den.abs() < 1e-15 {
            continue;
        }
        let t = (p.0 * e.1 - p.1 * e.0) / den;
        let s = (p.0 * d.1 - p.1 * d.0) / den;
        if t > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&s) {
            best = best.min(t);
        }
    }
    (best * d.0, best * d.1)
}

fn angle_of(p: (f64, f64)) -> f64 {
    p.1.atan2(p.0).rem_euclid(TAU)
}

/// Ceiling with a single star-shaped recess centered on the room.
fn polygon_inset_ceiling(b: &mut MeshBuilder, spec: &RoomSpec, poly: &[(f64, f64)], depth: f64) {
    let (w, d, h) = (spec.width / 2.0, spec.depth / 2.0, spec.height);
    let rect = [(w, d), (-w, d), (-w, -d), (w, -d)];
    let mut angles: Vec<f64> = poly
        .iter()
        .chain(rect.iter())
        .map(|&p| angle_of(p))
        .collect();
    angles = sorted_breaks(angles);
    let n = angles.len();
    let at = |p: (f64, f64), z: f64| Vec3::new(p.0, p.1, z);
    let top = Vec3::new(0.0, 0.0, h + depth);
    for k in 0..n {
        let (a0, a1) = (angles[k], angles[(k + 1) % n]);
        let (o0, o1) = (polygon_at_angle(&rect, a0), polygon_at_angle(&rect, a1));
        let (i0, i1) = (polygon_at_angle(poly, a0), polygon_at_angle(poly, a1));
        b.quad([at(o0, h), at(o1, h), at(i1, h), at(i0, h)], -Vec3::z(), SurfaceLabel::Ceiling);
        b.triangle([top, at(i0, h + depth), at(i1, h + depth)], -Vec3::z(), SurfaceLabel::Ceiling);
        // Side wall faces the recess interior (left of a counter-clockwise edge).
        let e = (i1.0 - i0.0, i1.1 - i0.1);
        let facing = Vec3::new(-e.1, e.0, 0.0);
        b.quad(
            [at(i0, h), at(i1, h), at(i1, h + depth), at(i0, h + depth)],
            facing,
            SurfaceLabel::Ceiling,
        );
    }
}

fn coffered_ceiling(b: &mut MeshBuilder, spec: &RoomSpec) {
    let t = &CEILING_STYLES;
    let beam = spec.width.min(spec.depth) * t.coffer_beam;
    let n = t.coffer_cells;
    let (x0, y0) = (-spec.width / 2.0, -spec.depth / 2.0);
    let cell_x = (spec.width - beam * (n + 1) as f64) / n as f64;
    let cell_y = (spec.depth - beam * (n + 1) as f64) / n as f64;
    let panel = |i: usize, cell: f64, start: f64| {
        let a = start + beam * (i + 1) as f64 + cell * i as f64;
        (a, a + cell)
    };
    let xs_panels: Vec<(f64, f64)> = (0..n).map(|i| panel(i, cell_x, x0)).collect();
    let ys_panels: Vec<(f64, f64)> = (0..n).map(|i| panel(i, cell_y, y0)).collect();
    let mut xs = vec![x0, -x0];
    let mut ys = vec![y0, -y0];
    for &(a, c) in &xs_panels {
        xs.extend([a, c]);
    }
    for &(a, c) in &ys_panels {
        ys.extend([a, c]);
    }
    let xs = sorted_breaks(xs);
    let ys = sorted_breaks(ys);
    let h = spec.height;
    let hd = h + t.coffer_depth;
    let in_panel = |x: f64, y: f64| {
        xs_panels.iter().any(|&(a, c)| x > a && x < c) && ys_panels.iter().any(|&(a, c)| y > a && y < c)
    };
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let (xm, ym) = ((xs[i] + xs[i + 1]) / 2.0, (ys[j] + ys[j + 1]) / 2.0);
            let z = if in_panel(xm, ym) { hd } else { h };
            b.quad(
                [
                    Vec3::new(xs[i], ys[j], z),
                    Vec3::new(xs[i + 1], ys[j], z),
                    Vec3::new(xs[i + 1], ys[j + 1], z),
                    Vec3::new(xs[i], ys[j + 1], z),
                ],
                -Vec3::z(),
                SurfaceLabel::Ceiling,
            );
        }
    }
    for &(xa, xc) in &xs_panels {
        for &(ya, yc) in &ys_panels {
            let sides = [
                ([(xa, ya), (xc, ya)], Vec3::y()),
                ([(xa, yc), (xc, yc)], -Vec3::y()),
                ([(xa, ya), (xa, yc)], Vec3::x()),
                ([(xc, ya), (xc, yc)], -Vec3::x()),
            ];
            for ([p, q], facing) in sides {
                b.quad(
                    [
                        Vec3::new(p.0, p.1, h),
                        Vec3::new(q.0, q.1, h),
                        Vec3::new(q.0, q.1, hd),
                        Vec3::new(p.0, p.1, hd),
                    ],
                    facing,
                    SurfaceLabel::Ceiling,
                );
            }
        }
    }
}
