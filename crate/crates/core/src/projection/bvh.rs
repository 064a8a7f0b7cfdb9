//! Ray casting against triangle soups through a bounding volume hierarchy.

use crate::geometry::{Aabb, Vec3};
use crate::scene::{SurfaceLabel, TriMesh};

/// Hits closer than this are ignored (self-intersection guard).
pub const RAY_EPSILON: f64 = 1e-9;

/// Precomputed triangle for Möller–Trumbore.
#[derive(Debug, Clone, Copy)]
pub struct RayTriangle {
    pub v0: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
}

impl RayTriangle {
    pub fn new(p: [Vec3; 3]) -> Self {
        Self {
            v0: p[0],
            e1: p[1] - p[0],
            e2: p[2] - p[0],
        }
    }
}

/// Ray parameter of the hit, two-sided. This is the single intersection
/// routine used by both the BVH and brute-force casting, so the two agree
/// bit for bit.
#[inline]
pub fn intersect_triangle(origin: &Vec3, dir: &Vec3, tri: &RayTriangle) -> Option<f64> {
    let p = dir.cross(&tri.e2);
    let det = tri.e1.dot(&p);
    if det.abs() < 1e-15 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri.v0;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&tri.e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = tri.e2.dot(&q) * inv;
    (t > RAY_EPSILON).then_some(t)
}

/// Identifies the triangle a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct HitId {
    pub mesh: u32,
    pub tri: u32,
}

impl HitId {
    pub const NONE: HitId = HitId {
        mesh: u32::MAX,
        tri: u32::MAX,
    };

    pub fn is_hit(&self) -> bool {
        self.mesh != u32::MAX
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub id: HitId,
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: u32, count: u32 },
    Inner { bounds: Aabb, left: u32, right: u32 },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;
const BOUNDS_PAD: f64 = 1e-7;

/// Ray caster over a list of meshes. Mesh index is the owner slot used in hit maps.
#[derive(Debug, Clone)]
pub struct Tracer {
    tris: Vec<RayTriangle>,
    ids: Vec<HitId>,
    labels: Vec<Vec<Option<SurfaceLabel>>>,
    order: Vec<u32>,
    nodes: Vec<Node>,
}

impl Tracer {
    pub fn new(meshes: &[TriMesh]) -> Self {
        let mut tris = Vec::new();
        let mut ids = Vec::new();
        let mut labels = Vec::with_capacity(meshes.len());
        for (m, mesh) in meshes.iter().enumerate() {
            for t in 0..mesh.triangles().len() {
                tris.push(RayTriangle::new(mesh.triangle(t)));
                ids.push(HitId {
                    mesh: m as u32,
                    tri: t as u32,
                });
            }
            labels.push((0..mesh.triangles().len()).map(|t| mesh.label(t)).collect());
        }
        let mut tracer = Self {
            order: (0..tris.len() as u32).collect(),
            tris,
            ids,
            labels,
            nodes: Vec::new(),
        };
        if !tracer.tris.is_empty() {
            let centroids: Vec<Vec3> = tracer
                .tris
                .iter()
                .map(|t| t.v0 + (t.e1 + t.e2) / 3.0)
                .collect();
            let n = tracer.order.len();
            tracer.build(&centroids, 0, n);
        }
        tracer
    }

    fn tri_bounds(&self, i: u32) -> Aabb {
        let t = &self.tris[i as usize];
        Aabb::from_points(&[t.v0, t.v0 + t.e1, t.v0 + t.e2])
    }

    fn build(&mut self, centroids: &[Vec3], start: usize, end: usize) -> u32 {
        let mut bounds = self.order[start..end]
            .iter()
            .fold(Aabb::empty(), |b, &i| b.union(&self.tri_bounds(i)));
        // Padding keeps slab round-off from culling hits on box faces.
        let pad = Vec3::repeat(BOUNDS_PAD * (1.0 + bounds.extent().amax()));
        bounds.min -= pad;
        bounds.max += pad;
        let idx = self.nodes.len() as u32;
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf {
                bounds,
                start: start as u32,
                count: (end - start) as u32,
            });
            return idx;
        }
        let cb = Aabb::from_points(self.order[start..end].iter().map(|&i| &centroids[i as usize]));
        let ext = cb.extent();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        // Median split on the longest centroid axis; stable order keeps builds deterministic.
        self.order[start..end].sort_by(|&a, &b| {
            centroids[a as usize][axis]
                .partial_cmp(&centroids[b as usize][axis])
                .unwrap()
                .then(a.cmp(&b))
        });
        let mid = (start + end) / 2;
        self.nodes.push(Node::Leaf {
            bounds,
            start: 0,
            count: 0,
        });
        let left = self.build(centroids, start, mid);
        let right = self.build(centroids, mid, end);
        self.nodes[idx as usize] = Node::Inner {
            bounds,
            left,
            right,
        };
        idx
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn triangle(&self, global: usize) -> (&RayTriangle, HitId) {
        (&self.tris[global], self.ids[global])
    }

    pub fn label(&self, id: HitId) -> Option<SurfaceLabel> {
        if !id.is_hit() {
            return None;
        }
        self.labels[id.mesh as usize][id.tri as usize]
    }

    /// Nearest hit; ties in `t` resolve to the lowest (mesh, triangle) id.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Option<Hit> {
        let mut best: Option<(f64, u32)> = None;
        if self.nodes.is_empty() {
            return None;
        }
        let mut stack = Vec::with_capacity(64);
        stack.push(0u32);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n as usize];
            match node.bounds().ray_hit(origin, dir) {
                Some(t0) if best.is_none_or(|(bt, _)| t0 <= bt) => {}
                _ => continue,
            }
            match *node {
                Node::Leaf { start, count, .. } => {
                    for &i in &self.order[start as usize..(start + count) as usize] {
                        if let Some(t) = intersect_triangle(origin, dir, &self.tris[i as usize]) {
                            let better = match best {
                                None => true,
                                Some((bt, bi)) => t < bt || (t == bt && i < bi),
                            };
                            if better {
                                best = Some((t, i));
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.map(|(t, i)| Hit {
            t,
            id: self.ids[i as usize],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn brute(tracer: &Tracer, o: &Vec3, d: &Vec3) -> Option<(f64, HitId)> {
        let mut best: Option<(f64, HitId)> = None;
        for g in 0..tracer.triangle_count() {
            let (tri, id) = tracer.triangle(g);
            if let Some(t) = intersect_triangle(o, d, tri) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, id));
                }
            }
        }
        best
    }

    #[test]
    fn bvh_matches_brute_force_on_random_soup() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut meshes = Vec::new();
        for _ in 0..5 {
            let c = Vec3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.0..2.0));
            meshes.push(TriMesh::cuboid(Vec3::new(
                rng.random_range(0.1..1.0),
                rng.random_range(0.1..1.0),
                rng.random_range(0.1..1.0),
            )).transformed(&crate::geometry::Similarity::from_translation(c)));
        }
        let tracer = Tracer::new(&meshes);
        for _ in 0..2000 {
            let o = Vec3::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), rng.random_range(-1.0..3.0));
            let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize();
            let fast = tracer.cast(&o, &d).map(|h| (h.t, h.id));
            assert_eq!(fast, brute(&tracer, &o, &d));
        }
    }

    #[test]
    fn empty_tracer_misses() {
        assert!(Tracer::new(&[]).cast(&Vec3::zeros(), &Vec3::x()).is_none());
    }
}
