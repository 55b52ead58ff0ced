//! Bounding-volume hierarchy over mesh triangles: nearest-triangle queries,
//! hierarchical winding numbers and vertical (view-axis) ray casts.

use std::f64::consts::PI;

use super::sdf::closest_point_on_triangle;
use crate::mesh::{Aabb, Point, TriMesh, Vec3};

const LEAF_SIZE: usize = 4;
/// Far-field acceptance ratio for the dipole approximation of the winding
/// number.
const FAR_RATIO: f64 = 2.0;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: `[start, end)` into `tris`. Inner: children indices.
    a: usize,
    b: usize,
    leaf: bool,
    /// Area-weighted centroid.
    center: Point,
    /// Sum of triangle vector areas.
    area_normal: Vec3,
    /// Largest distance from `center` to a vertex below this node.
    radius: f64,
}

#[derive(Debug, Clone)]
pub struct TriangleTree {
    nodes: Vec<Node>,
    tris: Vec<[Point; 3]>,
    ids: Vec<usize>,
}

/// One intersection of a vertical ray with the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub z: f64,
    pub face: usize,
}

impl TriangleTree {
    /// Returns `None` for a mesh without faces.
    pub fn new(mesh: &TriMesh) -> Option<Self> {
        if mesh.is_empty() {
            return None;
        }
        let tris: Vec<[Point; 3]> = (0..mesh.face_count()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Point> = tris
            .iter()
            .map(|t| Point::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        build(&tris, &centroids, &mut order, 0, &mut nodes);
        let tris_sorted = order.iter().map(|&i| tris[i]).collect();
        Some(Self {
            nodes,
            tris: tris_sorted,
            ids: order,
        })
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Closest surface point within `bound` of `q`: `(distance, face, point)`.
    pub fn nearest(&self, q: &Point, bound: f64) -> Option<(f64, usize, Point)> {
        let mut best_d2 = bound * bound;
        let mut best: Option<(usize, Point)> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if box_dist2(&node.bounds, q) > best_d2 {
                continue;
            }
            if node.leaf {
                for t in node.a..node.b {
                    let c = closest_point_on_triangle(q, &self.tris[t]);
                    let d2 = (c - q).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && best.is_some_and(|(f, _)| self.ids[t] < f)) {
                        best_d2 = d2;
                        best = Some((self.ids[t], c));
                    }
                }
            } else {
                let (l, r) = (node.a, node.b);
                let (dl, dr) = (box_dist2(&self.nodes[l].bounds, q), box_dist2(&self.nodes[r].bounds, q));
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best.map(|(f, c)| (best_d2.sqrt(), f, c))
    }

    /// Generalized winding number of the surface around `q`: about 1 inside
    /// a closed outward-oriented surface, 0 outside.
    pub fn winding_number(&self, q: &Point) -> f64 {
        let mut total = 0.0;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let r = node.center - q;
            let d = r.norm();
            if d > FAR_RATIO * node.radius {
                total += r.dot(&node.area_normal) / (d * d * d);
                continue;
            }
            if node.leaf {
                for t in &self.tris[node.a..node.b] {
                    total += solid_angle(q, t);
                }
            } else {
                stack.push(node.a);
                stack.push(node.b);
            }
        }
        total / (4.0 * PI)
    }

    /// Exact winding number, summed over every triangle.
    pub fn winding_number_exact(&self, q: &Point) -> f64 {
        self.tris.iter().map(|t| solid_angle(q, t)).sum::<f64>() / (4.0 * PI)
    }

    /// Intersections of the line `{(x, y, z) : z ∈ R}` with the mesh, sorted
    /// by `z`. Edges shared by two triangles seen from the same side count
    /// once (half-open edge rule).
    pub fn vertical_hits(&self, x: f64, y: f64) -> Vec<RayHit> {
        let mut hits = Vec::new();
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let b = &node.bounds;
            if x < b.min.x || x > b.max.x || y < b.min.y || y > b.max.y {
                continue;
            }
            if node.leaf {
                for t in node.a..node.b {
                    if let Some(z) = vertical_intersection(&self.tris[t], x, y) {
                        hits.push(RayHit { z, face: self.ids[t] });
                    }
                }
            } else {
                stack.push(node.a);
                stack.push(node.b);
            }
        }
        hits.sort_by(|a, b| a.z.total_cmp(&b.z).then(a.face.cmp(&b.face)));
        hits
    }
}

fn build(tris: &[[Point; 3]], centroids: &[Point], order: &mut [usize], start: usize, nodes: &mut Vec<Node>) -> usize {
    let bounds = Aabb::from_points(order.iter().flat_map(|&i| tris[i].iter())).expect("non-empty");
    let mut area_normal = Vec3::zeros();
    let mut weighted = Vec3::zeros();
    let mut area_sum = 0.0;
    for &i in order.iter() {
        let t = &tris[i];
        let an = (t[1] - t[0]).cross(&(t[2] - t[0])) * 0.5;
        let a = an.norm();
        area_normal += an;
        weighted += centroids[i].coords * a;
        area_sum += a;
    }
    let center = if area_sum > 0.0 {
        Point::from(weighted / area_sum)
    } else {
        bounds.center()
    };
    let radius = order
        .iter()
        .flat_map(|&i| tris[i].iter())
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max);
    let id = nodes.len();
    nodes.push(Node {
        bounds,
        a: start,
        b: start + order.len(),
        leaf: true,
        center,
        area_normal,
        radius,
    });
    if order.len() <= LEAF_SIZE {
        return id;
    }
    let ext = bounds.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let (lo, hi) = order.split_at_mut(mid);
    let l = build(tris, centroids, lo, start, nodes);
    let r = build(tris, centroids, hi, start + mid, nodes);
    let node = &mut nodes[id];
    node.leaf = false;
    node.a = l;
    node.b = r;
    id
}

fn box_dist2(b: &Aabb, q: &Point) -> f64 {
    let mut d2 = 0.0;
    for a in 0..3 {
        let v = if q[a] < b.min[a] {
            b.min[a] - q[a]
        } else if q[a] > b.max[a] {
            q[a] - b.max[a]
        } else {
            0.0
        };
        d2 += v * v;
    }
    d2
}

/// Signed solid angle subtended by triangle `t` at `q` (Van Oosterom and
/// Strackee); positive when the triangle's normal points away from `q`.
pub(crate) fn solid_angle(q: &Point, t: &[Point; 3]) -> f64 {
    let (a, b, c) = (t[0] - q, t[1] - q, t[2] - q);
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let det = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * det.atan2(den)
}

/// `z` where the vertical line through `(x, y)` meets triangle `t`, using a
/// top-left style rule so a point on a shared edge belongs to exactly one of
/// two triangles with the same facing.
pub(crate) fn vertical_intersection(t: &[Point; 3], x: f64, y: f64) -> Option<f64> {
    let (mut p0, mut p1, p2) = (t[0], t[1], t[2]);
    let orient = (p1.x - p0.x) * (p2.y - p0.y) - (p1.y - p0.y) * (p2.x - p0.x);
    if orient == 0.0 {
        return None;
    }
    if orient < 0.0 {
        std::mem::swap(&mut p0, &mut p1);
    }
    let edge = |a: &Point, b: &Point| (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
    let owns = |a: &Point, b: &Point| (b.y < a.y) || (b.y == a.y && b.x > a.x);
    let w0 = edge(&p1, &p2);
    let w1 = edge(&p2, &p0);
    let w2 = edge(&p0, &p1);
    let inside = |w: f64, a: &Point, b: &Point| w > 0.0 || (w == 0.0 && owns(a, b));
    if !(inside(w0, &p1, &p2) && inside(w1, &p2, &p0) && inside(w2, &p0, &p1)) {
        return None;
    }
    let sum = w0 + w1 + w2;
    Some((w0 * p0.z + w1 * p1.z + w2 * p2.z) / sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{cube, icosphere};

    #[test]
    fn winding_inside_and_outside() {
        let m = icosphere(1.0, 3);
        let t = TriangleTree::new(&m).unwrap();
        for (q, expect) in [
            (Point::origin(), 1.0),
            (Point::new(0.5, 0.3, -0.2), 1.0),
            (Point::new(2.0, 0.0, 0.0), 0.0),
            (Point::new(0.0, -1.2, 0.3), 0.0),
        ] {
            assert!((t.winding_number(&q) - expect).abs() < 0.05, "{q:?}");
            assert!((t.winding_number_exact(&q) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn nearest_on_cube() {
        let m = cube(0.5);
        let t = TriangleTree::new(&m).unwrap();
        let (d, _, c) = t.nearest(&Point::new(2.0, 0.1, 0.2), f64::INFINITY).unwrap();
        assert!((d - 1.5).abs() < 1e-12);
        assert!((c - Point::new(0.5, 0.1, 0.2)).norm() < 1e-12);
        assert!(t.nearest(&Point::new(2.0, 0.0, 0.0), 1.0).is_none());
    }

    #[test]
    fn vertical_ray_through_shared_edges_hits_twice() {
        let m = cube(0.5);
        let t = TriangleTree::new(&m).unwrap();
        // through the diagonal of the +z / -z faces and through a vertex
        for (x, y) in [(0.1, 0.1), (0.0, 0.0), (-0.5 + 1e-9, 0.2), (0.25, -0.25)] {
            let hits = t.vertical_hits(x, y);
            assert_eq!(hits.len(), 2, "{x} {y}: {hits:?}");
            assert!((hits[0].z + 0.5).abs() < 1e-12 && (hits[1].z - 0.5).abs() < 1e-12);
        }
        assert!(t.vertical_hits(0.7, 0.0).is_empty());
        let s = TriangleTree::new(&icosphere(1.0, 3)).unwrap();
        for k in 0..200 {
            let x = -0.99 + 0.0099 * k as f64;
            assert_eq!(s.vertical_hits(x, 0.013).len() % 2, 0);
        }
    }
}
