//! Indexed triangle mesh shared by every stage.
//!
//! The character faces `+z`; the front view is the orthographic projection
//! onto the xy-plane seen from `+z`.

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

pub type Point = Point3<f64>;
pub type Vec3 = Vector3<f64>;
/// Linear RGB in `[0, 1]`.
pub type Color = [f32; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in it {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    vertices: Vec<Point>,
    faces: Vec<[usize; 3]>,
    colors: Option<Vec<Color>>,
    rest_coords: Option<Vec<[f64; 2]>>,
}

impl TriMesh {
    /// Validates face indices and drops faces with repeated indices or zero
    /// area.
    pub fn new(vertices: Vec<Point>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= vertices.len())) {
            return Err(Error::InvalidMesh(format!(
                "face {f:?} indexes past {} vertices",
                vertices.len()
            )));
        }
        let faces = faces
            .into_iter()
            .filter(|&[a, b, c]| {
                a != b
                    && b != c
                    && a != c
                    && (vertices[b] - vertices[a])
                        .cross(&(vertices[c] - vertices[a]))
                        .norm_squared()
                        > 0.0
            })
            .collect();
        Ok(Self {
            vertices,
            faces,
            colors: None,
            rest_coords: None,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Moving vertices never invalidates indices; faces are not re-checked
    /// for degeneracy.
    pub fn vertices_mut(&mut self) -> &mut [Point] {
        &mut self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn colors(&self) -> Option<&[Color]> {
        self.colors.as_deref()
    }

    pub fn set_colors(&mut self, colors: Vec<Color>) -> Result<()> {
        if colors.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} colors for {} vertices",
                colors.len(),
                self.vertices.len()
            )));
        }
        self.colors = Some(colors);
        Ok(())
    }

    pub fn clear_colors(&mut self) {
        self.colors = None;
    }

    pub fn rest_coords(&self) -> Option<&[[f64; 2]]> {
        self.rest_coords.as_deref()
    }

    pub fn set_rest_coords(&mut self, coords: Vec<[f64; 2]>) -> Result<()> {
        if coords.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} rest coordinates for {} vertices",
                coords.len(),
                self.vertices.len()
            )));
        }
        self.rest_coords = Some(coords);
        Ok(())
    }

    /// Same connectivity and attributes, new positions.
    pub fn with_positions(&self, positions: Vec<Point>) -> Result<Self> {
        if positions.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} positions for {} vertices",
                positions.len(),
                self.vertices.len()
            )));
        }
        Ok(Self {
            vertices: positions,
            ..self.clone()
        })
    }

    pub fn aabb(&self) -> Option<Aabb> {
        Aabb::from_points(&self.vertices)
    }

    /// Drops vertices referenced by no face (attributes follow). Returns the
    /// new mesh and, per old vertex, its new index.
    pub fn compact(&self) -> (Self, Vec<Option<usize>>) {
        let mut map = vec![None; self.vertices.len()];
        let mut keep = Vec::new();
        for f in &self.faces {
            for &i in f {
                if map[i].is_none() {
                    map[i] = Some(usize::MAX);
                }
            }
        }
        for (i, m) in map.iter_mut().enumerate() {
            if m.is_some() {
                *m = Some(keep.len());
                keep.push(i);
            }
        }
        let faces = self
            .faces
            .iter()
            .map(|f| f.map(|i| map[i].expect("referenced")))
            .collect();
        let out = Self {
            vertices: keep.iter().map(|&i| self.vertices[i]).collect(),
            faces,
            colors: self.colors.as_ref().map(|c| keep.iter().map(|&i| c[i]).collect()),
            rest_coords: self.rest_coords.as_ref().map(|c| keep.iter().map(|&i| c[i]).collect()),
        };
        (out, map)
    }

    pub fn triangle(&self, f: usize) -> [Point; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Sorted, de-duplicated one-ring of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut ring = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c), (c, a)] {
                ring[u].push(v);
                ring[v].push(u);
            }
        }
        for r in &mut ring {
            r.sort_unstable();
            r.dedup();
        }
        ring
    }

    /// Unique undirected edges `(lo, hi)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Vertices on an edge used by exactly one face.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut e: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(u, v)| (u.min(v), u.max(v)))
            .collect();
        e.sort_unstable();
        let mut on_boundary = vec![false; self.vertices.len()];
        let mut i = 0;
        while i < e.len() {
            let mut j = i;
            while j < e.len() && e[j] == e[i] {
                j += 1;
            }
            if j - i == 1 {
                on_boundary[e[i].0] = true;
                on_boundary[e[i].1] = true;
            }
            i = j;
        }
        on_boundary
    }

    /// Connected-component label per vertex (via shared faces; isolated
    /// vertices are their own component) and the component count. Labels are
    /// assigned in order of each component's smallest vertex index.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let n = self.vertices.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut i: usize) -> usize {
            while p[i] != i {
                p[i] = p[p[i]];
                i = p[i];
            }
            i
        }
        for &[a, b, c] in &self.faces {
            for (u, v) in [(a, b), (b, c)] {
                let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
                if ru != rv {
                    parent[ru.max(rv)] = ru.min(rv);
                }
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        for i in 0..n {
            let r = find(&mut parent, i);
            if label[r] == usize::MAX {
                label[r] = count;
                count += 1;
            }
            label[i] = label[r];
        }
        (label, count)
    }

    /// Area-weighted vertex normals (unit length; zero for unreferenced
    /// vertices).
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        let mut n = vec![Vec3::zeros(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            let fn_ = (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
            n[a] += fn_;
            n[b] += fn_;
            n[c] += fn_;
        }
        for v in &mut n {
            let len = v.norm();
            if len > 0.0 {
                *v /= len;
            }
        }
        n
    }

    /// Signed volume via the divergence theorem; positive for outward
    /// orientation.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a]
                    .coords
                    .dot(&self.vertices[b].coords.cross(&self.vertices[c].coords))
            })
            .sum::<f64>()
            / 6.0
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        let used = {
            let mut u = vec![false; self.vertices.len()];
            for f in &self.faces {
                for &i in f {
                    u[i] = true;
                }
            }
            u.iter().filter(|b| **b).count()
        };
        used as i64 - self.edges().len() as i64 + self.faces.len() as i64
    }
}

pub mod shapes {
    //! Small closed meshes for tests and benchmarks.
    use super::*;

    pub fn cube(half: f64) -> TriMesh {
        let v: Vec<Point> = (0..8)
            .map(|i| {
                Point::new(
                    if i & 1 == 0 { -half } else { half },
                    if i & 2 == 0 { -half } else { half },
                    if i & 4 == 0 { -half } else { half },
                )
            })
            .collect();
        let quads = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let faces = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriMesh::new(v, faces).unwrap()
    }

    /// Subdivided icosahedron projected to a sphere.
    pub fn icosphere(radius: f64, subdivisions: usize) -> TriMesh {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<Vec3> = [
            (-1.0, t, 0.0),
            (1.0, t, 0.0),
            (-1.0, -t, 0.0),
            (1.0, -t, 0.0),
            (0.0, -1.0, t),
            (0.0, 1.0, t),
            (0.0, -1.0, -t),
            (0.0, 1.0, -t),
            (t, 0.0, -1.0),
            (t, 0.0, 1.0),
            (-t, 0.0, -1.0),
            (-t, 0.0, 1.0),
        ]
        .iter()
        .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
        .collect();
        let mut f: Vec<[usize; 3]> = vec![
            [0, 11, 5],
            [0, 5, 1],
            [0, 1, 7],
            [0, 7, 10],
            [0, 10, 11],
            [1, 5, 9],
            [5, 11, 4],
            [11, 10, 2],
            [10, 7, 6],
            [7, 1, 8],
            [3, 9, 4],
            [3, 4, 2],
            [3, 2, 6],
            [3, 6, 8],
            [3, 8, 9],
            [4, 9, 5],
            [2, 4, 11],
            [6, 2, 10],
            [8, 6, 7],
            [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid = std::collections::HashMap::new();
            let mut next = Vec::with_capacity(f.len() * 4);
            let mut midpoint = |a: usize, b: usize, v: &mut Vec<Vec3>| -> usize {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    v.push(((v[a] + v[b]) / 2.0).normalize());
                    v.len() - 1
                })
            };
            for &[a, b, c] in &f {
                let ab = midpoint(a, b, &mut v);
                let bc = midpoint(b, c, &mut v);
                let ca = midpoint(c, a, &mut v);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            f = next;
        }
        TriMesh::new(v.into_iter().map(|p| Point::from(p * radius)).collect(), f).unwrap()
    }

    /// `n x n` vertex grid in the xy-plane, spacing 1, consistent diagonals.
    pub fn grid(n: usize) -> TriMesh {
        let v = (0..n * n)
            .map(|i| Point::new((i % n) as f64, (i / n) as f64, 0.0))
            .collect();
        let mut f = Vec::new();
        for y in 0..n - 1 {
            for x in 0..n - 1 {
                let a = y * n + x;
                f.push([a, a + 1, a + n + 1]);
                f.push([a, a + n + 1, a + n]);
            }
        }
        TriMesh::new(v, f).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::shapes::*;
    use super::*;

    #[test]
    fn rejects_bad_indices_and_drops_degenerate() {
        let v = vec![Point::origin(), Point::new(1.0, 0.0, 0.0), Point::new(2.0, 0.0, 0.0)];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        let m = TriMesh::new(v, vec![[0, 1, 2], [0, 0, 1]]).unwrap();
        assert_eq!(m.face_count(), 0);
    }

    #[test]
    fn closed_shapes_have_sphere_topology() {
        for m in [cube(0.5), icosphere(1.0, 2)] {
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.signed_volume() > 0.0);
            assert!(m.boundary_vertices().iter().all(|b| !b));
            assert_eq!(m.components().1, 1);
        }
        assert_eq!(icosphere(1.0, 4).vertex_count(), 2562);
    }

    #[test]
    fn grid_boundary() {
        let g = grid(4);
        let b = g.boundary_vertices();
        assert_eq!(b.iter().filter(|x| **x).count(), 12);
        assert!(!b[5]);
    }
}
