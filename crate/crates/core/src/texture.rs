//! Per-vertex color from front and back images.

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Color, TriMesh};
use crate::raster::RasterImage;
use crate::render::{cover, Camera, EMPTY};
use crate::volume::FrontProjection;

/// Convergence threshold of hole diffusion (max per-channel change).
pub const DIFFUSION_TOL: f32 = 1e-4;

/// Visibility of each vertex under an orthographic camera: its depth must be
/// within `2 * depth range / resolution` of the depth buffer at its pixel.
/// A vertex whose own pixel is uncovered (silhouette rounding) is compared
/// against the nearest surface among the 3x3 neighbourhood.
pub fn vertex_visibility(mesh: &TriMesh, camera: &Camera) -> Vec<bool> {
    let n = mesh.vertex_count();
    if mesh.is_empty() {
        return vec![false; n];
    }
    let cov = cover(mesh, camera);
    let (w, h) = (camera.width() as i64, camera.height() as i64);
    let screen: Vec<[f64; 3]> = mesh.vertices().iter().map(|p| camera.project(p)).collect();
    let (lo, hi) = screen
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s[2]), hi.max(s[2])));
    let eps = 2.0 * (hi - lo) / camera.width().max(camera.height()) as f64;
    screen
        .par_iter()
        .map(|s| {
            let (x, y) = (s[0].round() as i64, s[1].round() as i64);
            let at = |x: i64, y: i64| -> Option<f64> {
                if x < 0 || y < 0 || x >= w || y >= h {
                    return None;
                }
                let i = (y * w + x) as usize;
                (cov.face[i] != EMPTY).then_some(cov.depth[i])
            };
            let buffer = at(x, y).or_else(|| {
                (-1..=1)
                    .flat_map(|dy| (-1..=1).map(move |dx| (dx, dy)))
                    .filter_map(|(dx, dy)| at(x + dx, y + dy))
                    .reduce(f64::min)
            });
            buffer.is_some_and(|d| s[2] - d <= eps)
        })
        .collect()
}

/// Result of sampling the two views.
#[derive(Debug, Clone)]
pub struct Backprojection {
    /// Mesh with colors set; uncolored vertices carry black.
    pub mesh: TriMesh,
    pub colored: Vec<bool>,
    /// Vertices seen by neither camera, ascending.
    pub uncolored: Vec<usize>,
}

/// Samples `front` at each front-visible vertex's projection and `back`
/// (given in its own, mirrored, pixel frame) at each back-visible vertex.
/// Vertices seen by both blend by `max(0, n_z)` and `max(0, -n_z)`.
pub fn backproject_colors(
    mesh: &TriMesh,
    front: &RasterImage,
    back: &RasterImage,
    proj: &FrontProjection,
) -> Result<Backprojection> {
    proj.validate()?;
    for (name, img) in [("front", front), ("back", back)] {
        if img.dims() != (proj.width, proj.height) {
            return Err(Error::DimensionMismatch(format!(
                "{name} image {}x{} vs projection {}x{}",
                img.width(),
                img.height(),
                proj.width,
                proj.height
            )));
        }
    }
    let front_cam = Camera::front(*proj);
    let back_cam = Camera::back(*proj);
    let vf = vertex_visibility(mesh, &front_cam);
    let vb = vertex_visibility(mesh, &back_cam);
    let normals = mesh.vertex_normals();
    let sample = |img: &RasterImage, x: f64, y: f64| -> Color {
        let c = |k: usize| img.sample_bilinear(x, y, k.min(img.channels().min(3) - 1));
        if img.channels() < 3 {
            let g = c(0);
            [g, g, g]
        } else {
            [c(0), c(1), c(2)]
        }
    };
    let result: Vec<Option<Color>> = mesh
        .vertices()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let from_front = vf[i].then(|| {
                let s = front_cam.project(p);
                sample(front, s[0], s[1])
            });
            let from_back = vb[i].then(|| {
                let s = back_cam.project(p);
                sample(back, s[0], s[1])
            });
            match (from_front, from_back) {
                (Some(f), Some(b)) => {
                    let nz = normals[i].z;
                    let (mut wf, mut wb) = (nz.max(0.0), (-nz).max(0.0));
                    if wf + wb == 0.0 {
                        (wf, wb) = (0.5, 0.5);
                    }
                    let (wf, wb) = ((wf / (wf + wb)) as f32, (wb / (wf + wb)) as f32);
                    Some([0, 1, 2].map(|k| f[k] * wf + b[k] * wb))
                }
                (f, b) => f.or(b),
            }
        })
        .collect();
    let colored: Vec<bool> = result.iter().map(Option::is_some).collect();
    let uncolored = (0..mesh.vertex_count()).filter(|&i| !colored[i]).collect();
    let mut out = mesh.clone();
    out.set_colors(result.into_iter().map(|c| c.unwrap_or([0.0; 3])).collect())?;
    Ok(Backprojection {
        mesh: out,
        colored,
        uncolored,
    })
}

/// Fills uncolored vertices by inverse-edge-length weighted averaging over
/// mesh edges. Returns the colored mesh and the number of averaging sweeps.
pub fn diffuse_hole_colors(mesh: &TriMesh, colored: &[bool]) -> Result<(TriMesh, usize)> {
    let n = mesh.vertex_count();
    let colors = mesh
        .colors()
        .ok_or_else(|| Error::InvalidMesh("mesh has no colors to diffuse".into()))?;
    if colored.len() != n {
        return Err(Error::DimensionMismatch(format!("{} color flags for {n} vertices", colored.len())));
    }
    let (label, count) = mesh.components();
    let mut seeded = vec![false; count];
    for i in 0..n {
        seeded[label[i]] |= colored[i];
    }
    if let Some(i) = (0..n).find(|&i| !seeded[label[i]]) {
        return Err(Error::UncoloredComponent {
            component: label[i],
            vertex: i,
        });
    }
    let mut graph: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let v = mesh.vertices();
    for (a, b) in mesh.edges() {
        let w = 1.0 / (v[a] - v[b]).norm().max(1e-12);
        graph[a].push((b, w));
        graph[b].push((a, w));
    }
    let mut c = colors.to_vec();
    let sweeps = diffuse_on_graph(&graph, &mut c, colored, DIFFUSION_TOL, 10 * n.max(1))?;
    let mut out = mesh.clone();
    out.set_colors(c)?;
    Ok((out, sweeps))
}

/// Jacobi averaging on a weighted graph, seeded by a breadth-first pass so
/// every unknown starts from the mean of already reached neighbours. Known
/// entries never change. Fails if an unknown entry is unreachable from any
/// known one or the sweep cap is hit.
pub fn diffuse_on_graph(
    graph: &[Vec<(usize, f64)>],
    colors: &mut [Color],
    known: &[bool],
    tol: f32,
    max_sweeps: usize,
) -> Result<usize> {
    let n = graph.len();
    let mut reached = known.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| known[i]).collect();
    while let Some(i) = queue.pop_front() {
        for &(j, _) in &graph[i] {
            if reached[j] {
                continue;
            }
            let mut acc = [0.0f64; 3];
            let mut ws = 0.0;
            for &(k, w) in &graph[j] {
                if reached[k] {
                    for ch in 0..3 {
                        acc[ch] += w * colors[k][ch] as f64;
                    }
                    ws += w;
                }
            }
            colors[j] = acc.map(|a| (a / ws) as f32);
            reached[j] = true;
            queue.push_back(j);
        }
    }
    if let Some(i) = reached.iter().position(|r| !r) {
        return Err(Error::InvalidMesh(format!("vertex {i} cannot be reached from a colored vertex")));
    }
    let unknown: Vec<usize> = (0..n).filter(|&i| !known[i]).collect();
    for sweep in 1..=max_sweeps {
        let next: Vec<(usize, Color)> = unknown
            .par_iter()
            .map(|&i| {
                let mut acc = [0.0f64; 3];
                let mut ws = 0.0;
                for &(k, w) in &graph[i] {
                    for ch in 0..3 {
                        acc[ch] += w * colors[k][ch] as f64;
                    }
                    ws += w;
                }
                (i, acc.map(|a| (a / ws) as f32))
            })
            .collect();
        let mut change = 0.0f32;
        for (i, c) in next {
            for ch in 0..3 {
                change = change.max((c[ch] - colors[i][ch]).abs());
            }
            colors[i] = c;
        }
        if change <= tol {
            return Ok(sweep);
        }
    }
    Err(Error::Solver(format!("color diffusion did not converge in {max_sweeps} sweeps")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{cube, icosphere};
    use crate::mesh::Point;

    #[test]
    fn cube_faces_by_visibility() {
        let m = cube(0.5);
        let proj = FrontProjection::centered(64, 64, 1.0);
        let front = vertex_visibility(&m, &Camera::front(proj));
        let back = vertex_visibility(&m, &Camera::back(proj));
        for (i, v) in m.vertices().iter().enumerate() {
            assert_eq!(front[i], v.z > 0.0, "vertex {i}");
            assert_eq!(back[i], v.z < 0.0, "vertex {i}");
        }
    }

    #[test]
    fn occluded_vertex_is_hidden() {
        let v = vec![
            Point::new(-1.0, -1.0, 1.0),
            Point::new(1.0, -1.0, 1.0),
            Point::new(0.0, 1.0, 1.0),
            Point::new(-0.1, -0.1, 0.0),
            Point::new(0.1, -0.1, 0.0),
            Point::new(0.0, 0.1, 0.0),
        ];
        let m = TriMesh::new(v, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let vis = vertex_visibility(&m, &Camera::front(FrontProjection::centered(32, 32, 1.5)));
        assert_eq!(vis, vec![true, true, true, false, false, false]);
    }

    #[test]
    fn red_front_blue_back() {
        let m = cube(0.5);
        let proj = FrontProjection::centered(64, 64, 1.0);
        let red = RasterImage::from_fn(64, 64, 3, |_, _, c| (c == 0) as u8 as f32).unwrap();
        let blue = RasterImage::from_fn(64, 64, 3, |_, _, c| (c == 2) as u8 as f32).unwrap();
        let b = backproject_colors(&m, &red, &blue, &proj).unwrap();
        assert!(b.uncolored.is_empty());
        for (v, c) in m.vertices().iter().zip(b.mesh.colors().unwrap()) {
            let expect = if v.z > 0.0 { [1.0, 0.0, 0.0] } else { [0.0, 0.0, 1.0] };
            assert_eq!(*c, expect);
        }
        let small = RasterImage::filled(32, 32, 3, 0.0).unwrap();
        assert!(backproject_colors(&m, &small, &blue, &proj).is_err());
    }

    #[test]
    fn path_midpoint_converges_to_half() {
        let graph = vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0)]];
        let mut c = vec![[0.0; 3], [0.3; 3], [1.0; 3]];
        diffuse_on_graph(&graph, &mut c, &[true, false, true], DIFFUSION_TOL, 30).unwrap();
        assert!((c[1][0] - 0.5).abs() < 1e-3);
        assert_eq!(c[0], [0.0; 3]);
        assert_eq!(c[2], [1.0; 3]);
    }

    #[test]
    fn holes_fill_within_seed_hull() {
        let mut m = icosphere(1.0, 3);
        let n = m.vertex_count();
        let colored: Vec<bool> = m.vertices().iter().map(|v| v.z.abs() > 0.3).collect();
        let seeds: Vec<Color> = m
            .vertices()
            .iter()
            .map(|v| if v.z > 0.3 { [1.0, 0.2, 0.0] } else if v.z < -0.3 { [0.0, 0.4, 1.0] } else { [9.0; 3] })
            .collect();
        m.set_colors(seeds.clone()).unwrap();
        let (out, sweeps) = diffuse_hole_colors(&m, &colored).unwrap();
        assert!(sweeps <= 10 * n);
        for (i, c) in out.colors().unwrap().iter().enumerate() {
            if colored[i] {
                assert_eq!(*c, seeds[i]);
            }
            assert!((0.0..=1.0).contains(&c[0]) && (0.2..=0.4).contains(&c[1]) && (0.0..=1.0).contains(&c[2]));
        }
        let unseeded = vec![false; n];
        assert!(matches!(diffuse_hole_colors(&m, &unseeded), Err(Error::UncoloredComponent { .. })));
        let (same, _) = diffuse_hole_colors(&m, &vec![true; n]).unwrap();
        assert_eq!(same, m);
    }
}
