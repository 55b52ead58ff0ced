use rayon::prelude::*;

use super::tables::{CORNER_OFFSETS, EDGE_CORNERS, TRI_TABLE};
use super::SdfGrid;
use crate::mesh::{Point, TriMesh};

#[derive(Debug, Clone)]
pub struct IsoSurface {
    pub mesh: TriMesh,
    /// False when no grid edge crosses the iso level.
    pub has_surface: bool,
}

/// Extracts the `iso` level set with linear interpolation along grid edges.
/// Values below `iso` are inside; triangles face toward larger values. One
/// vertex is created per crossed grid edge, numbered in grid order, so the
/// output does not depend on the thread count.
pub fn marching_cubes(grid: &SdfGrid, iso: f32) -> IsoSurface {
    let [nx, ny, nz] = grid.dims();
    let values = grid.values();
    let inside = |i: usize| values[i] < iso;
    let strides = [1, nx, nx * ny];
    let limits = [nx, ny, nz];

    // Crossed grid edges: id = 3 * point + axis.
    let per_slice: Vec<Vec<(usize, Point)>> = (0..nz)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..ny {
                for i in 0..nx {
                    let p = grid.index(i, j, k);
                    let coord = [i, j, k];
                    for axis in 0..3 {
                        if coord[axis] + 1 >= limits[axis] {
                            continue;
                        }
                        let q = p + strides[axis];
                        if inside(p) == inside(q) {
                            continue;
                        }
                        let (a, b) = (values[p] as f64, values[q] as f64);
                        let t = ((iso as f64 - a) / (b - a)).clamp(0.0, 1.0);
                        let mut pos = grid.position(i, j, k);
                        pos[axis] += t * grid.spacing();
                        out.push((3 * p + axis, pos));
                    }
                }
            }
            out
        })
        .collect();

    let total: usize = per_slice.iter().map(Vec::len).sum();
    if total == 0 {
        return IsoSurface {
            mesh: TriMesh::empty(),
            has_surface: false,
        };
    }
    let mut edge_vertex = vec![u32::MAX; 3 * values.len()];
    let mut vertices = Vec::with_capacity(total);
    for slice in per_slice {
        for (e, p) in slice {
            edge_vertex[e] = vertices.len() as u32;
            vertices.push(p);
        }
    }

    // Grid edge id for each of the 12 cube edges, relative to the cell's
    // base point.
    let cube_edges: Vec<usize> = EDGE_CORNERS
        .iter()
        .map(|&[a, b]| {
            let (ca, cb) = (CORNER_OFFSETS[a], CORNER_OFFSETS[b]);
            let axis = (0..3).find(|&d| ca[d] != cb[d]).expect("edge spans one axis");
            let lo = if ca[axis] < cb[axis] { ca } else { cb };
            3 * (lo[0] * strides[0] + lo[1] * strides[1] + lo[2] * strides[2]) + axis
        })
        .collect();
    let corner_offsets: Vec<usize> = CORNER_OFFSETS
        .iter()
        .map(|c| c[0] * strides[0] + c[1] * strides[1] + c[2] * strides[2])
        .collect();

    let faces: Vec<[usize; 3]> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let base = grid.index(i, j, k);
                    let mut case = 0usize;
                    for (c, off) in corner_offsets.iter().enumerate() {
                        if inside(base + off) {
                            case |= 1 << c;
                        }
                    }
                    let row = &TRI_TABLE[case];
                    for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                        let v = |e: i8| edge_vertex[3 * base + cube_edges[e as usize]] as usize;
                        // table winding faces the inside; reverse it
                        out.push([v(tri[0]), v(tri[2]), v(tri[1])]);
                    }
                }
            }
            out
        })
        .flatten_iter()
        .collect();

    let mesh = TriMesh::new(vertices, faces).expect("edge vertices are in range");
    IsoSurface {
        mesh,
        has_surface: true,
    }
}
