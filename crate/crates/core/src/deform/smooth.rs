use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh, Vec3};

/// Weight of the original positions in the HC correction.
const HC_ALPHA: f64 = 0.0;
/// Weight of a vertex's own correction against its neighbours' average.
const HC_BETA: f64 = 0.2;
/// Neighbour-averaging passes applied to the correction field; keeps the
/// push-back from re-injecting high-frequency noise.
const CORRECTION_PASSES: usize = 2;

/// Umbrella smoothing with an HC ("Humphrey's classes") style correction
/// that pushes vertices back toward their pre-step positions to counter
/// shrinkage. The correction is low-pass filtered over the one-ring before
/// it is applied. `strength` scales each umbrella step. Only vertices in
/// `region` (default: all) move; open-boundary vertices never move.
pub fn laplacian_smooth(
    mesh: &TriMesh,
    iterations: usize,
    strength: f64,
    region: Option<&[bool]>,
) -> Result<TriMesh> {
    hc_smooth(mesh, iterations, strength, region, HC_ALPHA, HC_BETA, CORRECTION_PASSES)
}

fn hc_smooth(
    mesh: &TriMesh,
    iterations: usize,
    strength: f64,
    region: Option<&[bool]>,
    alpha: f64,
    beta: f64,
    passes: usize,
) -> Result<TriMesh> {
    if !(strength > 0.0 && strength <= 1.0) {
        return Err(Error::InvalidParameter(format!("smoothing strength {strength} not in (0, 1]")));
    }
    let n = mesh.vertex_count();
    if let Some(r) = region {
        if r.len() != n {
            return Err(Error::DimensionMismatch(format!("region of {} for {n} vertices", r.len())));
        }
    }
    if iterations == 0 {
        return Ok(mesh.clone());
    }
    let ring = mesh.vertex_neighbors();
    let boundary = mesh.boundary_vertices();
    let movable: Vec<bool> = (0..n)
        .map(|i| !ring[i].is_empty() && !boundary[i] && region.is_none_or(|r| r[i]))
        .collect();
    let original: Vec<Point> = mesh.vertices().to_vec();
    let mut p = original.clone();
    let mut b = vec![Vec3::zeros(); n];
    for _ in 0..iterations {
        let q = p.clone();
        for i in 0..n {
            if !movable[i] {
                b[i] = Vec3::zeros();
                continue;
            }
            let centroid = ring[i].iter().map(|&j| q[j].coords).sum::<Vec3>() / ring[i].len() as f64;
            p[i] = q[i] + (centroid - q[i].coords) * strength;
            b[i] = p[i].coords - (original[i].coords * alpha + q[i].coords * (1.0 - alpha));
        }
        // low-pass the correction so only smooth (shrinkage) components
        // are pushed back
        let mut low = b.clone();
        for _ in 0..passes {
            let prev = low.clone();
            for i in 0..n {
                if !ring[i].is_empty() {
                    low[i] = ring[i].iter().map(|&j| prev[j]).sum::<Vec3>() / ring[i].len() as f64;
                }
            }
        }
        for i in 0..n {
            if movable[i] {
                p[i] -= b[i] * beta + low[i] * (1.0 - beta);
            }
        }
    }
    mesh.with_positions(p)
}
