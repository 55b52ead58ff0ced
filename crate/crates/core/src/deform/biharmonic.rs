use rayon::prelude::*;

use super::sparse::{nested_dissection, pcg, uniform_laplacian, CsrMatrix, SparseCholesky};
use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

/// Prescribed displacements. Every index may appear at most once across
/// both lists.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HandleSet {
    pub fixed: Vec<usize>,
    pub moving: Vec<(usize, Vec3)>,
}

impl HandleSet {
    pub fn len(&self) -> usize {
        self.fixed.len() + self.moving.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-vertex prescribed displacement (`None` for free vertices).
    fn constraints(&self, n: usize) -> Result<Vec<Option<Vec3>>> {
        let mut c = vec![None; n];
        let all = self
            .fixed
            .iter()
            .map(|&i| (i, Vec3::zeros()))
            .chain(self.moving.iter().copied());
        for (i, d) in all {
            if i >= n {
                return Err(Error::InvalidParameter(format!("handle index {i} out of range")));
            }
            if c[i].is_some() {
                return Err(Error::InvalidParameter(format!("vertex {i} is constrained twice")));
            }
            if !(d.x.is_finite() && d.y.is_finite() && d.z.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite displacement at {i}")));
            }
            c[i] = Some(d);
        }
        Ok(c)
    }
}

#[derive(Debug, Clone)]
pub struct BiharmonicSolution {
    /// Displacement of every vertex.
    pub displacements: Vec<Vec3>,
    /// `max_i |(K² d)_i|` over free vertices.
    pub residual: f64,
    /// Largest prescribed displacement component.
    pub max_handle: f64,
}

/// Solves `K² d = 0` at free vertices with `d` prescribed at handles, where
/// `K` is the uniform graph Laplacian; each coordinate independently.
/// Coordinates whose prescribed values are all zero yield exactly zero.
/// Vertices used by no face are left in place.
pub fn biharmonic_displacements(mesh: &TriMesh, handles: &HandleSet) -> Result<BiharmonicSolution> {
    if handles.is_empty() {
        return Err(Error::InvalidParameter("empty handle set".into()));
    }
    let n = mesh.vertex_count();
    let prescribed = handles.constraints(n)?;
    let k = uniform_laplacian(mesh);
    let q = k.mul(&k);

    let (label, count) = mesh.components();
    let mut constrained = vec![false; count];
    let mut isolated = vec![true; n];
    for f in mesh.faces() {
        for &i in f {
            isolated[i] = false;
        }
    }
    for i in 0..n {
        if prescribed[i].is_some() {
            constrained[label[i]] = true;
        }
    }
    if let Some(i) = (0..n).find(|&i| !isolated[i] && !constrained[label[i]]) {
        return Err(Error::UnconstrainedComponent {
            component: label[i],
            vertex: i,
        });
    }

    let free: Vec<usize> = (0..n).filter(|&i| prescribed[i].is_none() && !isolated[i]).collect();
    let mut disp: Vec<Vec3> = prescribed.iter().map(|p| p.unwrap_or_else(Vec3::zeros)).collect();
    let max_handle = prescribed
        .iter()
        .flatten()
        .map(|d| d.amax())
        .fold(0.0, f64::max);

    let active: Vec<usize> = (0..3)
        .filter(|&c| prescribed.iter().flatten().any(|d| d[c] != 0.0))
        .collect();
    if !free.is_empty() && !active.is_empty() {
        let qff = q.submatrix(&free);
        let positions: Vec<_> = free.iter().map(|&i| mesh.vertices()[i]).collect();
        let solver = SparseCholesky::factor(&qff, nested_dissection(&qff, &positions)).ok();
        let solutions: Vec<Result<Vec<f64>>> = active
            .par_iter()
            .map(|&c| {
                let rhs = free_rhs(&q, &free, &disp, c);
                solve(&qff, solver.as_ref(), &rhs)
            })
            .collect();
        for (&c, x) in active.iter().zip(solutions) {
            for (&i, v) in free.iter().zip(x?) {
                disp[i][c] = v;
            }
        }
    }

    let mut residual: f64 = 0.0;
    for c in 0..3 {
        let col: Vec<f64> = disp.iter().map(|d| d[c]).collect();
        let r = q.mul_vec(&col);
        for &i in &free {
            residual = residual.max(r[i].abs());
        }
    }
    Ok(BiharmonicSolution {
        displacements: disp,
        residual,
        max_handle,
    })
}

/// Applies [`biharmonic_displacements`] to the vertex positions.
pub fn biharmonic_deform(mesh: &TriMesh, handles: &HandleSet) -> Result<TriMesh> {
    let sol = biharmonic_displacements(mesh, handles)?;
    let positions = mesh
        .vertices()
        .iter()
        .zip(&sol.displacements)
        .map(|(v, d)| v + d)
        .collect();
    mesh.with_positions(positions)
}

/// `-Q_fh d_h` for coordinate `c` (handle values are the only nonzeros in
/// `disp` at this point).
fn free_rhs(q: &CsrMatrix, free: &[usize], disp: &[Vec3], c: usize) -> Vec<f64> {
    free.iter()
        .map(|&i| -q.row(i).map(|(j, v)| v * disp[j][c]).sum::<f64>())
        .collect()
}

fn solve(a: &CsrMatrix, chol: Option<&SparseCholesky>, b: &[f64]) -> Result<Vec<f64>> {
    match chol {
        Some(f) => {
            let mut x = f.solve(b);
            // two rounds of iterative refinement
            for _ in 0..2 {
                let ax = a.mul_vec(&x);
                let r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
                let dx = f.solve(&r);
                for (x, d) in x.iter_mut().zip(dx) {
                    *x += d;
                }
            }
            Ok(x)
        }
        None => pcg(a, b, 1e-10, 20 * a.dim() + 1000).map(|(x, _)| x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::{grid, icosphere};
    use nalgebra::{DMatrix, DVector};

    fn boundary_fixed(m: &TriMesh) -> HandleSet {
        HandleSet {
            fixed: m
                .boundary_vertices()
                .iter()
                .enumerate()
                .filter_map(|(i, b)| b.then_some(i))
                .collect(),
            moving: vec![],
        }
    }

    #[test]
    fn zero_handles_give_identity() {
        let m = icosphere(1.0, 2);
        let h = HandleSet {
            fixed: vec![0, 5, 9],
            moving: vec![],
        };
        assert_eq!(biharmonic_deform(&m, &h).unwrap(), m);
    }

    #[test]
    fn constant_displacement_is_reproduced() {
        let m = icosphere(1.0, 3);
        let c = Vec3::new(0.1, -0.2, 0.3);
        let h = HandleSet {
            fixed: vec![],
            moving: vec![(0, c), (40, c), (300, c)],
        };
        let sol = biharmonic_displacements(&m, &h).unwrap();
        for d in &sol.displacements {
            assert!((d - c).amax() < 1e-10);
        }
    }

    #[test]
    fn grid_matches_dense_solve() {
        let m = grid(12);
        let mut h = boundary_fixed(&m);
        let pulled = 5 * 12 + 6;
        h.moving.push((pulled, Vec3::new(0.0, 0.0, 0.1)));
        let sol = biharmonic_displacements(&m, &h).unwrap();

        let n = m.vertex_count();
        let mut kd = DMatrix::<f64>::zeros(n, n);
        for (a, b) in m.edges() {
            kd[(a, b)] -= 1.0;
            kd[(b, a)] -= 1.0;
            kd[(a, a)] += 1.0;
            kd[(b, b)] += 1.0;
        }
        let qd = &kd * &kd;
        let mut is_handle = vec![false; n];
        for &i in &h.fixed {
            is_handle[i] = true;
        }
        is_handle[pulled] = true;
        let free: Vec<usize> = (0..n).filter(|i| !is_handle[*i]).collect();
        let a = DMatrix::from_fn(free.len(), free.len(), |r, c| qd[(free[r], free[c])]);
        let b = DVector::from_fn(free.len(), |r, _| -qd[(free[r], pulled)] * 0.1);
        let x = a.lu().solve(&b).unwrap();
        for (r, &i) in free.iter().enumerate() {
            assert!((sol.displacements[i].z - x[r]).abs() < 1e-8);
            assert_eq!(sol.displacements[i].x, 0.0);
        }
        assert!(sol.residual <= 1e-8 * sol.max_handle);
    }

    #[test]
    fn unconstrained_component_is_named() {
        let a = grid(3);
        let mut v = a.vertices().to_vec();
        let mut f = a.faces().to_vec();
        let off = v.len();
        v.extend(a.vertices().iter().map(|p| p + Vec3::new(10.0, 0.0, 0.0)));
        f.extend(a.faces().iter().map(|t| [t[0] + off, t[1] + off, t[2] + off]));
        let m = TriMesh::new(v, f).unwrap();
        let h = HandleSet {
            fixed: vec![0],
            moving: vec![],
        };
        match biharmonic_displacements(&m, &h) {
            Err(Error::UnconstrainedComponent { component, vertex }) => {
                assert_eq!(component, 1);
                assert_eq!(vertex, off);
            }
            other => panic!("{other:?}"),
        }
        let dup = HandleSet {
            fixed: vec![0],
            moving: vec![(0, Vec3::zeros())],
        };
        assert!(biharmonic_displacements(&m, &dup).is_err());
    }
}
