//! Symmetric sparse matrices, a simplicial Cholesky factorization with a
//! geometric nested-dissection ordering, and Jacobi-preconditioned CG.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

/// Compressed sparse rows with sorted column indices. Symmetric matrices are
/// stored in full.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|e| (e.0, e.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self * other` for square matrices of equal size.
    pub fn mul(&self, other: &CsrMatrix) -> CsrMatrix {
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut touched = Vec::new();
        for i in 0..n {
            touched.clear();
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if mark[j] != i {
                        mark[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                cols.push(j);
                vals.push(acc[j]);
            }
            row_ptr[i + 1] = cols.len();
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    /// Rows and columns `keep` (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let mut t = Vec::new();
        for (new_i, &i) in keep.iter().enumerate() {
            for (j, v) in self.row(i) {
                if map[j] != usize::MAX {
                    t.push((new_i, map[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(keep.len(), t)
    }

    /// Symmetric permutation `P A P^T` with `perm[new] = old`.
    pub fn permute(&self, perm: &[usize]) -> CsrMatrix {
        self.submatrix(perm)
    }
}

/// Uniform graph Laplacian `K = D - A` of the mesh edge graph.
pub fn uniform_laplacian(mesh: &TriMesh) -> CsrMatrix {
    let n = mesh.vertex_count();
    let mut t = Vec::new();
    for (a, b) in mesh.edges() {
        t.push((a, b, -1.0));
        t.push((b, a, -1.0));
        t.push((a, a, 1.0));
        t.push((b, b, 1.0));
    }
    CsrMatrix::from_triplets(n, t)
}

/// Fill-reducing ordering (`perm[new] = old`) by recursive coordinate
/// bisection: each part is split at the median along its widest axis, the
/// left vertices adjacent to the right part form the separator, and
/// separators are numbered after both halves.
pub fn nested_dissection(a: &CsrMatrix, positions: &[Point]) -> Vec<usize> {
    const LEAF: usize = 64;
    let n = a.dim();
    let mut side = vec![0u8; n];
    let mut order = Vec::with_capacity(n);
    let mut work: Vec<(Vec<usize>, bool)> = vec![((0..n).collect(), false)];
    // explicit stack: (set, emit); emit pushes the set to the order as-is
    while let Some((set, emit)) = work.pop() {
        if emit || set.len() <= LEAF {
            order.extend_from_slice(&set);
            continue;
        }
        let mut lo = positions[set[0]];
        let mut hi = lo;
        for &v in &set {
            lo = lo.inf(&positions[v]);
            hi = hi.sup(&positions[v]);
        }
        let ext = hi - lo;
        let axis = (0..3).max_by(|&x, &y| ext[x].total_cmp(&ext[y]).then(y.cmp(&x))).unwrap_or(0);
        let mut sorted = set;
        sorted.sort_unstable_by(|&u, &v| positions[u][axis].total_cmp(&positions[v][axis]).then(u.cmp(&v)));
        let mid = sorted.len() / 2;
        for &v in &sorted[..mid] {
            side[v] = 1;
        }
        for &v in &sorted[mid..] {
            side[v] = 2;
        }
        let mut left = Vec::new();
        let mut sep = Vec::new();
        for &v in &sorted[..mid] {
            if a.row(v).any(|(j, _)| side[j] == 2) {
                sep.push(v);
            } else {
                left.push(v);
            }
        }
        let right = sorted[mid..].to_vec();
        for &v in &sorted {
            side[v] = 0;
        }
        // popped in reverse: left, right, then separator
        work.push((sep, true));
        work.push((right, false));
        work.push((left, false));
    }
    order
}

/// `L L^T` factorization of a symmetric positive definite matrix in a
/// fill-reducing order.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    perm: Vec<usize>,
    /// Column-compressed lower factor; the diagonal is the first entry of
    /// each column.
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseCholesky {
    pub fn factor(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        let c = a.permute(&perm);
        // Row i of the symmetric matrix restricted to columns <= i is
        // column i of its upper triangle.
        let parent = etree(&c);
        let mut counts = vec![1usize; n];
        let mut mark = vec![usize::MAX; n];
        let mut stack = vec![0usize; n];
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut mark, &mut stack);
            for &i in &stack[top..] {
                counts[i] += 1;
            }
        }
        let mut col_ptr = vec![0; n + 1];
        for i in 0..n {
            col_ptr[i + 1] = col_ptr[i] + counts[i];
        }
        let nnz = col_ptr[n];
        let mut rows = vec![0usize; nnz];
        let mut vals = vec![0.0; nnz];
        let mut next: Vec<usize> = col_ptr[..n].to_vec();
        let mut x = vec![0.0; n];
        mark.iter_mut().for_each(|m| *m = usize::MAX);
        for k in 0..n {
            let top = ereach(&c, k, &parent, &mut mark, &mut stack);
            for (j, v) in c.row(k) {
                if j <= k {
                    x[j] = v;
                }
            }
            let mut d = x[k];
            x[k] = 0.0;
            // `stack` is in topological order (descendants first)
            for &i in &stack[top..] {
                let lki = x[i] / vals[col_ptr[i]];
                x[i] = 0.0;
                for p in col_ptr[i] + 1..next[i] {
                    x[rows[p]] -= vals[p] * lki;
                }
                d -= lki * lki;
                let p = next[i];
                next[i] += 1;
                rows[p] = k;
                vals[p] = lki;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Solver(format!("matrix not positive definite at pivot {k}")));
            }
            let p = next[k];
            next[k] += 1;
            rows[p] = k;
            vals[p] = d.sqrt();
        }
        Ok(Self {
            perm,
            col_ptr,
            rows,
            vals,
        })
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&i| b[i]).collect();
        for j in 0..n {
            let r = self.col_ptr[j]..self.col_ptr[j + 1];
            y[j] /= self.vals[r.start];
            let yj = y[j];
            for p in r.start + 1..r.end {
                y[self.rows[p]] -= self.vals[p] * yj;
            }
        }
        for j in (0..n).rev() {
            let r = self.col_ptr[j]..self.col_ptr[j + 1];
            let mut s = y[j];
            for p in r.start + 1..r.end {
                s -= self.vals[p] * y[self.rows[p]];
            }
            y[j] = s / self.vals[r.start];
        }
        let mut out = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = y[new];
        }
        out
    }
}

/// Elimination tree of a symmetric matrix (`usize::MAX` marks roots).
fn etree(a: &CsrMatrix) -> Vec<usize> {
    let n = a.dim();
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for k in 0..n {
        for (j, _) in a.row(k) {
            if j >= k {
                continue;
            }
            let mut i = j;
            while i != usize::MAX && i < k {
                let next = ancestor[i];
                ancestor[i] = k;
                if next == usize::MAX {
                    parent[i] = k;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of the factor (excluding the diagonal) in
/// topological order, written to `s[top..]`; returns `top`.
fn ereach(a: &CsrMatrix, k: usize, parent: &[usize], mark: &mut [usize], s: &mut [usize]) -> usize {
    let n = a.dim();
    let mut top = n;
    mark[k] = k;
    for (j, _) in a.row(k) {
        if j >= k {
            continue;
        }
        let mut len = 0;
        let mut i = j;
        while mark[i] != k {
            s[len] = i;
            len += 1;
            mark[i] = k;
            i = parent[i];
        }
        // the path occupies s[..len]; move it just below `top`
        while len > 0 {
            top -= 1;
            len -= 1;
            s[top] = s[len];
        }
    }
    top
}

/// Jacobi-preconditioned conjugate gradients. Stops when the residual norm
/// falls below `tol * |b|`. Returns the solution and the iteration count.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Solver("conjugate gradients hit a non-positive curvature".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * b_norm {
            return Ok((x, it + 1));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!("conjugate gradients did not converge in {max_iter} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::shapes::grid;
    use nalgebra::{DMatrix, DVector};

    fn dense(a: &CsrMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(a.dim(), a.dim(), |i, j| a.get(i, j))
    }

    fn shifted_bilaplacian(n: usize) -> (CsrMatrix, Vec<Point>) {
        let m = grid(n);
        let k = uniform_laplacian(&m);
        let q = k.mul(&k);
        let mut t: Vec<(usize, usize, f64)> = (0..q.dim())
            .flat_map(|i| q.row(i).map(move |(j, v)| (i, j, v)).collect::<Vec<_>>())
            .collect();
        for i in 0..q.dim() {
            t.push((i, i, 0.01));
        }
        (CsrMatrix::from_triplets(q.dim(), t), m.vertices().to_vec())
    }

    #[test]
    fn product_matches_dense() {
        let m = grid(4);
        let k = uniform_laplacian(&m);
        let dk = dense(&k);
        assert_eq!(dense(&k.mul(&k)), &dk * &dk);
        for i in 0..k.dim() {
            assert_eq!(k.row(i).map(|(_, v)| v).sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn ordering_is_a_permutation() {
        let (a, pos) = shifted_bilaplacian(20);
        let mut p = nested_dissection(&a, &pos);
        p.sort_unstable();
        assert_eq!(p, (0..400).collect::<Vec<_>>());
    }

    #[test]
    fn cholesky_matches_dense_solve() {
        let (a, pos) = shifted_bilaplacian(15);
        let b: Vec<f64> = (0..a.dim()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        for perm in [nested_dissection(&a, &pos), (0..a.dim()).collect()] {
            let f = SparseCholesky::factor(&a, perm).unwrap();
            let x = f.solve(&b);
            let reference = dense(&a).cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
            for (u, v) in x.iter().zip(reference.iter()) {
                assert!((u - v).abs() < 1e-8 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn nested_dissection_reduces_fill() {
        let (a, pos) = shifted_bilaplacian(40);
        let natural = SparseCholesky::factor(&a, (0..a.dim()).collect()).unwrap();
        let nd = SparseCholesky::factor(&a, nested_dissection(&a, &pos)).unwrap();
        assert!(nd.nnz() < natural.nnz());
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(SparseCholesky::factor(&a, vec![0, 1]).is_err());
    }

    #[test]
    fn pcg_converges() {
        let (a, _) = shifted_bilaplacian(10);
        let b: Vec<f64> = (0..a.dim()).map(|i| (i % 7) as f64).collect();
        let (x, _) = pcg(&a, &b, 1e-12, 10_000).unwrap();
        let r = a.mul_vec(&x);
        for (u, v) in r.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8);
        }
    }
}
