//! Triangle coverage with a depth test.

/// Per-pixel nearest triangle and its barycentric coordinates.
#[derive(Debug, Clone)]
pub struct Coverage {
    pub width: usize,
    pub height: usize,
    /// Face index per pixel, `u32::MAX` where uncovered.
    pub face: Vec<u32>,
    pub bary: Vec<[f64; 3]>,
    /// View depth (smaller is nearer), `f64::INFINITY` where uncovered.
    pub depth: Vec<f64>,
}

pub const EMPTY: u32 = u32::MAX;

impl Coverage {
    #[inline]
    pub fn covered(&self, x: usize, y: usize) -> bool {
        self.face[y * self.width + x] != EMPTY
    }
}

/// Rasterizes triangles given per-vertex `[px, py, depth]` in continuous
/// pixel coordinates (integers at pixel centers). A pixel is covered when its
/// center lies inside the triangle; centers exactly on an edge follow a
/// top-left rule so that shared edges are drawn once. The smallest depth wins;
/// equal depths keep the lower face index.
pub fn rasterize_faces(width: usize, height: usize, screen: &[[f64; 3]], faces: &[[usize; 3]]) -> Coverage {
    let n = width * height;
    let mut cov = Coverage {
        width,
        height,
        face: vec![EMPTY; n],
        bary: vec![[0.0; 3]; n],
        depth: vec![f64::INFINITY; n],
    };
    for (fi, f) in faces.iter().enumerate() {
        let (mut a, mut b, c) = (screen[f[0]], screen[f[1]], screen[f[2]]);
        let mut swapped = false;
        // signed area with y pointing down; make it positive
        let area = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        if area < 0.0 {
            std::mem::swap(&mut a, &mut b);
            swapped = true;
        }
        let area = area.abs();
        let x0 = a[0].min(b[0]).min(c[0]).ceil().max(0.0);
        let x1 = a[0].max(b[0]).max(c[0]).floor().min(width as f64 - 1.0);
        let y0 = a[1].min(b[1]).min(c[1]).ceil().max(0.0);
        let y1 = a[1].max(b[1]).max(c[1]).floor().min(height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for py in y0 as usize..=y1 as usize {
            for px in x0 as usize..=x1 as usize {
                let (x, y) = (px as f64, py as f64);
                let w0 = edge(&b, &c, x, y);
                let w1 = edge(&c, &a, x, y);
                let w2 = edge(&a, &b, x, y);
                if !(inside(w0, &b, &c) && inside(w1, &c, &a) && inside(w2, &a, &b)) {
                    continue;
                }
                let (l0, l1, l2) = (w0 / area, w1 / area, w2 / area);
                let d = l0 * a[2] + l1 * b[2] + l2 * c[2];
                let i = py * width + px;
                if d < cov.depth[i] {
                    cov.depth[i] = d;
                    cov.face[i] = fi as u32;
                    // barycentrics in the face's own vertex order
                    cov.bary[i] = if swapped { [l1, l0, l2] } else { [l0, l1, l2] };
                }
            }
        }
    }
    cov
}

#[inline]
fn edge(a: &[f64; 3], b: &[f64; 3], x: f64, y: f64) -> f64 {
    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
}

/// Points exactly on an edge belong to the triangle when the edge is a top
/// edge or a left edge (in a y-down frame with positive area).
#[inline]
fn inside(w: f64, a: &[f64; 3], b: &[f64; 3]) -> bool {
    if w > 0.0 {
        return true;
    }
    if w < 0.0 {
        return false;
    }
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    (dy == 0.0 && dx < 0.0) || dy > 0.0
}
