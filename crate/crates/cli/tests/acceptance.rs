//! Acceptance suite. Runs without the libtest harness so that each criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use anyhow::{ensure, Result};
use nalgebra::{DMatrix, DVector, UnitQuaternion, Vector3};
use proptest::strategy::{Strategy, ValueTree};
use proptest::test_runner::TestRunner;
use sketchrig_cli::config::{Config, SmoothConfig};
use sketchrig_cli::fixture::{write_fixture, COARSE_RESOLUTION};
use sketchrig_cli::pipeline::{run_pipeline, sha256_file, MANIFEST};
use sketchrig_cli::stages;
use sketchrig_core::deform::{biharmonic_displacements, thin_limbs, HandleParams, HandleSet};
use sketchrig_core::fixtures::{biped, wave_motion, Biped};
use sketchrig_core::inpaint::{compose_inpaint_mask, fast_marching_inpaint};
use sketchrig_core::mesh::shapes::{cube, grid, icosphere};
use sketchrig_core::raster::{canny, distance_transform, skeletonize, BinaryMask, CannyParams, RasterImage};
use sketchrig_core::render::{attach_rest_coordinates, guidance_channels, rasterize, Camera};
use sketchrig_core::rig::{
    apply_pose_lbs, compute_skin_weights, embed_skeleton, parse_bvh, serialize_bvh, MotionClip, Skeleton, SKIN_MAX_BONES,
    SKIN_POWER,
};
use sketchrig_core::texture::{backproject_colors, diffuse_hole_colors};
use sketchrig_core::volume::{cut_sdf, marching_cubes, mesh_to_sdf, FrontProjection, SdfGrid, TriangleTree};
use sketchrig_core::{Point, TriMesh, Vec3};

type Criterion = fn() -> Result<String>;

fn main() {
    let criteria: [(&str, Criterion); 11] = [
        ("limb thinning on the biped fixture", thinning),
        ("biharmonic solve", biharmonic),
        ("silhouette cut of a sphere", cutting),
        ("marching cubes on a sphere", marching),
        ("mesh to SDF against brute force", mesh_sdf),
        ("inpainting contract", inpainting),
        ("raster oracles", raster_oracles),
        ("rig and skinning", rigging),
        ("texture bake and hole diffusion", texture),
        ("guidance channels", guidance),
        ("pipeline determinism and budget", determinism),
    ];
    let mut failed = 0;
    for (n, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(anyhow::anyhow!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{secs:.1}s]", n + 1),
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {e:#} [{secs:.1}s]", n + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn sample<S: Strategy>(runner: &mut TestRunner, s: &S) -> S::Value {
    s.new_tree(runner).expect("strategy").current()
}

fn random_mask(runner: &mut TestRunner, w: usize, h: usize) -> BinaryMask {
    let p = sample(runner, &(0.2f64..0.9));
    let bits = sample(runner, &proptest::collection::vec(proptest::bool::weighted(p), w * h));
    BinaryMask::from_bits(w, h, bits).unwrap()
}

fn sphere_grid(n: usize, r: f64) -> SdfGrid {
    let spacing = 2.0 / (n - 1) as f64;
    SdfGrid::from_fn([n; 3], Point::new(-1.0, -1.0, -1.0), spacing, |p| p.coords.norm() - r).unwrap()
}

fn front_mask(mesh: &TriMesh, proj: FrontProjection) -> Result<BinaryMask> {
    Ok(rasterize(mesh, &Camera::front(proj))?.mask)
}

fn thinning() -> Result<String> {
    let start = Instant::now();
    let b = biped(COARSE_RESOLUTION)?;
    let sdf = mesh_to_sdf(&b.coarse, [128; 3], 2)?;
    let cut = cut_sdf(&sdf, &b.mask, &b.proj)?;
    let mesh = stages::extract(&cut)?;
    let params = HandleParams {
        theta1: 11.0,
        theta2: 6.0,
        ..Default::default()
    };
    let thin = thin_limbs(&mesh, &b.mask, &b.proj, &params)?;
    let smooth = stages::smooth(&thin.mesh, &b.mask, &b.proj, &SmoothConfig::default())?;
    let runtime = start.elapsed();

    let tree = TriangleTree::new(&thin.mesh).expect("non-empty mesh");
    let pixels: Vec<(usize, usize)> = thin.regions.skeleton_moving.iter_set().collect();
    ensure!(pixels.len() >= 20, "only {} thinning skeleton pixels", pixels.len());
    let step = pixels.len() / 20;
    let tol = 2.0 * sdf.spacing();
    let mut good = 0;
    for k in 0..20 {
        let (x, y) = pixels[k * step];
        let (mx, my) = b.proj.to_model(x as f64, y as f64);
        let hits = tree.vertical_hits(mx, my);
        if hits.len() < 2 {
            continue;
        }
        let half = (hits[hits.len() - 1].z - hits[0].z) / 2.0;
        let target = b.proj.scale * thin.regions.distance.get(x, y);
        good += ((half - target).abs() <= tol) as usize;
    }
    let before = front_mask(&mesh, b.proj)?;
    let iou_thin = before.iou(&front_mask(&thin.mesh, b.proj)?)?;
    let iou_smooth = before.iou(&front_mask(&smooth, b.proj)?)?;
    let detail = format!(
        "{good}/20 samples within {tol:.4}, IoU thin {iou_thin} smooth {iou_smooth:.5}, {:.1}s",
        runtime.as_secs_f64()
    );
    ensure!(good >= 18, "{detail}");
    ensure!(iou_thin == 1.0, "{detail}");
    ensure!(iou_smooth >= 0.995, "{detail}");
    ensure!(runtime <= Duration::from_secs(30), "{detail}");
    Ok(detail)
}

/// `(D - A) x` for the uniform graph Laplacian.
fn laplacian(mesh: &TriMesh, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for (a, b) in mesh.edges() {
        out[a] += x[a] - x[b];
        out[b] += x[b] - x[a];
    }
    out
}

fn biharmonic() -> Result<String> {
    let sphere = icosphere(1.0, 5);
    let n = sphere.vertex_count();
    ensure!(n >= 10_000, "{n} vertices");
    let mut handles = HandleSet::default();
    for (i, v) in sphere.vertices().iter().enumerate() {
        if v.z < -0.6 {
            handles.fixed.push(i);
        } else if v.z > 0.6 {
            handles.moving.push((i, Vec3::new(0.1 * (3.0 * v.x).sin(), 0.2 * v.y, 0.3)));
        }
    }
    let sol = biharmonic_displacements(&sphere, &handles)?;
    let max_h = handles.moving.iter().map(|(_, d)| d.amax()).fold(0.0, f64::max);
    let mut free = vec![true; n];
    for &i in &handles.fixed {
        free[i] = false;
    }
    for &(i, _) in &handles.moving {
        free[i] = false;
    }
    let mut residual: f64 = 0.0;
    for c in 0..3 {
        let d: Vec<f64> = sol.displacements.iter().map(|v| v[c]).collect();
        let r = laplacian(&sphere, &laplacian(&sphere, &d));
        for i in (0..n).filter(|&i| free[i]) {
            residual = residual.max(r[i].abs());
        }
    }
    ensure!(residual <= 1e-8 * max_h, "residual {residual:e} on {n} vertices");

    let ball = icosphere(1.0, 3);
    let shift = Vec3::new(0.25, -0.5, 1.0);
    let constant = HandleSet {
        fixed: Vec::new(),
        moving: (0..ball.vertex_count()).step_by(7).map(|i| (i, shift)).collect(),
    };
    let c = biharmonic_displacements(&ball, &constant)?;
    let const_err = c.displacements.iter().map(|d| (d - shift).amax()).fold(0.0, f64::max);
    ensure!(const_err <= 1e-10, "constant displacement error {const_err:e}");

    let side = 12;
    let g = grid(side);
    let m = g.vertex_count();
    let mut prescribed: Vec<Option<f64>> = vec![None; m];
    for (i, slot) in prescribed.iter_mut().enumerate() {
        let (x, y) = (i % side, i / side);
        if x == 0 || y == 0 || y == side - 1 {
            *slot = Some(0.0);
        } else if x == side - 1 {
            *slot = Some((y as f64 * 0.7).sin());
        }
    }
    let grid_handles = HandleSet {
        fixed: (0..m).filter(|&i| prescribed[i] == Some(0.0)).collect(),
        moving: (0..m)
            .filter_map(|i| match prescribed[i] {
                Some(v) if v != 0.0 => Some((i, Vec3::new(0.0, 0.0, v))),
                _ => None,
            })
            .collect(),
    };
    let sparse = biharmonic_displacements(&g, &grid_handles)?;
    let mut l = DMatrix::<f64>::zeros(m, m);
    for (a, b) in g.edges() {
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
    }
    let q = &l * &l;
    let free_idx: Vec<usize> = (0..m).filter(|&i| prescribed[i].is_none()).collect();
    let fixed_idx: Vec<usize> = (0..m).filter(|&i| prescribed[i].is_some()).collect();
    let qff = DMatrix::from_fn(free_idx.len(), free_idx.len(), |r, c| q[(free_idx[r], free_idx[c])]);
    let rhs = DVector::from_fn(free_idx.len(), |r, _| {
        -fixed_idx
            .iter()
            .map(|&j| q[(free_idx[r], j)] * prescribed[j].unwrap_or(0.0))
            .sum::<f64>()
    });
    let dense = qff.cholesky().expect("positive definite").solve(&rhs);
    let dense_err = free_idx
        .iter()
        .zip(dense.iter())
        .map(|(&i, v)| (sparse.displacements[i].z - v).abs())
        .fold(0.0, f64::max);
    ensure!(dense_err <= 1e-8, "dense disagreement {dense_err:e}");
    Ok(format!(
        "residual {:.1e} (bound {:.1e}, {n} vertices), constant error {const_err:.1e}, dense error {dense_err:.1e}",
        residual,
        1e-8 * max_h
    ))
}

fn cutting() -> Result<String> {
    let g = sphere_grid(64, 0.8);
    let proj = FrontProjection::centered(256, 256, 1.0);
    let mask = BinaryMask::from_fn(256, 256, |x, _| x >= 128);
    let cut = cut_sdf(&g, &mask, &proj)?;
    let [nx, ny, nz] = g.dims();
    let mut agree = 0usize;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let p = g.position(i, j, k);
                let inside = p.coords.norm() < 0.8 && p.x > 0.0;
                agree += ((cut.get(i, j, k) < 0.0) == inside) as usize;
            }
        }
    }
    let frac = agree as f64 / (nx * ny * nz) as f64;
    let again = cut_sdf(&cut, &mask, &proj)?;
    let identical = cut
        .values()
        .iter()
        .zip(again.values())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let detail = format!("classification agreement {:.4}%, idempotent {identical}", 100.0 * frac);
    ensure!(frac >= 0.99 && identical, "{detail}");
    Ok(detail)
}

fn marching() -> Result<String> {
    let g = sphere_grid(64, 0.8);
    let start = Instant::now();
    let iso = marching_cubes(&g, 0.0);
    let secs = start.elapsed().as_secs_f64();
    ensure!(iso.has_surface, "no surface");
    let h = g.spacing();
    let (lo, hi) = g.value_range();
    let range = (hi - lo) as f64;
    let mut radial: f64 = 0.0;
    let mut resample: f64 = 0.0;
    for v in iso.mesh.vertices() {
        radial = radial.max((v.coords.norm() - 0.8).abs());
        resample = resample.max(g.sample(v).abs());
    }
    let detail = format!(
        "{} vertices, max radial error {:.3} spacings, max resample {:.1e} of range {range:.3}, {secs:.2}s",
        iso.mesh.vertex_count(),
        radial / h,
        resample / range
    );
    ensure!(radial <= 1.5 * h, "{detail}");
    ensure!(resample <= 1e-4 * range, "{detail}");
    ensure!(secs <= 2.0, "{detail}");
    Ok(detail)
}

/// Distance to a triangle as the minimum over the interior projection and
/// the three edges.
fn triangle_distance(p: &Point, t: &[Point; 3]) -> f64 {
    let n = (t[1] - t[0]).cross(&(t[2] - t[0])).normalize();
    let proj = p - n * n.dot(&(p - t[0]));
    let inside = (0..3).all(|e| {
        let (a, b) = (t[e], t[(e + 1) % 3]);
        (b - a).cross(&(proj - a)).dot(&n) >= 0.0
    });
    if inside {
        return (p - proj).norm();
    }
    (0..3)
        .map(|e| {
            let (a, b) = (t[e], t[(e + 1) % 3]);
            let s = ((p - a).dot(&(b - a)) / (b - a).norm_squared()).clamp(0.0, 1.0);
            (p - (a + (b - a) * s)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Inside test for a convex closed mesh, independent of winding.
fn inside_convex(m: &TriMesh, p: &Point) -> bool {
    let c = m.vertices().iter().fold(Vec3::zeros(), |s, v| s + v.coords) / m.vertex_count() as f64;
    (0..m.face_count()).all(|f| {
        let t = m.triangle(f);
        let n = (t[1] - t[0]).cross(&(t[2] - t[0]));
        (n.dot(&(p - t[0])) > 0.0) == (n.dot(&(c - t[0].coords)) > 0.0)
    })
}

fn transformed(m: &TriMesh, f: impl Fn(&Point) -> Point) -> TriMesh {
    TriMesh::new(m.vertices().iter().map(f).collect(), m.faces().to_vec()).unwrap()
}

fn merged(parts: &[TriMesh]) -> TriMesh {
    let mut v = Vec::new();
    let mut f = Vec::new();
    for p in parts {
        let o = v.len();
        v.extend_from_slice(p.vertices());
        f.extend(p.faces().iter().map(|t| [t[0] + o, t[1] + o, t[2] + o]));
    }
    TriMesh::new(v, f).unwrap()
}

fn mesh_sdf() -> Result<String> {
    let rot = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::new(1.0, 1.0, 0.0)), 0.6);
    let boxy = transformed(&cube(0.5), |p| {
        Point::from(rot * Vec3::new(1.2 * p.x, 0.4 * p.y, 0.7 * p.z) + Vec3::new(0.1, -0.05, 0.0))
    });
    let shifted = |dx: f64| transformed(&cube(0.3), move |p| Point::new(p.x + dx, p.y, p.z));
    let cases: Vec<Vec<TriMesh>> = vec![
        vec![cube(0.5)],
        vec![boxy],
        vec![icosphere(0.7, 0)],
        vec![icosphere(0.8, 2)],
        vec![shifted(-0.5), shifted(0.5)],
    ];
    let mut max_err: f64 = 0.0;
    let (mut signed, mut sign_ok) = (0usize, 0usize);
    for parts in &cases {
        let m = merged(parts);
        ensure!(m.face_count() <= 500, "{} faces", m.face_count());
        let g = mesh_to_sdf(&m, [22, 20, 18], 2)?;
        let [nx, ny, nz] = g.dims();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = g.position(i, j, k);
                    let d = (0..m.face_count())
                        .map(|f| triangle_distance(&p, &m.triangle(f)))
                        .fold(f64::INFINITY, f64::min);
                    let v = g.get(i, j, k) as f64;
                    max_err = max_err.max((v.abs() - d).abs());
                    if d > 1e-9 {
                        signed += 1;
                        let inside = parts.iter().any(|c| inside_convex(c, &p));
                        sign_ok += ((v < 0.0) == inside) as usize;
                    }
                }
            }
        }
    }
    let agree = sign_ok as f64 / signed as f64;
    let detail = format!("max |distance| error {max_err:.1e}, sign agreement {:.3}% over {signed} points", 100.0 * agree);
    ensure!(max_err <= 1e-6 && agree >= 0.999, "{detail}");
    Ok(detail)
}

fn inpainting() -> Result<String> {
    let mut runner = TestRunner::deterministic();
    let (w, h) = (32, 28);
    for trial in 0..40 {
        let vals = sample(&mut runner, &proptest::collection::vec(0.0f32..=1.0, w * h * 3));
        let img = RasterImage::from_vec(w, h, 3, vals)?;
        let region = random_mask(&mut runner, w, h);
        if region.count() == w * h {
            continue;
        }
        let radius = sample(&mut runner, &(1.0f64..6.0));
        let out = fast_marching_inpaint(&img, &region, radius)?;
        for c in 0..3 {
            let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
            for y in 0..h {
                for x in 0..w {
                    if !region.get(x, y) {
                        lo = lo.min(img.get(x, y, c));
                        hi = hi.max(img.get(x, y, c));
                    }
                }
            }
            for y in 0..h {
                for x in 0..w {
                    let v = out.get(x, y, c);
                    if region.get(x, y) {
                        ensure!(v >= lo && v <= hi, "trial {trial}: {v} outside [{lo}, {hi}]");
                    } else {
                        ensure!(v.to_bits() == img.get(x, y, c).to_bits(), "trial {trial}: known pixel changed");
                    }
                }
            }
        }
    }
    let flat = RasterImage::filled(40, 30, 3, 0.37)?;
    let hole = BinaryMask::from_fn(40, 30, |x, y| (x as f64 - 20.0).powi(2) + (y as f64 - 15.0).powi(2) <= 64.0);
    ensure!(fast_marching_inpaint(&flat, &hole, 5.0)? == flat, "constant image changed");

    for trial in 0..1000 {
        let contour = random_mask(&mut runner, 16, 16);
        let fg = random_mask(&mut runner, 16, 16);
        let r = compose_inpaint_mask(&contour, &fg)?;
        for y in 0..16 {
            for x in 0..16 {
                ensure!(r.get(x, y) == (contour.get(x, y) || !fg.get(x, y)), "union trial {trial} at ({x},{y})");
            }
        }
    }
    Ok("40 random images exact outside and bounded inside, constant fixed point, 1000 union trials".into())
}

/// Squared-integer brute force, with pixels outside the raster as background.
fn brute_distance(m: &BinaryMask) -> Vec<f64> {
    let (w, h) = m.dims();
    let bg: Vec<(i64, i64)> = (0..w * h)
        .filter(|&i| !m.bits()[i])
        .map(|i| ((i % w) as i64, (i / w) as i64))
        .collect();
    (0..w * h)
        .map(|i| {
            if !m.bits()[i] {
                return 0.0;
            }
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            let edge = (x + 1).min(y + 1).min(w as i64 - x).min(h as i64 - y);
            let best = bg
                .iter()
                .map(|&(bx, by)| (bx - x).pow(2) + (by - y).pow(2))
                .fold(edge * edge, i64::min);
            (best as f64).sqrt()
        })
        .collect()
}

fn raster_oracles() -> Result<String> {
    let mut runner = TestRunner::deterministic();
    for trial in 0..200 {
        let m = random_mask(&mut runner, 64, 64);
        let d = distance_transform(&m)?;
        ensure!(d.values() == &brute_distance(&m)[..], "distance transform differs on mask {trial}");
    }

    let rect = BinaryMask::from_fn(61, 31, |x, y| (10..51).contains(&x) && (10..21).contains(&y));
    let skel = skeletonize(&rect);
    let off = skel.iter_set().map(|(_, y)| y.abs_diff(15)).max().unwrap_or(usize::MAX);
    let comps = skel.count_components_8();
    ensure!(skel.count() > 0 && off <= 1 && comps == 1, "skeleton off midline by {off}, {comps} components");

    let (w, h) = (64, 48);
    let step = RasterImage::from_fn(w, h, 1, |x, _, _| if x >= 32 { 1.0 } else { 0.0 })?;
    let edges = canny(&step, &CannyParams::default())?;
    let near = |x: usize| (x as f64 - 31.5).abs() <= 1.0;
    let stray = edges.iter_set().filter(|&(x, _)| !near(x)).count();
    let rows = (0..h).filter(|&y| (0..w).any(|x| near(x) && edges.get(x, y))).count();
    let recall = rows as f64 / h as f64;
    ensure!(stray == 0 && recall >= 0.95, "step edge: {stray} stray pixels, recall {recall:.3}");
    Ok(format!(
        "200 exact distance transforms, skeleton {} px within {off} px of midline, step recall {:.1}%",
        skel.count(),
        100.0 * recall
    ))
}

fn joint_positions(s: &Skeleton, clip: &MotionClip) -> Result<Vec<Vec<Point>>> {
    clip.frames
        .iter()
        .map(|p| Ok(s.globals(p)?.iter().map(|g| Point::from(g.translation.vector)).collect()))
        .collect()
}

fn rigging() -> Result<String> {
    let b: Biped = biped(COARSE_RESOLUTION)?;
    let mesh = &b.coarse;
    let skeleton = embed_skeleton(mesh, &b.keypoints, &b.proj)?;
    let weights = compute_skin_weights(mesh, &skeleton, SKIN_POWER, SKIN_MAX_BONES)?;
    for (i, inf) in weights.influences.iter().enumerate() {
        let sum: f64 = inf.iter().map(|x| x.1).sum();
        ensure!((sum - 1.0).abs() <= 1e-6, "vertex {i} weights sum to {sum}");
        ensure!(inf.iter().all(|x| x.1 >= 0.0), "vertex {i} has a negative weight");
    }
    let rest = apply_pose_lbs(mesh, &skeleton, &weights, &skeleton.rest_pose())?;
    let rest_err = rest
        .vertices()
        .iter()
        .zip(mesh.vertices())
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    ensure!(rest_err <= 1e-6, "rest pose moves vertices by {rest_err:e}");

    // Rotating only the root turns the mesh rigidly about the root joint.
    let r = UnitQuaternion::from_euler_angles(0.3, -0.5, 0.8);
    let mut pose = skeleton.rest_pose();
    pose.rotations[0] = r * pose.rotations[0];
    let root = skeleton.rest_positions()[0];
    let turned = apply_pose_lbs(mesh, &skeleton, &weights, &pose)?;
    let rigid_err = turned
        .vertices()
        .iter()
        .zip(mesh.vertices())
        .map(|(a, v)| (a - (root + r * (v - root))).norm())
        .fold(0.0, f64::max);
    ensure!(rigid_err <= 1e-6, "root rotation error {rigid_err:e}");

    let (source, clip) = parse_bvh(&b.motion)?;
    let (again_s, again_c) = parse_bvh(&serialize_bvh(&source, &clip)?)?;
    ensure!(again_c.frames.len() == clip.frames.len(), "frame count changed");
    ensure!((again_c.frame_time - clip.frame_time).abs() <= 1e-6, "frame time changed");
    let (_, original) = wave_motion();
    let a = joint_positions(&source, &clip)?;
    let b2 = joint_positions(&again_s, &again_c)?;
    let mut bvh_err: f64 = 0.0;
    for (fa, fb) in a.iter().zip(&b2) {
        for (pa, pb) in fa.iter().zip(fb) {
            bvh_err = bvh_err.max((pa - pb).amax());
        }
    }
    let mut rot_err: f64 = 0.0;
    for (pa, pb) in clip.frames.iter().zip(&original.frames) {
        for (qa, qb) in pa.rotations.iter().zip(&pb.rotations) {
            rot_err = rot_err.max(qa.angle_to(qb));
        }
    }
    ensure!(bvh_err <= 1e-6 && rot_err <= 1e-6, "BVH round trip: positions {bvh_err:e}, rotations {rot_err:e}");
    Ok(format!(
        "rest {rest_err:.1e}, root rotation {rigid_err:.1e}, {} weight rows, BVH round trip {bvh_err:.1e}",
        weights.influences.len()
    ))
}

fn texture() -> Result<String> {
    let m = cube(0.5);
    let proj = FrontProjection::centered(64, 64, 1.0);
    const RED: [f32; 3] = [1.0, 0.0, 0.0];
    const GREEN: [f32; 3] = [0.0, 1.0, 0.0];
    const BLUE: [f32; 3] = [0.0, 0.0, 1.0];
    const YELLOW: [f32; 3] = [1.0, 1.0, 0.0];
    let halves = |l: [f32; 3], r: [f32; 3]| RasterImage::from_fn(64, 64, 3, move |x, _, c| if x < 32 { l[c] } else { r[c] });
    let front = halves(RED, GREEN)?;
    let back = halves(BLUE, YELLOW)?;
    let bp = backproject_colors(&m, &front, &back, &proj)?;
    ensure!(bp.uncolored.is_empty(), "cube corners left uncolored: {:?}", bp.uncolored);
    for (i, (v, c)) in m.vertices().iter().zip(bp.mesh.colors().unwrap()).enumerate() {
        // the back image is mirrored, so model -x lands in its right half
        let expect = match (v.z > 0.0, v.x < 0.0) {
            (true, true) => RED,
            (true, false) => GREEN,
            (false, true) => YELLOW,
            (false, false) => BLUE,
        };
        ensure!(*c == expect, "vertex {i} at {v:?} got {c:?}, expected {expect:?}");
    }

    let mut ball = icosphere(1.0, 3);
    let (c0, c1) = ([1.0f32, 0.2, 0.0], [0.0f32, 0.4, 1.0]);
    let colored: Vec<bool> = ball.vertices().iter().map(|v| v.z.abs() > 0.3).collect();
    let seeds = ball
        .vertices()
        .iter()
        .map(|v| if v.z > 0.3 { c0 } else if v.z < -0.3 { c1 } else { [0.0; 3] })
        .collect();
    ball.set_colors(seeds)?;
    let (filled, sweeps) = diffuse_hole_colors(&ball, &colored)?;
    let n = ball.vertex_count();
    ensure!(sweeps <= 10 * n, "{sweeps} sweeps for {n} vertices");
    let seg = Vec3::new((c1[0] - c0[0]) as f64, (c1[1] - c0[1]) as f64, (c1[2] - c0[2]) as f64);
    for (i, c) in filled.colors().unwrap().iter().enumerate() {
        let d = Vec3::new((c[0] - c0[0]) as f64, (c[1] - c0[1]) as f64, (c[2] - c0[2]) as f64);
        let t = d.dot(&seg) / seg.norm_squared();
        let off = (d - seg * t).norm();
        ensure!((-1e-6..=1.0 + 1e-6).contains(&t) && off <= 1e-5, "vertex {i} color {c:?} outside the seed hull");
    }

    let b = biped(COARSE_RESOLUTION)?;
    let bp = backproject_colors(&b.coarse, &b.drawing, &b.drawing.flip_horizontal(), &b.proj)?;
    let seeds: Vec<[f32; 3]> = bp
        .colored
        .iter()
        .zip(bp.mesh.colors().unwrap())
        .filter(|(k, _)| **k)
        .map(|(_, c)| *c)
        .collect();
    let (baked, biped_sweeps) = diffuse_hole_colors(&bp.mesh, &bp.colored)?;
    let bn = b.coarse.vertex_count();
    ensure!(biped_sweeps <= 10 * bn, "{biped_sweeps} sweeps for {bn} vertices");
    for ch in 0..3 {
        let lo = seeds.iter().map(|c| c[ch]).fold(f32::INFINITY, f32::min);
        let hi = seeds.iter().map(|c| c[ch]).fold(f32::NEG_INFINITY, f32::max);
        ensure!(
            baked.colors().unwrap().iter().all(|c| c[ch] >= lo && c[ch] <= hi),
            "biped channel {ch} leaves the seed range"
        );
    }
    Ok(format!(
        "cube corners exact, sphere {sweeps} sweeps / {n} vertices, biped {} holes in {biped_sweeps} sweeps / {bn} vertices",
        bp.uncolored.len()
    ))
}

fn guidance() -> Result<String> {
    let b = biped(COARSE_RESOLUTION)?;
    let rest = attach_rest_coordinates(&b.coarse, &b.proj)?;
    let g = guidance_channels(&rest, &Camera::front(b.proj), &CannyParams::default())?;
    let px: Vec<(f64, f64)> = b.coarse.vertices().iter().map(|v| b.proj.to_pixel(v.x, v.y)).collect();
    let x0 = px.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x1 = px.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let y0 = px.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y1 = px.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let mut pos_err: f64 = 0.0;
    for (x, y) in g.mask.iter_set() {
        let u = (x as f64 - x0) / (x1 - x0);
        let v = (y as f64 - y0) / (y1 - y0);
        pos_err = pos_err
            .max((g.pos.get(x, y, 0) as f64 - u).abs())
            .max((g.pos.get(x, y, 1) as f64 - v).abs());
    }
    ensure!(pos_err <= 1.5 / 512.0, "G_pos error {pos_err:e}");

    let proj = FrontProjection::centered(512, 512, 1.0);
    // fine enough that the polygon outline stays within 0.1 px of the circle
    let sphere = attach_rest_coordinates(&icosphere(0.8, 6), &proj)?;
    let sg = guidance_channels(&sphere, &Camera::front(proj), &CannyParams::default())?;
    let r = 0.8 / proj.scale;
    let mut edge_err: f64 = 0.0;
    for (x, y) in sg.edge.iter_set() {
        let d = ((x as f64 - 255.5).powi(2) + (y as f64 - 255.5).powi(2)).sqrt();
        edge_err = edge_err.max((d - r).abs());
    }
    let edge_count = sg.edge.count();
    ensure!(edge_count > 0, "no edges on the sphere");
    ensure!(edge_err <= 1.0, "sphere edge up to {edge_err:.2} px from the circle");

    for frame in [&g, &sg] {
        let dims = frame.mask.dims();
        ensure!(
            frame.color.dims() == dims && frame.pos.dims() == dims && frame.edge.dims() == dims && frame.depth.dims() == dims,
            "guidance layers disagree in size"
        );
    }
    Ok(format!(
        "G_pos max error {:.2}/512, {edge_count} sphere edge pixels within {edge_err:.2} px",
        pos_err * 512.0
    ))
}

fn determinism() -> Result<String> {
    let dir = tempfile::tempdir()?;
    let (config, _) = write_fixture(dir.path())?;
    let cfg = Config::load(&config)?;
    ensure!(cfg.volume.grid == 128, "fixture grid {}", cfg.volume.grid);
    let mut manifests = Vec::new();
    let mut times = Vec::new();
    for _ in 0..2 {
        let report = run_pipeline(&cfg)?;
        times.push(report.seconds);
        ensure!(report.seconds <= 120.0, "pipeline took {:.1}s", report.seconds);
        manifests.push(std::fs::read(cfg.output_dir.join(MANIFEST))?);
        for f in &report.manifest.files {
            ensure!(sha256_file(&cfg.output_dir.join(&f.path))? == f.sha256, "{} does not match its hash", f.path);
        }
    }
    ensure!(manifests[0] == manifests[1], "manifests differ between runs");
    let frames = std::fs::read_dir(cfg.output_dir.join("frames"))?.count();
    ensure!(frames == 30, "{frames} frame directories");
    Ok(format!(
        "runs took {:.1}s and {:.1}s, {frames} frames, manifests identical ({} bytes)",
        times[0],
        times[1],
        manifests[0].len()
    ))
}
