//! The end-to-end run, its manifest and the dry-run validator.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use sketchrig_core::meshio::{read_mesh, write_mesh};
use sketchrig_core::raster::io::{read_image, read_mask, write_image};
use sketchrig_core::rig::{parse_bvh, serialize_bvh, KeypointSet};
use sketchrig_core::volume::{cut_sdf, mesh_to_sdf, SdfGrid};

use crate::config::Config;
use crate::rigfile::RigFile;
use crate::stages;

pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";
pub const PARTIAL: &str = ".partial";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub name: String,
    pub params: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    /// Scalar diagnostics (counts, residuals).
    pub stats: BTreeMap<String, serde_json::Value>,
}

/// Deterministic record of a run. Timings live in a separate file so that
/// identical runs produce identical manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub stages: Vec<StageRecord>,
    /// Every file written under the output directory except the manifest
    /// and the timings file, sorted by path.
    pub files: Vec<FileRecord>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

struct Run {
    out: PathBuf,
    stages: Vec<StageRecord>,
    timings: Vec<(String, f64)>,
    started: Option<Instant>,
}

impl Run {
    fn begin(&mut self, name: &str, params: impl Serialize) -> Result<()> {
        self.stages.push(StageRecord {
            name: name.to_string(),
            params: serde_json::to_value(params)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
            stats: BTreeMap::new(),
        });
        self.started = Some(Instant::now());
        Ok(())
    }

    fn current(&mut self) -> &mut StageRecord {
        self.stages.last_mut().expect("a stage is open")
    }

    fn name(&self) -> String {
        self.stages.last().map_or_else(|| "setup".into(), |s| s.name.clone())
    }

    /// External input, recorded under its role.
    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.current().inputs.push(FileRecord {
            path: role.to_string(),
            sha256,
        });
        Ok(())
    }

    /// Artifact of an earlier stage.
    fn artifact(&mut self, rel: &str) -> Result<()> {
        let sha256 = sha256_file(&self.out.join(rel))?;
        self.current().inputs.push(FileRecord {
            path: rel.to_string(),
            sha256,
        });
        Ok(())
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn output(&mut self, rel: &str) -> Result<()> {
        let sha256 = sha256_file(&self.out.join(rel))?;
        self.current().outputs.push(FileRecord {
            path: rel.to_string(),
            sha256,
        });
        Ok(())
    }

    fn stat(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        let v = serde_json::to_value(value)?;
        self.current().stats.insert(key.to_string(), v);
        Ok(())
    }

    fn end(&mut self) {
        let secs = self.started.take().map_or(0.0, |t| t.elapsed().as_secs_f64());
        let name = self.name();
        self.timings.push((name, secs));
    }
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    pub seconds: f64,
}

/// Runs every stage. On failure the outputs written so far are kept and a
/// `.partial` marker names the failing stage.
pub fn run_pipeline(cfg: &Config) -> Result<PipelineReport> {
    let start = Instant::now();
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    for stale in [PARTIAL, MANIFEST, TIMINGS] {
        let p = out.join(stale);
        if p.exists() {
            std::fs::remove_file(&p)?;
        }
    }
    let frames_dir = out.join("frames");
    if frames_dir.exists() {
        std::fs::remove_dir_all(&frames_dir)?;
    }
    let mut run = Run {
        out: out.clone(),
        stages: Vec::new(),
        timings: Vec::new(),
        started: None,
    };
    if let Err(e) = run_stages(cfg, &mut run) {
        let stage = run.name();
        let msg = format!("stage `{stage}` failed: {e:#}\n");
        std::fs::write(out.join(PARTIAL), &msg)?;
        return Err(e.context(format!("stage `{stage}` failed")));
    }
    let mut files: Vec<FileRecord> = run.stages.iter().flat_map(|s| s.outputs.iter().cloned()).collect();
    files.sort_by(|a, b| a.path.cmp(&b.path));
    files.dedup_by(|a, b| a.path == b.path);
    let manifest = Manifest {
        tool: "sketchrig".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        stages: run.stages,
        files,
    };
    let manifest_path = out.join(MANIFEST);
    std::fs::write(&manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
    let timings: BTreeMap<String, serde_json::Value> = [
        ("stages".to_string(), serde_json::to_value(&run.timings)?),
        ("total_seconds".to_string(), serde_json::to_value(start.elapsed().as_secs_f64())?),
    ]
    .into_iter()
    .collect();
    std::fs::write(out.join(TIMINGS), serde_json::to_vec_pretty(&timings)?)?;
    Ok(PipelineReport {
        manifest,
        manifest_path,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn run_stages(cfg: &Config, run: &mut Run) -> Result<()> {
    let i = &cfg.inputs;
    let drawing = read_image(&i.drawing).context("reading the drawing")?;
    let mask = read_mask(&i.mask).context("reading the foreground mask")?;
    if drawing.dims() != mask.dims() {
        bail!("drawing is {:?} but the mask is {:?}", drawing.dims(), mask.dims());
    }
    let proj = cfg.projection(mask.width(), mask.height());

    run.begin("inpaint-contour", cfg.inpaint)?;
    run.input("drawing", &i.drawing)?;
    run.input("mask", &i.mask)?;
    let contour = match &i.contour {
        Some(p) => {
            run.input("contour", p)?;
            Some(read_mask(p)?)
        }
        None => None,
    };
    let inpainted = stages::inpaint_contour(&drawing, &mask, contour.as_ref(), &cfg.inpaint)?;
    write_image(run.path("inpainted.png"), &inpainted)?;
    run.output("inpainted.png")?;
    run.end();

    let grid = match (&i.mesh, &i.sdf) {
        (Some(mesh_path), None) => {
            run.begin("mesh2sdf", cfg.volume)?;
            run.input("mesh", mesh_path)?;
            let mesh = read_mesh(mesh_path)?;
            let grid = mesh_to_sdf(&mesh, [cfg.volume.grid; 3], cfg.volume.padding)?;
            grid.save(run.path("volume.sdf"))?;
            run.output("volume.sdf")?;
            run.end();
            grid
        }
        (None, Some(sdf_path)) => SdfGrid::load(sdf_path)?,
        _ => bail!("exactly one of inputs.mesh and inputs.sdf must be given"),
    };

    run.begin("cut", serde_json::json!({ "half_width": cfg.half_width }))?;
    match &i.sdf {
        Some(p) => run.input("sdf", p)?,
        None => run.artifact("volume.sdf")?,
    }
    run.input("mask", &i.mask)?;
    let cut = cut_sdf(&grid, &mask, &proj)?;
    cut.save(run.path("cut.sdf"))?;
    run.output("cut.sdf")?;
    run.end();

    run.begin("extract", serde_json::json!({ "iso": 0.0 }))?;
    run.artifact("cut.sdf")?;
    let extracted = stages::extract(&cut)?;
    write_mesh(run.path("extracted.ply"), &extracted)?;
    run.output("extracted.ply")?;
    run.stat("vertices", extracted.vertex_count())?;
    run.end();

    run.begin("thin", cfg.thinning)?;
    run.artifact("extracted.ply")?;
    run.input("mask", &i.mask)?;
    let thinned = stages::thin(&extracted, &mask, &proj, &cfg.thinning)?;
    write_mesh(run.path("thinned.ply"), &thinned.mesh)?;
    run.output("thinned.ply")?;
    run.stat("fixed", thinned.regions.fixed.len())?;
    run.stat("moved", thinned.moved)?;
    run.stat("demoted", thinned.demoted)?;
    run.end();

    run.begin("smooth", cfg.smoothing)?;
    run.artifact("thinned.ply")?;
    let smoothed = stages::smooth(&thinned.mesh, &mask, &proj, &cfg.smoothing)?;
    write_mesh(run.path("smoothed.ply"), &smoothed)?;
    run.output("smoothed.ply")?;
    run.end();

    run.begin("bake-color", serde_json::json!({ "mirrored_back": i.back.is_none() }))?;
    run.artifact("smoothed.ply")?;
    run.artifact("inpainted.png")?;
    let back = match &i.back {
        Some(p) => {
            run.input("back", p)?;
            Some(read_image(p)?)
        }
        None => None,
    };
    let baked = stages::bake(&smoothed, &inpainted, back.as_ref(), &proj)?;
    write_mesh(run.path("colored.ply"), &baked.mesh)?;
    run.output("colored.ply")?;
    run.stat("uncolored", baked.uncolored)?;
    run.stat("diffusion_sweeps", baked.sweeps)?;
    run.end();

    run.begin("rig", cfg.skinning)?;
    run.artifact("colored.ply")?;
    run.input("keypoints", &i.keypoints)?;
    let kp = KeypointSet::load(&i.keypoints)?;
    let (skeleton, weights) = stages::rig(&baked.mesh, &kp, &proj, &cfg.skinning)?;
    let rigfile = RigFile::new(&skeleton, weights);
    rigfile.save(&run.path("rig.json"))?;
    run.output("rig.json")?;
    run.end();

    run.begin("retarget", serde_json::json!({ "name_map": i.name_map.is_some() }))?;
    run.input("motion", &i.motion)?;
    run.artifact("rig.json")?;
    let text = std::fs::read_to_string(&i.motion)?;
    let (source, clip) = parse_bvh(&text)?;
    let name_map = match &i.name_map {
        Some(p) => {
            run.input("name_map", p)?;
            Some(serde_json::from_slice::<BTreeMap<String, String>>(&std::fs::read(p)?)?)
        }
        None => None,
    };
    let motion = stages::retarget_clip(&clip, &source, &skeleton, name_map.as_ref())?;
    std::fs::write(run.path("retargeted.bvh"), serialize_bvh(&skeleton, &motion)?)?;
    run.output("retargeted.bvh")?;
    run.end();

    run.begin("guidance", cfg.render)?;
    run.artifact("colored.ply")?;
    run.artifact("rig.json")?;
    run.artifact("retargeted.bvh")?;
    let range = match cfg.render.frames {
        Some([a, b]) => a..b,
        None => 0..motion.len(),
    };
    let cam = stages::camera(cfg.render.view, cfg.render.resolution, cfg.half_width, &baked.mesh);
    let files = stages::guidance(
        &baked.mesh,
        &proj,
        &skeleton,
        &rigfile.weights,
        &motion,
        range,
        &cam,
        &cfg.render.canny,
        &run.path("frames"),
    )?;
    for f in files {
        let rel = f
            .strip_prefix(&run.out)
            .map_err(|_| anyhow!("frame file outside the output directory"))?
            .to_string_lossy()
            .replace('\\', "/");
        run.output(&rel)?;
    }
    run.end();
    Ok(())
}

/// Dry-run checks. An empty list means the config is runnable.
pub fn validate(cfg: &Config) -> Vec<String> {
    let mut problems = Vec::new();
    let i = &cfg.inputs;
    let mut required: Vec<(&str, &PathBuf)> = vec![
        ("drawing", &i.drawing),
        ("mask", &i.mask),
        ("keypoints", &i.keypoints),
        ("motion", &i.motion),
    ];
    for (role, p) in [
        ("contour", &i.contour),
        ("back", &i.back),
        ("mesh", &i.mesh),
        ("sdf", &i.sdf),
        ("name_map", &i.name_map),
    ] {
        if let Some(p) = p {
            required.push((role, p));
        }
    }
    for (role, p) in &required {
        if !p.is_file() {
            problems.push(format!("{role}: {} does not exist", p.display()));
        }
    }
    if i.mesh.is_some() == i.sdf.is_some() {
        problems.push("exactly one of inputs.mesh and inputs.sdf must be given".into());
    }
    let dims = |p: &Path| read_image(p).map(|img| img.dims());
    if let (Ok(d), Ok(m)) = (dims(&i.drawing), dims(&i.mask)) {
        if d != m {
            problems.push(format!("dimension mismatch: drawing {}x{} vs mask {}x{}", d.0, d.1, m.0, m.1));
        }
        for (role, p) in [("contour", &i.contour), ("back", &i.back)] {
            if let Some(Ok(o)) = p.as_ref().map(|p| dims(p)) {
                if o != m {
                    problems.push(format!("dimension mismatch: {role} {}x{} vs mask {}x{}", o.0, o.1, m.0, m.1));
                }
            }
        }
    } else if i.drawing.is_file() && i.mask.is_file() {
        problems.push("drawing or mask is not a readable image".into());
    }
    if i.keypoints.is_file() {
        if let Err(e) = KeypointSet::load(&i.keypoints) {
            problems.push(format!("keypoints: {e}"));
        }
    }
    if i.motion.is_file() {
        match std::fs::read_to_string(&i.motion) {
            Ok(t) => {
                if let Err(e) = parse_bvh(&t) {
                    problems.push(format!("motion: {e}"));
                }
            }
            Err(e) => problems.push(format!("motion: {e}")),
        }
    }
    if let Err(e) = cfg.thinning.validate() {
        problems.push(format!("thinning: {e}"));
    }
    if let Err(e) = cfg.render.canny.validate() {
        problems.push(format!("render.canny: {e}"));
    }
    if !(cfg.smoothing.strength > 0.0 && cfg.smoothing.strength <= 1.0) {
        problems.push(format!("smoothing.strength {} not in (0, 1]", cfg.smoothing.strength));
    }
    if cfg.volume.grid < 8 {
        problems.push(format!("volume.grid {} must be at least 8", cfg.volume.grid));
    }
    if cfg.render.resolution == 0 {
        problems.push("render.resolution must be positive".into());
    }
    if !(cfg.half_width > 0.0) {
        problems.push(format!("half_width {} must be positive", cfg.half_width));
    }
    problems
}
