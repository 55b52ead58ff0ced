use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sketchrig_core::deform::HandleParams;
use sketchrig_core::meshio::{read_mesh, write_mesh};
use sketchrig_core::raster::io::{read_image, read_mask, write_image, write_image16, write_mask};
use sketchrig_core::raster::CannyParams;
use sketchrig_core::render::{rasterize, View};
use sketchrig_core::rig::{apply_pose_lbs, parse_bvh, serialize_bvh, KeypointSet};
use sketchrig_core::volume::{cut_sdf, mesh_to_sdf, FrontProjection, SdfGrid};
use sketchrig_cli::config::{Config, InpaintConfig, SkinConfig, SmoothConfig};
use sketchrig_cli::fixture::write_fixture;
use sketchrig_cli::pipeline::{run_pipeline, validate};
use sketchrig_cli::rigfile::RigFile;
use sketchrig_cli::stages;

#[derive(Parser)]
#[command(name = "sketchrig", version, about = "Turn a character drawing into posed 3D guidance renders")]
struct Cli {
    /// Worker threads; overrides SKETCHRIG_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved. Every stage is deterministic, so the value is ignored.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Frame {
    /// Model units from the image center to its left/right edge.
    #[arg(long, default_value_t = 1.0)]
    half_width: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Remove outline strokes from the drawing.
    InpaintContour {
        #[arg(long)]
        drawing: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        contour: Option<PathBuf>,
        #[arg(long, default_value_t = InpaintConfig::default().radius)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Signed distance grid of a closed mesh.
    Mesh2sdf {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 128)]
        grid: usize,
        #[arg(long, default_value_t = 2)]
        padding: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Carve the grid to the silhouette.
    Cut {
        #[arg(long)]
        sdf: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[command(flatten)]
        frame: Frame,
        #[arg(long)]
        out: PathBuf,
    },
    /// Zero level set of a grid as a mesh.
    Extract {
        #[arg(long)]
        sdf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pull thin limbs toward their medial axis.
    Thin {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = HandleParams::default().theta1)]
        theta1: f64,
        #[arg(long, default_value_t = HandleParams::default().theta2)]
        theta2: f64,
        #[arg(long, default_value_t = HandleParams::default().guard)]
        guard: f64,
        #[arg(long, default_value_t = HandleParams::default().snap)]
        snap: f64,
        #[command(flatten)]
        frame: Frame,
        #[arg(long)]
        out: PathBuf,
    },
    /// Laplacian smoothing away from the silhouette.
    Smooth {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = SmoothConfig::default().iterations)]
        iterations: usize,
        #[arg(long, default_value_t = SmoothConfig::default().strength)]
        strength: f64,
        #[arg(long, default_value_t = SmoothConfig::default().guard)]
        guard: f64,
        #[command(flatten)]
        frame: Frame,
        #[arg(long)]
        out: PathBuf,
    },
    /// Color the mesh from the front and back images.
    BakeColor {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        front: PathBuf,
        /// Defaults to the mirrored front image.
        #[arg(long)]
        back: Option<PathBuf>,
        #[command(flatten)]
        frame: Frame,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a skeleton from 2D keypoints and compute skin weights.
    Rig {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        keypoints: PathBuf,
        #[arg(long, default_value_t = SkinConfig::default().power)]
        power: f64,
        #[arg(long, default_value_t = SkinConfig::default().max_bones)]
        max_bones: usize,
        #[command(flatten)]
        frame: Frame,
        #[arg(long)]
        out: PathBuf,
    },
    /// Map a BVH clip onto a rig's skeleton.
    Retarget {
        #[arg(long)]
        motion: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        /// JSON object `{target joint: source joint}`.
        #[arg(long)]
        name_map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rasterize a mesh, optionally posed, to color/mask/depth images.
    Render {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value = "front")]
        view: View,
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        #[arg(long, requires = "motion")]
        rig: Option<PathBuf>,
        #[arg(long, requires = "rig")]
        motion: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        frame_index: usize,
        #[command(flatten)]
        frame: Frame,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write per-frame guidance layers for a rigged mesh and a clip.
    Guidance {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        rig: PathBuf,
        #[arg(long)]
        motion: PathBuf,
        /// Image whose size defines the rest coordinates (usually the drawing).
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value = "front")]
        view: View,
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        /// `a..b`; all frames when absent.
        #[arg(long)]
        frames: Option<String>,
        #[command(flatten)]
        frame: Frame,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run every stage from a config file.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a config without running it. Exits 1 when problems are found.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the synthetic biped inputs and a config.
    Fixture {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("SKETCHRIG_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let _ = cli.seed;
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn projection_for(path: &Path, half_width: f64) -> Result<FrontProjection> {
    let img = read_image(path)?;
    Ok(FrontProjection::centered(img.width(), img.height(), half_width))
}

fn load_motion(path: &Path) -> Result<(sketchrig_core::rig::Skeleton, sketchrig_core::rig::MotionClip)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_bvh(&text)?)
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::InpaintContour {
            drawing,
            mask,
            contour,
            radius,
            out,
        } => {
            let cfg = InpaintConfig {
                radius,
                ..Default::default()
            };
            let contour = contour.map(read_mask).transpose()?;
            let img = stages::inpaint_contour(&read_image(&drawing)?, &read_mask(&mask)?, contour.as_ref(), &cfg)?;
            write_image(&out, &img)?;
        }
        Command::Mesh2sdf {
            mesh,
            grid,
            padding,
            out,
        } => {
            let g = mesh_to_sdf(&read_mesh(&mesh)?, [grid; 3], padding)?;
            g.save(&out)?;
        }
        Command::Cut { sdf, mask, frame, out } => {
            let mask = read_mask(&mask)?;
            let proj = FrontProjection::centered(mask.width(), mask.height(), frame.half_width);
            cut_sdf(&SdfGrid::load(&sdf)?, &mask, &proj)?.save(&out)?;
        }
        Command::Extract { sdf, out } => {
            write_mesh(&out, &stages::extract(&SdfGrid::load(&sdf)?)?)?;
        }
        Command::Thin {
            mesh,
            mask,
            theta1,
            theta2,
            guard,
            snap,
            frame,
            out,
        } => {
            let mask = read_mask(&mask)?;
            let proj = FrontProjection::centered(mask.width(), mask.height(), frame.half_width);
            let params = HandleParams {
                theta1,
                theta2,
                guard,
                snap,
            };
            let r = stages::thin(&read_mesh(&mesh)?, &mask, &proj, &params)?;
            write_mesh(&out, &r.mesh)?;
            eprintln!(
                "fixed {} moved {} demoted {} residual {:.2e}",
                r.regions.fixed.len(),
                r.moved,
                r.demoted,
                r.residual
            );
        }
        Command::Smooth {
            mesh,
            mask,
            iterations,
            strength,
            guard,
            frame,
            out,
        } => {
            let mask = read_mask(&mask)?;
            let proj = FrontProjection::centered(mask.width(), mask.height(), frame.half_width);
            let cfg = SmoothConfig {
                iterations,
                strength,
                guard,
            };
            write_mesh(&out, &stages::smooth(&read_mesh(&mesh)?, &mask, &proj, &cfg)?)?;
        }
        Command::BakeColor {
            mesh,
            front,
            back,
            frame,
            out,
        } => {
            let front_img = read_image(&front)?;
            let proj = FrontProjection::centered(front_img.width(), front_img.height(), frame.half_width);
            let back = back.map(read_image).transpose()?;
            let baked = stages::bake(&read_mesh(&mesh)?, &front_img, back.as_ref(), &proj)?;
            write_mesh(&out, &baked.mesh)?;
            eprintln!("uncolored {} sweeps {}", baked.uncolored, baked.sweeps);
        }
        Command::Rig {
            mesh,
            keypoints,
            power,
            max_bones,
            frame,
            out,
        } => {
            let kp = KeypointSet::load(&keypoints)?;
            let [w, h] = kp.image_size;
            let proj = FrontProjection::centered(w, h, frame.half_width);
            let cfg = SkinConfig { power, max_bones };
            let (skeleton, weights) = stages::rig(&read_mesh(&mesh)?, &kp, &proj, &cfg)?;
            RigFile::new(&skeleton, weights).save(&out)?;
        }
        Command::Retarget {
            motion,
            rig,
            name_map,
            out,
        } => {
            let (source, clip) = load_motion(&motion)?;
            let target = RigFile::load(&rig)?.skeleton()?;
            let map = name_map
                .map(|p| -> Result<_> { Ok(serde_json::from_slice(&std::fs::read(p)?)?) })
                .transpose()?;
            let clip = stages::retarget_clip(&clip, &source, &target, map.as_ref())?;
            std::fs::write(&out, serialize_bvh(&target, &clip)?)?;
        }
        Command::Render {
            mesh,
            view,
            resolution,
            rig,
            motion,
            frame_index,
            frame,
            out_dir,
        } => {
            let mut mesh = read_mesh(&mesh)?;
            let cam = stages::camera(view, resolution, frame.half_width, &mesh);
            if let (Some(rig), Some(motion)) = (rig, motion) {
                let rig = RigFile::load(&rig)?;
                let skeleton = rig.skeleton()?;
                let (_, clip) = load_motion(&motion)?;
                let pose = clip
                    .frames
                    .get(frame_index)
                    .with_context(|| format!("frame {frame_index} outside the clip's {} frames", clip.len()))?;
                mesh = apply_pose_lbs(&mesh, &skeleton, &rig.weights, pose)?;
            }
            let f = rasterize(&mesh, &cam)?;
            std::fs::create_dir_all(&out_dir)?;
            write_image(out_dir.join("color.png"), &f.color)?;
            write_mask(out_dir.join("mask.png"), &f.mask)?;
            write_image16(out_dir.join("depth.png"), &f.normalized_depth())?;
        }
        Command::Guidance {
            mesh,
            rig,
            motion,
            reference,
            view,
            resolution,
            frames,
            frame,
            out_dir,
        } => {
            let mesh = read_mesh(&mesh)?;
            let rig = RigFile::load(&rig)?;
            let skeleton = rig.skeleton()?;
            let (_, clip) = load_motion(&motion)?;
            let range = match frames {
                Some(s) => stages::parse_range(&s)?,
                None => 0..clip.len(),
            };
            let proj = projection_for(&reference, frame.half_width)?;
            let cam = stages::camera(view, resolution, frame.half_width, &mesh);
            let written = stages::guidance(
                &mesh,
                &proj,
                &skeleton,
                &rig.weights,
                &clip,
                range,
                &cam,
                &CannyParams::default(),
                &out_dir,
            )?;
            eprintln!("wrote {} files", written.len());
        }
        Command::Pipeline { config } => {
            let cfg = Config::load(&config)?;
            let report = run_pipeline(&cfg)?;
            println!(
                "{} stages, {} files, {:.1}s -> {}",
                report.manifest.stages.len(),
                report.manifest.files.len(),
                report.seconds,
                report.manifest_path.display()
            );
        }
        Command::Validate { config } => {
            let cfg = Config::load(&config)?;
            let problems = validate(&cfg);
            if problems.is_empty() {
                println!("ok");
            } else {
                for p in &problems {
                    println!("{p}");
                }
                return Ok(ExitCode::from(1));
            }
        }
        Command::Fixture { out_dir } => {
            let (path, _) = write_fixture(&out_dir)?;
            println!("{}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}
