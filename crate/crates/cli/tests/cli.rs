use std::path::Path;
use std::process::{Command, Output};

use sketchrig_cli::config::Config;
use sketchrig_cli::fixture::write_fixture;
use sketchrig_cli::pipeline::{run_pipeline, validate, PARTIAL};

fn sketchrig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sketchrig"))
        .args(args)
        .env("SKETCHRIG_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(sketchrig(&["cut", "--bogus"]).status.code(), Some(2));
    assert_eq!(sketchrig(&["render", "--mesh", "m.ply", "--view", "sideways", "--out-dir", "x"]).status.code(), Some(2));
}

#[test]
fn validate_reports_problems_and_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = write_fixture(dir.path()).unwrap();
    let ok = sketchrig(&["validate", "--config", s(&config)]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));

    let mut cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(&config).unwrap()).unwrap();
    cfg["inputs"]["motion"] = "missing.bvh".into();
    cfg["thinning"] = serde_json::json!({ "theta1": 4.0, "theta2": 6.0 });
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, serde_json::to_vec(&cfg).unwrap()).unwrap();
    let out = sketchrig(&["validate", "--config", s(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("missing.bvh"), "{text}");
    assert!(text.contains("theta1"), "{text}");

    // unknown keys are rejected when loading
    cfg["thinning"] = serde_json::json!({ "theta3": 1.0 });
    std::fs::write(&broken, serde_json::to_vec(&cfg).unwrap()).unwrap();
    assert!(Config::load(&broken).is_err());
}

#[test]
fn dimension_mismatch_is_a_validation_problem() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = write_fixture(dir.path()).unwrap();
    let small = sketchrig_core::raster::BinaryMask::filled(16, 16, true);
    sketchrig_core::raster::io::write_mask(dir.path().join("mask.png"), &small).unwrap();
    let problems = validate(&Config::load(&config).unwrap());
    assert!(problems.iter().any(|p| p.contains("dimension mismatch")), "{problems:?}");
}

#[test]
fn failing_stage_leaves_partial_marker() {
    let dir = tempfile::tempdir().unwrap();
    let (config, _) = write_fixture(dir.path()).unwrap();
    std::fs::write(dir.path().join("coarse.ply"), b"not a mesh").unwrap();
    let cfg = Config::load(&config).unwrap();
    let err = run_pipeline(&cfg).unwrap_err();
    assert!(format!("{err:#}").contains("mesh2sdf"), "{err:#}");
    let marker = std::fs::read_to_string(cfg.output_dir.join(PARTIAL)).unwrap();
    assert!(marker.contains("mesh2sdf"), "{marker}");
    assert!(cfg.output_dir.join("inpainted.png").is_file());
    assert!(!cfg.output_dir.join("manifest.json").exists());
}

#[test]
fn stages_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_fixture(d).unwrap();
    let p = |n: &str| d.join(n).to_str().unwrap().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["inpaint-contour", "--drawing", &p("drawing.png"), "--mask", &p("mask.png"), "--contour", &p("contour.png"), "--out", &p("inpainted.png")],
        vec!["mesh2sdf", "--mesh", &p("coarse.ply"), "--grid", "64", "--out", &p("v.sdf")],
        vec!["cut", "--sdf", &p("v.sdf"), "--mask", &p("mask.png"), "--out", &p("c.sdf")],
        vec!["extract", "--sdf", &p("c.sdf"), "--out", &p("e.ply")],
        vec!["thin", "--mesh", &p("e.ply"), "--mask", &p("mask.png"), "--out", &p("t.ply")],
        vec!["smooth", "--mesh", &p("t.ply"), "--mask", &p("mask.png"), "--out", &p("s.ply")],
        vec!["bake-color", "--mesh", &p("s.ply"), "--front", &p("inpainted.png"), "--out", &p("colored.ply")],
        vec!["rig", "--mesh", &p("colored.ply"), "--keypoints", &p("keypoints.json"), "--out", &p("rig.json")],
        vec!["retarget", "--motion", &p("wave.bvh"), "--rig", &p("rig.json"), "--out", &p("r.bvh")],
        vec!["render", "--mesh", &p("colored.ply"), "--view", "free:40,10", "--resolution", "128", "--rig", &p("rig.json"), "--motion", &p("r.bvh"), "--frame-index", "5", "--out-dir", &p("still")],
        vec!["guidance", "--mesh", &p("colored.ply"), "--rig", &p("rig.json"), "--motion", &p("r.bvh"), "--reference", &p("drawing.png"), "--resolution", "128", "--frames", "3..5", "--out-dir", &p("frames")],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    for args in &steps {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = sketchrig(&refs);
        assert!(out.status.success(), "{}: {}", args[0], String::from_utf8_lossy(&out.stderr));
    }
    for f in ["still/color.png", "still/depth.png", "frames/0003/pos.png", "frames/0004/edge.png"] {
        assert!(d.join(f).is_file(), "{f}");
    }
    assert!(!d.join("frames/0005").exists());
    let img = sketchrig_core::raster::io::read_image(d.join("frames/0003/color.png")).unwrap();
    assert_eq!(img.dims(), (128, 128));
}
