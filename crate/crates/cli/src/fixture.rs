//! Writes the synthetic biped and a runnable config to a directory.

use std::path::{Path, PathBuf};

use anyhow::Result;
use sketchrig_core::fixtures::{biped, Biped};
use sketchrig_core::meshio::write_mesh;
use sketchrig_core::raster::io::{write_image, write_mask};

/// Grid samples along the longest side of the coarse mesh.
pub const COARSE_RESOLUTION: usize = 96;

/// Writes the fixture inputs and `config.json`; returns the config path and
/// the in-memory fixture.
pub fn write_fixture(dir: &Path) -> Result<(PathBuf, Biped)> {
    std::fs::create_dir_all(dir)?;
    let b = biped(COARSE_RESOLUTION)?;
    write_image(dir.join("drawing.png"), &b.drawing)?;
    write_mask(dir.join("mask.png"), &b.mask)?;
    write_mask(dir.join("contour.png"), &b.contour)?;
    std::fs::write(dir.join("keypoints.json"), serde_json::to_vec_pretty(&b.keypoints)?)?;
    std::fs::write(dir.join("wave.bvh"), &b.motion)?;
    write_mesh(dir.join("coarse.ply"), &b.coarse)?;
    let config = serde_json::json!({
        "inputs": {
            "drawing": "drawing.png",
            "mask": "mask.png",
            "contour": "contour.png",
            "mesh": "coarse.ply",
            "keypoints": "keypoints.json",
            "motion": "wave.bvh"
        },
        "output_dir": "out"
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&config)?)?;
    Ok((path, b))
}
