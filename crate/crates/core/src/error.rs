use thiserror::Error;

use crate::rig::bvh::BvhError;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-sized raster {width}x{height}")]
    ZeroSize { width: usize, height: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate mask: {0}")]
    DegenerateMask(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("inpainting mask covers the whole image, nothing to propagate from")]
    NoKnownPixels,

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("connected component {component} (contains vertex {vertex}) has no handle vertex")]
    UnconstrainedComponent { component: usize, vertex: usize },

    #[error("connected component {component} (contains vertex {vertex}) has no colored vertex")]
    UncoloredComponent { component: usize, vertex: usize },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("view ray through keypoint `{0}` misses the mesh")]
    KeypointMiss(String),

    #[error("invalid keypoints: {0}")]
    Keypoints(String),

    #[error("rig: {0}")]
    Rig(String),

    #[error("format: {0}")]
    Format(String),

    #[error(transparent)]
    Bvh(#[from] BvhError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
