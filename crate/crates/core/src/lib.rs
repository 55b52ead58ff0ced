// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deform;
pub mod error;
pub mod fixtures;
pub mod inpaint;
pub mod mesh;
pub mod meshio;
pub mod raster;
pub mod render;
pub mod rig;
pub mod texture;
pub mod volume;

pub use error::{Error, Result};
pub use mesh::{Aabb, Point, TriMesh, Vec3};
