//! Skeleton-guided thinning of limb-like parts: handle selection from the
//! drawing's masks, mid-depth displacements, bi-harmonic propagation and
//! post smoothing.

mod biharmonic;
mod handles;
mod refine;
mod smooth;
pub mod sparse;
mod thinning;

pub use biharmonic::{biharmonic_deform, biharmonic_displacements, BiharmonicSolution, HandleSet};
pub use handles::{select_handles, HandleParams, HandleRegions};
pub use refine::{interior_region, thin_limbs, ThinResult};
pub use smooth::laplacian_smooth;
pub use thinning::{mid_depth, thinning_displacements, thinning_offset, Thinning};
