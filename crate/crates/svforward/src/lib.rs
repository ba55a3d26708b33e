//! Low-rank shift-variant forward model for the nine-lens system: geometry
//! bookkeeping, synthetic PSF bases, the per-lens forward operator with its
//! brute-force oracle, and sensor multiplexing.

pub mod basis;
pub mod forward;
pub mod geometry;

pub use basis::{synth_basis, BasisConfig, SvBasis};
pub use forward::{multiplex, reconstruct_local_psf, second_moment, sv_forward, sv_forward_bruteforce};
pub use geometry::{grid_chief_rays, Geometry, NUM_LENSES};
