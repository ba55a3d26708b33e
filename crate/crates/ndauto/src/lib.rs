//! Dense array arithmetic with reverse-mode differentiation.
//!
//! Everything needed to train small convolutional networks on the CPU:
//! a flat row-major [`Array`], raw compute kernels, a per-forward-pass
//! [`Tape`] with backward rules for each primitive, a finite-difference
//! [`gradient_check`], and the `SVC1` array container used by every artifact
//! on disk.

pub mod array;
pub mod check;
pub mod container;
pub mod error;
pub mod fft;
pub mod kernels;
pub mod params;
pub mod tape;

pub use array::{rel_l2, Array, Precision};
pub use check::gradient_check;
pub use error::{Error, Result};
pub use fft::fft_conv2d_same;
pub use params::{ParamGrads, ParamId, ParamStore, Parameter};
pub use tape::{NodeId, Tape};
