//! Sparse wavelet-domain approximation of spatially varying blur operators.
//!
//! A blur `H` with a spatially varying point spread function is expressed in
//! an orthonormal wavelet basis as `H = W^T Theta W`, where `W` is the forward
//! transform. `Theta` is nearly sparse, so keeping a small number of its
//! entries (by magnitude, or on a pattern fixed in advance) gives a fast and
//! accurate surrogate for `H`. The surrogate drives a TV-constrained
//! restoration solver.

pub mod bench;
pub mod error;
pub mod image;
pub mod kernel;
pub mod kv;
pub mod pattern;
pub mod restore;
pub mod sparse;
pub mod theta;
pub mod wavelet;

pub use error::{Error, ErrorClass, Result};
pub use image::{add_noise, load_image, save_image, snr_db, Image, ImageFormat, NoiseModel};
pub use kernel::{ExactOperator, KernelKind, KernelSpec};
pub use pattern::{NeighborhoodSpec, PatternMask};
pub use restore::{restore, RestoreResult, SolverConfig};
pub use sparse::CsrMatrix;
pub use theta::{SparseTheta, ThetaOperator};
pub use wavelet::{Layout, Orientation, SubbandIndex, WaveletCoeffs, WaveletFamily};
