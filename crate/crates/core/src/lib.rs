//! Mixed-derivative total variation (MTV) for pixel-based inverse problems.
//!
//! The regularizer is the convex combination
//! `θ‖[D⊗D]f‖ + (1−θ)‖∇f‖` of the mixed-derivative measure norm and the
//! anisotropic total variation. For piecewise-constant functions on a dyadic
//! pixel grid both terms are computed exactly from three small difference
//! filters, so the discrete problems solved here carry no discretization
//! error.
//!
//! Modules:
//! - [`grid`]: pixel images, synthesis/analysis, refinement.
//! - [`norms`]: difference filters, the exact θ-norm and corner measures.
//! - [`operators`]: measurement and downsampling operators, the denoising
//!   objective, noise and PSNR.
//! - [`verify`]: executable coarea/cocorner and level-set identities.
//! - [`solvers`]: dual accelerated proximal gradient, primal-dual, and a
//!   projected-subgradient reference oracle, plus parameter sweeps.
//! - [`io`]: PGM/PNG images and CSV reports.
//! - [`bench`]: TV-versus-MTV PSNR benchmark with parameter tuning.
//! - [`synth`]: seeded synthetic piecewise-constant test images.
//! - [`checks`]: the invariant suite driven by `mtv verify`.

pub mod bench;
pub mod checks;
pub mod error;
pub mod grid;
pub mod io;
pub mod norms;
pub mod operators;
pub mod solvers;
pub mod synth;
pub mod verify;

pub use error::{MtvError, Result};
pub use grid::{GridLevel, PiecewiseConstantFn, PixelImage};
pub use norms::{AtomicMeasure, FilterBank, Kernel};
pub use operators::{DenoiseProblem, MeasurementOp};
