//! Pointwise Weitzenböck curvature algebra, sectional-curvature pinching,
//! Feynman–Kac estimators on model manifolds, and combinatorial Hodge
//! spectra.
//!
//! Module map:
//!
//! - [`multiindex`]: wedge-basis combinatorics and the overlap matrices.
//! - [`curvature`]: algebraic curvature tensors, sectional and Ricci curvature.
//! - [`weitzenbock`]: the operator `ℛ^p` on `p`-covectors, Hodge star.
//! - [`pinching`]: sectional sums over frames and the pinching criterion.
//! - [`stochastic`]: Brownian motion, Feynman–Kac and decay-rate estimators.
//! - [`hodge`]: boundary matrices, Hodge Laplacians and spectral gaps.

pub mod curvature;
pub mod error;
pub mod hodge;
pub mod linalg;
pub mod multiindex;
pub mod pinching;
pub mod rng;
pub mod stochastic;
pub mod weitzenbock;

pub use error::{Error, Result};
