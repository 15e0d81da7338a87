// Indexed loops over tensor slots are the clearest form for the index
// gymnastics below; negated comparisons are deliberate NaN guards.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

//! warprig: hypersurface geometry and rigidity experiments in warped
//! product spaces `(I x S^n, f(r)^-2 dr^2 + r^2 dsigma)`.
//!
//! The toolkit evaluates the full first/second/third-order geometry of
//! star-shaped immersed hypersurfaces with exact truncated-Taylor (jet)
//! arithmetic, verifies the classical identity chain (support-function,
//! Gauss, Codazzi, and their linearizations) to machine precision, and runs
//! rigidity experiments: SVD kernels of the linearized isometric-embedding
//! operator, sign-definite integral functionals with an auxiliary weight
//! ODE, and optimization-based searches for isometric same-curvature
//! companions.

pub mod ambient;
pub mod error;
pub mod geometry;
pub mod jet;
pub mod rigidity;
pub mod search;
pub mod sphere;
pub mod verify;
pub mod weight;

pub mod cli;
pub mod config;
pub mod report;

pub use error::{Error, Result};
