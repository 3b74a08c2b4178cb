//! Numerical potential theory for cusp domains.
//!
//! The crate collects the pieces needed to study negative subharmonic
//! functions near a cusp `{x > C|y|^α}`: the explicit conformal map that
//! flattens the cusp, a barrier built from a model profile, Green-function
//! solvers with error bars, the Hopf-type lower bound, the exhaustion
//! recursion with its patching simulation, and Newtonian capacities of
//! dyadic shells for the Wiener test.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod capacity;
pub mod conformal;
pub mod error;
pub mod exhaustion;
pub mod fit;
pub mod geometry;
pub mod green;
pub mod hopf;
pub mod linalg;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{CuspFrame, CuspParams, PlanarDomain};
pub use num_complex::Complex64;
