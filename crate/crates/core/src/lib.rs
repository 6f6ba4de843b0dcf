//! Analysis and simulation of one-dimensional diffusions with degenerate
//! coefficients.
//!
//! The crate classifies the boundary points of a diffusion
//! `dX = b(X) dt + σ(X) dW` through its scale function and speed measure,
//! checks Lyapunov criteria on grids, and runs the decreasing-step Euler
//! scheme together with weighted empirical measures.

// `!(x > 0.0)` style guards reject NaN along with the failing range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descriptor;
pub mod euler;
pub mod feller;
pub mod lyapunov;
pub mod measures;
pub mod model;
pub mod quadrature;
pub mod vdp2d;

pub use model::{DiffusionSpec, Interval, ModelError, PowerLawProfile};
pub use quadrature::{
    improper_limit, integrate, limit_at_boundary, ImproperVerdict, LimitKind, LimitPolicy, QuadError,
};
