//! Tool-path interpolation and minimum-jerk trajectory generation for a
//! four-axis (3T1R) parallel milling robot.

// `!(x > 0.0)` rejects NaN; index loops mirror the matrix notation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bspline;
pub mod datasets;
pub mod engine;
pub mod error;
pub mod io;
pub mod jet;
pub mod kinematics;
pub mod linalg;
pub mod minjerk;
pub mod modifier;
pub mod optim;
pub mod quadrature;
pub mod quat;
pub mod sync;
pub mod waypoints;

pub use error::{Error, Result};
