//! Continuous-time trajectory estimation on an SE(3) B-spline, fusing IMU,
//! visual-feature, and UWB range measurements in a sliding-window factor graph.
//!
//! The pipeline has three layers:
//!
//! * a trajectory layer ([`geometry`], [`spline`]) representing the pose as a
//!   uniform cubic B-spline (plain basis for translation, cumulative basis on
//!   SO(3) for rotation) with analytic derivatives,
//! * a measurement layer ([`sim`], [`ranging`], [`factors`]) that synthesizes
//!   or ingests sensor streams, gates range outliers with a median/MAD test,
//!   builds virtual anchors from short motion-range windows, and turns every
//!   measurement into a whitened residual factor,
//! * an estimation layer ([`solver`], [`eval`], [`io`], [`config`]) that
//!   minimizes the stacked factors per sliding window with Levenberg-Marquardt
//!   and scores the result against ground truth (ATE RMSE after rigid
//!   alignment).
//!
//! See the crate `examples/` directory for one runnable program per
//! capability, and the `splinefuse` binary for the `simulate`/`run`/`eval`/
//! `sweep` command-line entry points.

pub mod config;
pub mod error;
pub mod eval;
pub mod factors;
pub mod geometry;
pub mod io;
pub mod ranging;
pub mod sim;
pub mod solver;
pub mod spline;

pub use error::{Error, Result};
