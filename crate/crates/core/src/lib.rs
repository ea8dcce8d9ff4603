//! Geometry and loss kernels for two-stage point-cloud completion.
//!
//! * [`chamfer`]: Chamfer distance.
//! * [`emd`]: Earth Mover's Distance, exact (Hungarian) and approximate
//!   (auction with O(n) auxiliary memory).
//! * [`expansion`]: the MST-based expansion penalty and its subgradient.
//! * [`sampling`]: minimum density sampling plus FPS and Poisson-disk
//!   baselines.
//! * [`pipeline`]: merging a coarse prediction with its input and the joint
//!   training loss.

pub mod chamfer;
pub mod cli;
pub mod emd;
pub mod error;
pub mod expansion;
pub mod generate;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod sampling;
pub mod spatial;

pub use error::{Error, Result};
pub use geometry::{Aabb, LabeledPointCloud, Point3, PointCloud, Seed, Source};
