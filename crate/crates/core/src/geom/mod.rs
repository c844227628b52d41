//! Euclidean geometry and Gaussian algebra on small dimensions (n ≤ 3).
//!
//! Everything here is a pure function on immutable inputs; all operations are
//! safe to call concurrently. Points live in unit-cube-normalized coordinates
//! and distances are *squared* Euclidean throughout.

mod body;
mod gaussian;
mod point;
mod rotation;
mod segment;

pub use body::{contact, contact_entry, point_body_distance, Body, BodyPose};
pub use gaussian::{
    kl_gaussian, nll_gaussian, principal_axes, LatentGaussian, PrincipalAxes, TriFactor,
};
pub use point::PointN;
pub use rotation::Rotation;
pub use segment::{closest_param, dist_point_segment, OpenSegment};

use thiserror::Error;

/// Maximum supported ambient dimension.
pub const MAX_DIM: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum GeomError {
    #[error("segment is degenerate (zero displacement)")]
    DegenerateSegment,
    #[error("dimension {0} outside supported range 1..=3")]
    InvalidDimension(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("{0}")]
    InvalidBody(String),
}
