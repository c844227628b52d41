use super::{GeomError, PointN};

/// The open segment swept by an action: `{start + t·delta : 0 < t < 1}`.
///
/// `delta` may be zero; the degenerate segment collapses to the single point
/// `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenSegment {
    pub start: PointN,
    pub delta: PointN,
}

impl OpenSegment {
    pub fn new(start: PointN, delta: PointN) -> Self {
        debug_assert_eq!(start.dim(), delta.dim());
        Self { start, delta }
    }

    pub fn from_endpoints(start: PointN, end: PointN) -> Self {
        Self::new(start, end.sub(&start))
    }

    pub fn end(&self) -> PointN {
        self.start.add(&self.delta)
    }

    pub fn point_at(&self, t: f64) -> PointN {
        self.start.add(&self.delta.scale(t))
    }

    pub fn is_degenerate(&self) -> bool {
        self.delta.is_zero()
    }
}

/// Parameter t* ∈ [0, 1] of the point on the closed hull of `seg` closest to
/// `p`: `clamp(⟨p − start, delta⟩ / ⟨delta, delta⟩, 0, 1)`.
pub fn closest_param(p: &PointN, seg: &OpenSegment) -> Result<f64, GeomError> {
    if seg.is_degenerate() {
        return Err(GeomError::DegenerateSegment);
    }
    let t = p.sub(&seg.start).dot(&seg.delta) / seg.delta.norm_sq();
    Ok(t.clamp(0.0, 1.0))
}

/// Squared Euclidean distance from `p` to the open segment.
///
/// The infimum over the open segment equals the infimum over its closure, so
/// this is the squared distance to the closed hull. A degenerate segment
/// yields the squared distance to `start`.
pub fn dist_point_segment(p: &PointN, seg: &OpenSegment) -> f64 {
    let t = match closest_param(p, seg) {
        Ok(t) => t,
        Err(_) => return p.dist_sq(&seg.start),
    };
    p.dist_sq(&seg.point_at(t))
}
