use super::{GeomError, OpenSegment, PointN, Rotation};

/// The physical extent of the interactable object.
#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    /// A material point; contact is mediated by the `eps` shell alone.
    Point,
    Disc { radius: f64 },
    /// An oriented box with per-axis half extents.
    Box { half_extents: PointN },
}

impl Body {
    pub fn validate(&self) -> Result<(), GeomError> {
        match self {
            Body::Point => Ok(()),
            Body::Disc { radius } => {
                if *radius > 0.0 && radius.is_finite() {
                    Ok(())
                } else {
                    Err(GeomError::InvalidBody(format!(
                        "disc radius must be strictly positive, got {radius}"
                    )))
                }
            }
            Body::Box { half_extents } => {
                if half_extents.as_slice().iter().all(|&h| h > 0.0) {
                    Ok(())
                } else {
                    Err(GeomError::InvalidBody(
                        "box half-extents must be strictly positive".into(),
                    ))
                }
            }
        }
    }

    /// Radius of the smallest ball containing the body.
    pub fn circumradius(&self) -> f64 {
        match self {
            Body::Point => 0.0,
            Body::Disc { radius } => *radius,
            Body::Box { half_extents } => half_extents.norm(),
        }
    }
}

/// A body placed in the world: center plus orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyPose {
    pub center: PointN,
    pub orient: Rotation,
}

impl BodyPose {
    pub fn new(center: PointN, orient: Rotation) -> Self {
        Self { center, orient }
    }

    pub fn axis_aligned(center: PointN) -> Self {
        let dim = center.dim();
        Self {
            center,
            orient: Rotation::identity(dim),
        }
    }
}

/// Euclidean distance from `p` to the body surface; zero inside the body.
pub fn point_body_distance(body: &Body, pose: &BodyPose, p: &PointN) -> f64 {
    match body {
        Body::Point => p.dist_sq(&pose.center).sqrt(),
        Body::Disc { radius } => (p.dist_sq(&pose.center).sqrt() - radius).max(0.0),
        Body::Box { half_extents } => {
            let local = pose.orient.apply_inverse(&p.sub(&pose.center));
            let mut acc = 0.0;
            for i in 0..local.dim() {
                let excess = (local.get(i).abs() - half_extents.get(i)).max(0.0);
                acc += excess * excess;
            }
            acc.sqrt()
        }
    }
}

/// Does the open segment touch the body (inflated by `eps`)?
///
/// Witness parameters are computed on the closed hull and then required to
/// intersect the open interval (0, 1), so endpoint-only grazing does not
/// count as contact.
pub fn contact(body: &Body, pose: &BodyPose, seg: &OpenSegment, eps: f64) -> bool {
    contact_entry(body, pose, seg, eps).is_some()
}

/// Earliest parameter `t ∈ [0, 1]` at which the segment touches the
/// (eps-inflated) body, provided the touch interval meets (0, 1).
pub fn contact_entry(body: &Body, pose: &BodyPose, seg: &OpenSegment, eps: f64) -> Option<f64> {
    let interval = match body {
        Body::Point => sphere_interval(&pose.center, seg, eps),
        Body::Disc { radius } => sphere_interval(&pose.center, seg, radius + eps),
        Body::Box { half_extents } => {
            if eps == 0.0 {
                box_slab_interval(half_extents, pose, seg)
            } else {
                convex_sublevel_interval(seg, eps, |p| point_body_distance(body, pose, p))
            }
        }
    };
    let (lo, hi) = interval?;
    // Intersection of [lo, hi] with the open (0, 1).
    if lo <= hi && hi > 0.0 && lo < 1.0 {
        Some(lo.max(0.0))
    } else {
        None
    }
}

/// Parameter interval (within [0,1], possibly extending beyond) where
/// `‖start + t·delta − c‖ ≤ r`, or None when the segment misses the ball.
fn sphere_interval(c: &PointN, seg: &OpenSegment, r: f64) -> Option<(f64, f64)> {
    let rel = seg.start.sub(c);
    let a = seg.delta.norm_sq();
    if a == 0.0 {
        // Degenerate sweep: the set collapses to the start point.
        return if rel.norm_sq() <= r * r {
            Some((0.0, 1.0))
        } else {
            None
        };
    }
    let b = rel.dot(&seg.delta);
    let cc = rel.norm_sq() - r * r;
    let disc = b * b - a * cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    Some(((-b - sq) / a, (-b + sq) / a))
}

/// Slab test of a segment against an oriented box (exact, eps = 0).
fn box_slab_interval(
    half_extents: &PointN,
    pose: &BodyPose,
    seg: &OpenSegment,
) -> Option<(f64, f64)> {
    let q = pose.orient.apply_inverse(&seg.start.sub(&pose.center));
    let r = pose.orient.apply_inverse(&seg.delta);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for i in 0..q.dim() {
        let h = half_extents.get(i);
        if r.get(i) == 0.0 {
            if q.get(i).abs() > h {
                return None;
            }
            continue;
        }
        let t1 = (-h - q.get(i)) / r.get(i);
        let t2 = (h - q.get(i)) / r.get(i);
        lo = lo.max(t1.min(t2));
        hi = hi.min(t1.max(t2));
    }
    if lo <= hi {
        Some((lo, hi))
    } else {
        None
    }
}

/// Sublevel interval `{t ∈ [0,1] : f(seg(t)) ≤ eps}` of a convex distance
/// function, found by golden-section minimization plus bisection.
fn convex_sublevel_interval(
    seg: &OpenSegment,
    eps: f64,
    dist: impl Fn(&PointN) -> f64,
) -> Option<(f64, f64)> {
    let f = |t: f64| dist(&seg.point_at(t));
    // Golden-section search for the minimizer on [0, 1].
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let t_min = 0.5 * (a + b);
    if f(t_min) > eps {
        return None;
    }
    let bisect = |mut lo: f64, mut hi: f64, rising: bool| {
        // Invariant: f crosses eps between lo and hi.
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let above = f(mid) > eps;
            if above == rising {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let lo = if f(0.0) <= eps {
        0.0
    } else {
        bisect(0.0, t_min, false)
    };
    let hi = if f(1.0) <= eps {
        1.0
    } else {
        bisect(t_min, 1.0, true)
    };
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seg2(sx: f64, sy: f64, ex: f64, ey: f64) -> OpenSegment {
        OpenSegment::from_endpoints(PointN::from_xy(sx, sy), PointN::from_xy(ex, ey))
    }

    /// Independent oracle: dense parametric sweep over the open interval.
    fn sweep_min_dist(body: &Body, pose: &BodyPose, seg: &OpenSegment, steps: usize) -> f64 {
        let mut best = f64::INFINITY;
        for k in 1..steps {
            let t = k as f64 / steps as f64;
            best = best.min(point_body_distance(body, pose, &seg.point_at(t)));
        }
        best
    }

    #[test]
    fn point_body_on_path_midpoint() {
        let seg = seg2(0.0, 0.0, 1.0, 0.0);
        let pose = BodyPose::axis_aligned(PointN::from_xy(0.5, 0.0));
        assert!(contact(&Body::Point, &pose, &seg, 0.0));
    }

    #[test]
    fn endpoint_grazing_is_not_contact() {
        let seg = seg2(0.0, 0.0, 1.0, 0.0);
        // Body sits exactly at the segment end; the open segment excludes it.
        let pose = BodyPose::axis_aligned(PointN::from_xy(1.0, 0.0));
        assert!(!contact(&Body::Point, &pose, &seg, 0.0));
        let pose_start = BodyPose::axis_aligned(PointN::from_xy(0.0, 0.0));
        assert!(!contact(&Body::Point, &pose_start, &seg, 0.0));
    }

    #[test]
    fn separated_body_is_no_contact() {
        let seg = seg2(0.0, 0.0, 0.2, 0.0);
        let pose = BodyPose::axis_aligned(PointN::from_xy(0.9, 0.9));
        assert!(!contact(&Body::Disc { radius: 0.05 }, &pose, &seg, 0.01));
    }

    #[test]
    fn disc_random_cases_match_sweep_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut checked = 0;
        for _ in 0..1000 {
            let seg = seg2(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            );
            let pose = BodyPose::axis_aligned(PointN::from_xy(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ));
            let radius = rng.random_range(0.02..0.2);
            let body = Body::Disc { radius };
            let min_d = sweep_min_dist(&body, &pose, &seg, 10_000);
            if min_d.abs() < 1e-3 {
                continue; // decision boundary within oracle resolution
            }
            checked += 1;
            assert_eq!(contact(&body, &pose, &seg, 0.0), min_d == 0.0);
        }
        assert!(checked > 800);
    }

    #[test]
    fn box_random_cases_match_sweep_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut checked = 0;
        for _ in 0..500 {
            let seg = seg2(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            );
            let body = Body::Box {
                half_extents: PointN::from_xy(
                    rng.random_range(0.05..0.25),
                    rng.random_range(0.02..0.1),
                ),
            };
            let pose = BodyPose::new(
                PointN::from_xy(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)),
                Rotation::from_angle(rng.random_range(0.0..std::f64::consts::PI)),
            );
            let eps = if rng.random::<f64>() < 0.5 { 0.0 } else { 0.03 };
            let min_d = sweep_min_dist(&body, &pose, &seg, 10_000);
            if (min_d - eps).abs() < 1e-3 {
                continue;
            }
            checked += 1;
            assert_eq!(
                contact(&body, &pose, &seg, eps),
                min_d <= eps,
                "min_d={min_d} eps={eps}"
            );
        }
        assert!(checked > 350);
    }

    #[test]
    fn contact_invariant_under_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let seg = seg2(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            );
            let pose = BodyPose::axis_aligned(PointN::from_xy(
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ));
            let body = Body::Disc { radius: 0.08 };
            let shift = PointN::from_xy(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
            let seg_shifted = OpenSegment::new(seg.start.add(&shift), seg.delta);
            let pose_shifted = BodyPose::axis_aligned(pose.center.add(&shift));
            assert_eq!(
                contact(&body, &pose, &seg, 0.0),
                contact(&body, &pose_shifted, &seg_shifted, 0.0)
            );
        }
    }

    #[test]
    fn degenerate_segment_contact_is_pointwise() {
        let seg = seg2(0.5, 0.5, 0.5, 0.5);
        let inside = BodyPose::axis_aligned(PointN::from_xy(0.52, 0.5));
        let outside = BodyPose::axis_aligned(PointN::from_xy(0.9, 0.5));
        let body = Body::Disc { radius: 0.05 };
        assert!(contact(&body, &inside, &seg, 0.0));
        assert!(!contact(&body, &outside, &seg, 0.0));
    }

    #[test]
    fn contact_entry_is_first_touch() {
        let seg = seg2(0.0, 0.5, 1.0, 0.5);
        let pose = BodyPose::axis_aligned(PointN::from_xy(0.5, 0.5));
        let body = Body::Disc { radius: 0.1 };
        let t = contact_entry(&body, &pose, &seg, 0.0).unwrap();
        assert!((t - 0.4).abs() < 1e-12, "t={t}");
    }

    #[test]
    fn box_slab_matches_rotated_disc_free_cases() {
        // A box rotated by 90 degrees swaps its extents.
        let body = Body::Box {
            half_extents: PointN::from_xy(0.3, 0.05),
        };
        let pose = BodyPose::new(
            PointN::from_xy(0.5, 0.5),
            Rotation::from_angle(std::f64::consts::FRAC_PI_2),
        );
        // Vertical extent is now 0.3: a horizontal path at y=0.7 hits it.
        let hit = seg2(0.0, 0.7, 1.0, 0.7);
        assert!(contact(&body, &pose, &hit, 0.0));
        // At y=0.7 an unrotated box (half height 0.05) is missed.
        let pose_id = BodyPose::axis_aligned(PointN::from_xy(0.5, 0.5));
        assert!(!contact(&body, &pose_id, &hit, 0.0));
    }
}
