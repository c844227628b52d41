use super::EncodedSet;
use crate::env::TruthSidecar;
use crate::geom::{dist_point_segment, OpenSegment, PointN};

/// Tolerances for the theorem-condition checks, in normalized (unit-cube)
/// units. Echoed into every report for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionTolerances {
    /// Condition 1 (equivariance): ‖z_int′ − z_int − a‖² ≤ tol_eq.
    pub tol_eq: f64,
    /// Condition 3: min(‖Δz_ext‖², dist²(z_ext, segment)) ≤ tol_cond3.
    pub tol_cond3: f64,
    /// Condition 2 (injectivity proxy): distinct states closer than this in
    /// joint latent space count as collisions.
    pub tol_inj: f64,
}

impl Default for ConditionTolerances {
    fn default() -> Self {
        Self {
            tol_eq: 1e-3,
            tol_cond3: 1e-2,
            tol_inj: 1e-4,
        }
    }
}

/// Violation counts per condition of the translation-recovery theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ViolationCounts {
    /// Condition 1: records failing equivariance.
    pub equivariance: usize,
    /// Condition 2: pairs of distinct states with colliding joint latents.
    pub injectivity: usize,
    /// Condition 3: records where the object latent neither stayed put nor
    /// sat on the swept latent segment.
    pub condition3: usize,
}

impl ViolationCounts {
    pub fn total(&self) -> usize {
        self.equivariance + self.injectivity + self.condition3
    }
}

/// Check the three conditions on every record of an encoded dataset.
///
/// With ground truth available, "distinct" for the injectivity proxy means
/// distinct underlying states; without it, distinct observation content.
pub fn check_theorem_conditions(
    encoded: &EncodedSet,
    tol: &ConditionTolerances,
    truth: Option<&TruthSidecar>,
) -> ViolationCounts {
    let mut counts = ViolationCounts::default();

    for i in 0..encoded.len() {
        // Condition 1: equivariance of the agent head.
        let r = encoded.z_int_next[i]
            .sub(&encoded.z_int[i])
            .sub(&encoded.actions[i]);
        if r.norm_sq() > tol.tol_eq {
            counts.equivariance += 1;
        }

        // Condition 3: object latent unchanged, or on the swept segment.
        let move_sq = encoded.z_ext_next[i]
            .mean()
            .dist_sq(encoded.z_ext[i].mean());
        let seg = OpenSegment::new(encoded.z_int[i], encoded.actions[i]);
        let seg_sq = dist_point_segment(encoded.z_ext[i].mean(), &seg);
        if move_sq.min(seg_sq) > tol.tol_cond3 {
            counts.condition3 += 1;
        }
    }

    // Condition 2: injectivity proxy over the joint latents of both frames.
    let items: Vec<(u64, usize, bool)> = (0..encoded.len())
        .map(|i| (encoded.obs_id[i], i, false))
        .chain((0..encoded.len()).map(|i| (encoded.obs_next_id[i], i, true)))
        .collect();
    let joint = |i: usize, next: bool| -> Vec<f64> {
        let (z, g, w) = if next {
            (&encoded.z_int_next[i], &encoded.z_ext_next[i], &encoded.w_next[i])
        } else {
            (&encoded.z_int[i], &encoded.z_ext[i], &encoded.w[i])
        };
        let mut v = z.as_slice().to_vec();
        v.extend_from_slice(g.mean().as_slice());
        v.extend_from_slice(w);
        v
    };
    let state_of = |i: usize, next: bool| {
        truth.map(|t| {
            if next {
                t.records[i].s_next
            } else {
                t.records[i].s
            }
        })
    };
    let joints: Vec<Vec<f64>> = items.iter().map(|&(_, i, next)| joint(i, next)).collect();
    let tol_sq = tol.tol_inj * tol.tol_inj;
    for a in 0..items.len() {
        for b in (a + 1)..items.len() {
            let distinct = match (state_of(items[a].1, items[a].2), state_of(items[b].1, items[b].2))
            {
                (Some(sa), Some(sb)) => !states_equal(&sa, &sb),
                _ => items[a].0 != items[b].0,
            };
            if !distinct {
                continue;
            }
            let d: f64 = joints[a]
                .iter()
                .zip(&joints[b])
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            if d <= tol_sq {
                counts.injectivity += 1;
            }
        }
    }
    counts
}

fn states_equal(a: &crate::env::WorldState, b: &crate::env::WorldState) -> bool {
    let close = |p: &PointN, q: &PointN| {
        p.as_slice()
            .iter()
            .zip(q.as_slice())
            .all(|(x, y)| (x - y).abs() <= 1e-12)
    };
    close(&a.s_int, &b.s_int)
        && close(&a.s_ext, &b.s_ext)
        && match (a.orientation, b.orientation) {
            (Some(x), Some(y)) => (x - y).abs() <= 1e-12,
            (None, None) => true,
            _ => false,
        }
}
