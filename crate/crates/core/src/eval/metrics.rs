use super::{EncodedSet, EvalError};
use crate::env::TruthSidecar;
use crate::geom::{principal_axes, PointN};
use crate::repr::{BatchClasses, Class, LossMode};

/// Relative-position preservation: mean squared error between the latent
/// offset `z_int − mean(z_ext)` and the true offset `s_int − s_ext`,
/// evaluated on the first observation of each record. Invariant under a
/// common translation of both latent heads.
pub fn l_test(encoded: &EncodedSet, truth: &TruthSidecar) -> Result<f64, EvalError> {
    if truth.records.len() != encoded.len() {
        return Err(EvalError::DimMismatch {
            what: "truth records",
            expected: encoded.len(),
            got: truth.records.len(),
        });
    }
    if encoded.is_empty() {
        return Err(EvalError::MissingTruth("l_test"));
    }
    let mut acc = 0.0;
    for (i, rec) in truth.records.iter().enumerate() {
        let latent_rel = encoded.z_int[i].sub(encoded.z_ext[i].mean());
        let true_rel = rec.s.s_int.sub(&rec.s.s_ext);
        acc += latent_rel.dist_sq(&true_rel);
    }
    Ok(acc / encoded.len() as f64)
}

#[derive(Debug, Clone)]
pub struct TranslationFit {
    /// Best-fit constant offset between latents and true states.
    pub h: PointN,
    /// Per-sample max-norm residual of `z − s − h` over both heads.
    pub residuals: Vec<f64>,
    /// 95th percentile (nearest-rank) of the residuals.
    pub p95: f64,
}

/// Fit a single translation to paired (latent, true) positions of both
/// heads; the mean offset minimizes the mean squared residual.
pub fn fit_translation_pairs(
    z_pairs: &[(PointN, PointN)],
    s_pairs: &[(PointN, PointN)],
) -> TranslationFit {
    assert_eq!(z_pairs.len(), s_pairs.len());
    assert!(!z_pairs.is_empty());
    let n = z_pairs[0].0.dim();
    let mut h = PointN::zeros(n);
    for ((z_int, z_ext), (s_int, s_ext)) in z_pairs.iter().zip(s_pairs) {
        h = h.add(&z_int.sub(s_int)).add(&z_ext.sub(s_ext));
    }
    h = h.scale(1.0 / (2.0 * z_pairs.len() as f64));

    let max_norm = |p: &PointN| {
        p.as_slice()
            .iter()
            .fold(0.0f64, |acc, &v| acc.max(v.abs()))
    };
    let residuals: Vec<f64> = z_pairs
        .iter()
        .zip(s_pairs)
        .map(|((z_int, z_ext), (s_int, s_ext))| {
            let r_int = z_int.sub(s_int).sub(&h);
            let r_ext = z_ext.sub(s_ext).sub(&h);
            max_norm(&r_int).max(max_norm(&r_ext))
        })
        .collect();
    let mut sorted = residuals.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    let p95 = sorted[rank - 1];
    TranslationFit { h, residuals, p95 }
}

/// Translation fit over an encoded dataset (first observation per record,
/// stochastic means as the object positions).
pub fn fit_translation(
    encoded: &EncodedSet,
    truth: &TruthSidecar,
) -> Result<TranslationFit, EvalError> {
    if truth.records.len() != encoded.len() || encoded.is_empty() {
        return Err(EvalError::MissingTruth("fit_translation"));
    }
    let z_pairs: Vec<(PointN, PointN)> = (0..encoded.len())
        .map(|i| (encoded.z_int[i], *encoded.z_ext[i].mean()))
        .collect();
    let s_pairs: Vec<(PointN, PointN)> = truth
        .records
        .iter()
        .map(|r| (r.s.s_int, r.s.s_ext))
        .collect();
    Ok(fit_translation_pairs(&z_pairs, &s_pairs))
}

/// Fraction of records whose Otsu class agrees with the ground-truth
/// interaction flag.
pub fn otsu_accuracy(classes: &BatchClasses, labels: &[bool]) -> f64 {
    assert_eq!(classes.labels.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    classes
        .labels
        .iter()
        .zip(labels)
        .filter(|(&c, &l)| (c == Class::CPlus) == l)
        .count() as f64
        / labels.len() as f64
}

/// A covariance carries a measurable orientation only once its axes differ
/// by a real margin; below this scale ratio the principal axis is noise and
/// the sample counts as degenerate.
pub const ANISOTROPY_MIN: f64 = 1.2;

/// Mean angle (degrees, mod π) between the leading principal axis of the
/// encoded covariance and the true box orientation, over samples with a
/// well-defined (non-degenerate) axis: scale ratio at least
/// [`ANISOTROPY_MIN`].
pub fn orientation_error_deg(
    encoded: &EncodedSet,
    truth: &TruthSidecar,
    mode: LossMode,
) -> Result<f64, EvalError> {
    if mode == LossMode::Deterministic {
        return Err(EvalError::DeterministicMode);
    }
    let mut acc = 0.0;
    let mut counted = 0usize;
    for (i, rec) in truth.records.iter().enumerate() {
        let Some(theta_true) = rec.s.orientation else {
            continue;
        };
        let axes = principal_axes(&encoded.z_ext[i]);
        let n = encoded.z_ext[i].dim();
        if !axes.orientation_defined || axes.scales[0] < ANISOTROPY_MIN * axes.scales[n - 1] {
            continue;
        }
        let axis = axes.rotation.column(0);
        let theta_enc = axis.get(1).atan2(axis.get(0));
        acc += angle_mod_pi(theta_enc - theta_true);
        counted += 1;
    }
    if counted == 0 {
        return Err(EvalError::NoOrientedSamples);
    }
    Ok(acc / counted as f64 * 180.0 / std::f64::consts::PI)
}

/// Fold an angle difference into [0, π/2] (lines are symmetric mod π).
fn angle_mod_pi(diff: f64) -> f64 {
    let d = diff.rem_euclid(std::f64::consts::PI);
    d.min(std::f64::consts::PI - d)
}
