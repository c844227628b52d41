use super::EvalError;
use crate::diff::Tensor;
use crate::env::{Dataset, TruthSidecar};
use crate::geom::{LatentGaussian, PointN, Rotation, TriFactor, MAX_DIM};
use crate::repr::EncoderTriple;
use std::hash::{Hash, Hasher};

/// Latents of every record of a dataset, both frames, plus observation
/// fingerprints. Evaluation works on this form so that analytic "cheat"
/// encoders (built from ground truth) go through exactly the same code path
/// as trained networks.
#[derive(Debug, Clone)]
pub struct EncodedSet {
    pub z_int: Vec<PointN>,
    pub z_ext: Vec<LatentGaussian>,
    pub w: Vec<Vec<f64>>,
    pub z_int_next: Vec<PointN>,
    pub z_ext_next: Vec<LatentGaussian>,
    pub w_next: Vec<Vec<f64>>,
    pub actions: Vec<PointN>,
    /// Hashes identifying the underlying observations (used as a
    /// distinctness proxy when ground truth is unavailable).
    pub obs_id: Vec<u64>,
    pub obs_next_id: Vec<u64>,
}

impl EncodedSet {
    pub fn len(&self) -> usize {
        self.z_int.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_int.is_empty()
    }

    /// Encode a dataset with trained networks (chunked batches).
    pub fn from_encoders(enc: &EncoderTriple, data: &Dataset) -> Result<Self, EvalError> {
        if data.obs_dim != enc.obs_dim() {
            return Err(EvalError::DimMismatch {
                what: "observation width",
                expected: enc.obs_dim(),
                got: data.obs_dim,
            });
        }
        let mut out = EncodedSet {
            z_int: Vec::with_capacity(data.len()),
            z_ext: Vec::with_capacity(data.len()),
            w: Vec::with_capacity(data.len()),
            z_int_next: Vec::with_capacity(data.len()),
            z_ext_next: Vec::with_capacity(data.len()),
            w_next: Vec::with_capacity(data.len()),
            actions: Vec::with_capacity(data.len()),
            obs_id: Vec::with_capacity(data.len()),
            obs_next_id: Vec::with_capacity(data.len()),
        };
        let chunk = 512;
        let mut start = 0;
        while start < data.len() {
            let end = (start + chunk).min(data.len());
            let idx: Vec<usize> = (start..end).collect();
            for (next, zs, gs, ws) in [
                (false, &mut out.z_int, &mut out.z_ext, &mut out.w),
                (true, &mut out.z_int_next, &mut out.z_ext_next, &mut out.w_next),
            ] {
                let mut t = Tensor::zeros(idx.len(), data.obs_dim);
                for (r, &i) in idx.iter().enumerate() {
                    let src = if next { data.obs_next(i) } else { data.obs(i) };
                    for (dst, &v) in t.row_mut(r).iter_mut().zip(src) {
                        *dst = v as f64;
                    }
                }
                let (frame, _) = enc.forward_frame(&t)?;
                for r in 0..idx.len() {
                    zs.push(frame.z_int_point(r));
                    gs.push(frame.gaussians[r]);
                    ws.push(frame.w.row(r).to_vec());
                }
            }
            for &i in &idx {
                out.actions.push(data.action_f64(i));
                out.obs_id.push(hash_f32(data.obs(i)));
                out.obs_next_id.push(hash_f32(data.obs_next(i)));
            }
            start = end;
        }
        Ok(out)
    }

    /// The ground-truth-plus-offset encoder realizing the theorem's
    /// conclusion exactly: z = s + h on both heads. Covariances encode the
    /// body pose when an orientation is present, isotropic otherwise; the
    /// contrastive code is the successor object position (so interacting
    /// transitions separate).
    pub fn cheat(truth: &TruthSidecar, h: &PointN) -> Self {
        let n = h.dim();
        let gaussian = |s_ext: &PointN, orientation: Option<f64>| {
            let mean = s_ext.add(h);
            match orientation {
                Some(theta) => {
                    let rot = Rotation::from_angle(theta);
                    // Anisotropic ellipse aligned with the body frame.
                    let scales = [0.2, 0.05, 0.05];
                    let mut cov = [[0.0; MAX_DIM]; MAX_DIM];
                    for i in 0..n {
                        for j in 0..n {
                            let mut acc = 0.0;
                            for (k, s) in scales.iter().enumerate().take(n) {
                                acc += rot.entry(i, k) * s * s * rot.entry(j, k);
                            }
                            cov[i][j] = acc;
                        }
                    }
                    let factor = TriFactor::from_covariance(n, &cov)
                        .expect("constructed covariance is SPD");
                    LatentGaussian::new(mean, factor).expect("dimensions agree")
                }
                None => LatentGaussian::isotropic(mean, 0.05),
            }
        };
        let state_id = |s: &crate::env::WorldState| {
            let mut hasher = std::collections::hash_map::DefaultHasher::new();
            for v in s.s_int.as_slice() {
                v.to_bits().hash(&mut hasher);
            }
            for v in s.s_ext.as_slice() {
                v.to_bits().hash(&mut hasher);
            }
            if let Some(theta) = s.orientation {
                theta.to_bits().hash(&mut hasher);
            }
            hasher.finish()
        };
        EncodedSet {
            z_int: truth.records.iter().map(|r| r.s.s_int.add(h)).collect(),
            z_ext: truth
                .records
                .iter()
                .map(|r| gaussian(&r.s.s_ext, r.s.orientation))
                .collect(),
            w: truth
                .records
                .iter()
                .map(|r| r.s.s_ext.as_slice().to_vec())
                .collect(),
            z_int_next: truth
                .records
                .iter()
                .map(|r| r.s_next.s_int.add(h))
                .collect(),
            z_ext_next: truth
                .records
                .iter()
                .map(|r| gaussian(&r.s_next.s_ext, r.s_next.orientation))
                .collect(),
            w_next: truth
                .records
                .iter()
                .map(|r| r.s_next.s_ext.as_slice().to_vec())
                .collect(),
            actions: truth.records.iter().map(|r| r.action).collect(),
            obs_id: truth.records.iter().map(|r| state_id(&r.s)).collect(),
            obs_next_id: truth.records.iter().map(|r| state_id(&r.s_next)).collect(),
        }
    }
}

fn hash_f32(values: &[f32]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for v in values {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}
