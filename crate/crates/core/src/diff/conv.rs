use super::{DiffError, MlpParams, Tensor};
use rand::Rng;

/// A single strided convolution + relu front-end over channel-last images,
/// used ahead of the dense layers for raster observations. Translation
/// weight-sharing is the point: blob positions generalize across the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_h: usize,
    pub in_w: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl ConvSpec {
    pub fn validate(&self) -> Result<(), DiffError> {
        if self.kernel == 0
            || self.stride == 0
            || self.in_ch == 0
            || self.out_ch == 0
            || self.in_h < self.kernel
            || self.in_w < self.kernel
        {
            return Err(DiffError::InvalidSpec(format!("bad conv spec {self:?}")));
        }
        Ok(())
    }

    pub fn out_h(&self) -> usize {
        (self.in_h - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w - self.kernel) / self.stride + 1
    }

    pub fn in_dim(&self) -> usize {
        self.in_h * self.in_w * self.in_ch
    }

    pub fn out_dim(&self) -> usize {
        self.out_h() * self.out_w() * self.out_ch
    }

    pub fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.in_ch
    }

    pub fn param_count(&self) -> usize {
        self.patch_len() * self.out_ch + self.out_ch
    }

    /// Parameters live in the single-layer [`MlpParams`] shape
    /// (patch_len × out_ch weights plus out_ch bias), so the optimizer,
    /// flattening and checkpoint machinery are shared with the dense nets.
    pub fn init_params(&self, rng: &mut impl Rng) -> MlpParams {
        let bound = (6.0 / self.patch_len() as f64).sqrt();
        MlpParams {
            weights: vec![Tensor::from_fn(self.patch_len(), self.out_ch, |_, _| {
                rng.random_range(-bound..bound)
            })],
            biases: vec![vec![0.0; self.out_ch]],
        }
    }

    pub fn zeros_params(&self) -> MlpParams {
        MlpParams {
            weights: vec![Tensor::zeros(self.patch_len(), self.out_ch)],
            biases: vec![vec![0.0; self.out_ch]],
        }
    }
}

/// Intermediates of one conv forward pass.
pub struct ConvTape {
    /// im2col patches, (batch·out_h·out_w) × patch_len.
    patches: Tensor,
    /// Post-relu activations, (batch·out_h·out_w) × out_ch.
    post: Tensor,
    batch: usize,
    consumed: bool,
}

/// Forward a batch of channel-last images (rows are flattened H×W×C).
/// Output rows are flattened out_h×out_w×out_ch, relu-activated.
pub fn conv_forward(
    spec: &ConvSpec,
    params: &MlpParams,
    batch: &Tensor,
) -> Result<(Tensor, ConvTape), DiffError> {
    if batch.cols() != spec.in_dim() {
        return Err(DiffError::ShapeMismatch {
            expected: (batch.rows(), spec.in_dim()),
            got: batch.shape(),
        });
    }
    let (oh, ow, k, s, c) = (spec.out_h(), spec.out_w(), spec.kernel, spec.stride, spec.in_ch);
    let b = batch.rows();
    let mut patches = Tensor::zeros(b * oh * ow, spec.patch_len());
    for r in 0..b {
        let img = batch.row(r);
        for oy in 0..oh {
            for ox in 0..ow {
                let row = patches.row_mut((r * oh + oy) * ow + ox);
                let mut idx = 0;
                for ky in 0..k {
                    let iy = oy * s + ky;
                    let src = &img[(iy * spec.in_w + ox * s) * c..];
                    // k consecutive pixels × c channels are contiguous.
                    row[idx..idx + k * c].copy_from_slice(&src[..k * c]);
                    idx += k * c;
                }
            }
        }
    }
    let mut post = patches.matmul(&params.weights[0]);
    for r in 0..post.rows() {
        for (v, bias) in post.row_mut(r).iter_mut().zip(&params.biases[0]) {
            *v = (*v + bias).max(0.0);
        }
    }
    if !post.all_finite() {
        return Err(DiffError::NonFinite("conv outputs"));
    }
    let mut out = Tensor::zeros(b, spec.out_dim());
    for r in 0..b {
        let dst = out.row_mut(r);
        for p in 0..oh * ow {
            let src = post.row(r * oh * ow + p);
            dst[p * spec.out_ch..(p + 1) * spec.out_ch].copy_from_slice(src);
        }
    }
    Ok((
        out,
        ConvTape {
            patches,
            post,
            batch: b,
            consumed: false,
        },
    ))
}

/// Reverse pass: parameter gradients of the stem given dL/d(outputs). The
/// stem is the first stage, so input gradients are not produced.
pub fn conv_backward(
    spec: &ConvSpec,
    tape: &mut ConvTape,
    out_grads: &Tensor,
) -> Result<MlpParams, DiffError> {
    if tape.consumed {
        return Err(DiffError::TapeConsumed);
    }
    tape.consumed = true;
    let b = tape.batch;
    if out_grads.shape() != (b, spec.out_dim()) {
        return Err(DiffError::ShapeMismatch {
            expected: (b, spec.out_dim()),
            got: out_grads.shape(),
        });
    }
    let (oh, ow) = (spec.out_h(), spec.out_w());
    let mut delta = Tensor::zeros(b * oh * ow, spec.out_ch);
    for r in 0..b {
        let src = out_grads.row(r);
        for p in 0..oh * ow {
            let row = delta.row_mut(r * oh * ow + p);
            for (oc, d) in row.iter_mut().enumerate() {
                let y = tape.post.at(r * oh * ow + p, oc);
                *d = if y > 0.0 { src[p * spec.out_ch + oc] } else { 0.0 };
            }
        }
    }
    let dw = tape.patches.t_matmul(&delta);
    let mut db = vec![0.0; spec.out_ch];
    for r in 0..delta.rows() {
        for (acc, &d) in db.iter_mut().zip(delta.row(r)) {
            *acc += d;
        }
    }
    Ok(MlpParams {
        weights: vec![dw],
        biases: vec![db],
    })
}
