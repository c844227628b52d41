use super::ReprError;
use crate::diff::{
    conv_forward, forward, Activation, ConvSpec, ConvTape, Head, MlpParams, MlpSpec, Tape, Tensor,
};
use crate::geom::{LatentGaussian, PointN, MAX_DIM};
use rand::Rng;

/// Architecture shared by the three encoders: observation width, latent
/// dimension n, an optional convolutional stem for raster observations,
/// hidden widths, and the contrastive code width m.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub obs_dim: usize,
    pub n: usize,
    pub conv: Option<ConvSpec>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub contrastive_dim: usize,
}

impl EncoderConfig {
    pub fn tri_dim(&self) -> usize {
        self.n * (self.n + 1) / 2
    }
}

/// One observation's latents: agent position, object Gaussian, contrastive
/// code.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub z_int: PointN,
    pub z_ext: LatentGaussian,
    pub w: Vec<f64>,
}

/// Per-network convolutional stems (separate parameters, one shared shape).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvStem {
    pub spec: ConvSpec,
    pub int: MlpParams,
    pub ext: MlpParams,
    pub cont: MlpParams,
}

/// The three trainable maps φ_int, φ_ext, φ_cont.
///
/// φ_ext emits n mean values plus n(n+1)/2 unconstrained factor values that
/// are mapped into a valid SPD covariance (softplus on the factor diagonal).
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTriple {
    pub spec_int: MlpSpec,
    pub spec_ext: MlpSpec,
    pub spec_cont: MlpSpec,
    pub params_int: MlpParams,
    pub params_ext: MlpParams,
    pub params_cont: MlpParams,
    pub stem: Option<ConvStem>,
}

impl EncoderTriple {
    pub fn init(cfg: &EncoderConfig, rng: &mut impl Rng) -> Result<Self, ReprError> {
        if cfg.n < 1 || cfg.n > MAX_DIM {
            return Err(ReprError::DimMismatch {
                what: "latent dimension",
                expected: MAX_DIM,
                got: cfg.n,
            });
        }
        let stem = match &cfg.conv {
            None => None,
            Some(spec) => {
                spec.validate()?;
                if spec.in_dim() != cfg.obs_dim {
                    return Err(ReprError::DimMismatch {
                        what: "conv stem input",
                        expected: cfg.obs_dim,
                        got: spec.in_dim(),
                    });
                }
                Some(ConvStem {
                    spec: *spec,
                    int: spec.init_params(rng),
                    ext: spec.init_params(rng),
                    cont: spec.init_params(rng),
                })
            }
        };
        let mlp_in = cfg.conv.map(|c| c.out_dim()).unwrap_or(cfg.obs_dim);
        let mut widths_int = vec![mlp_in];
        widths_int.extend(&cfg.hidden);
        widths_int.push(cfg.n);
        let mut widths_ext = vec![mlp_in];
        widths_ext.extend(&cfg.hidden);
        widths_ext.push(cfg.n + cfg.tri_dim());
        let mut widths_cont = vec![mlp_in];
        widths_cont.extend(&cfg.hidden);
        widths_cont.push(cfg.contrastive_dim);

        let spec_int = MlpSpec::new(widths_int, cfg.activation, vec![]);
        let spec_ext = MlpSpec::new(
            widths_ext,
            cfg.activation,
            vec![
                Head {
                    name: "mean".into(),
                    width: cfg.n,
                },
                Head {
                    name: "cov".into(),
                    width: cfg.tri_dim(),
                },
            ],
        );
        let spec_cont = MlpSpec::new(widths_cont, cfg.activation, vec![]);
        for s in [&spec_int, &spec_ext, &spec_cont] {
            s.validate()?;
        }
        Ok(Self {
            params_int: MlpParams::init(&spec_int, rng),
            params_ext: MlpParams::init(&spec_ext, rng),
            params_cont: MlpParams::init(&spec_cont, rng),
            spec_int,
            spec_ext,
            spec_cont,
            stem,
        })
    }

    pub fn n(&self) -> usize {
        self.spec_int.out_width()
    }

    pub fn obs_dim(&self) -> usize {
        match &self.stem {
            Some(stem) => stem.spec.in_dim(),
            None => self.spec_int.in_width(),
        }
    }

    pub fn contrastive_dim(&self) -> usize {
        self.spec_cont.out_width()
    }

    /// Deterministic forward pass of a single observation.
    pub fn encode(&self, obs: &[f64]) -> Result<Encoding, ReprError> {
        if obs.len() != self.obs_dim() {
            return Err(ReprError::DimMismatch {
                what: "observation width",
                expected: self.obs_dim(),
                got: obs.len(),
            });
        }
        let batch = Tensor::from_vec(1, obs.len(), obs.to_vec())?;
        let frame = self.forward_frame(&batch)?.0;
        Ok(Encoding {
            z_int: frame.z_int_point(0),
            z_ext: frame.gaussians[0],
            w: frame.w.row(0).to_vec(),
        })
    }

    /// Forward a whole batch through all three networks (conv stems first
    /// when present).
    pub(crate) fn forward_frame(&self, batch: &Tensor) -> Result<(Frame, FrameTapes), ReprError> {
        let mut conv_tapes = ConvTapes {
            int: None,
            ext: None,
            cont: None,
        };
        let (z_int, tape_int, ext_raw, tape_ext, w, tape_cont) = match &self.stem {
            None => {
                let (z_int, tape_int) = forward(&self.spec_int, &self.params_int, batch)?;
                let (ext_raw, tape_ext) = forward(&self.spec_ext, &self.params_ext, batch)?;
                let (w, tape_cont) = forward(&self.spec_cont, &self.params_cont, batch)?;
                (z_int, tape_int, ext_raw, tape_ext, w, tape_cont)
            }
            Some(stem) => {
                let (f_int, t_int) = conv_forward(&stem.spec, &stem.int, batch)?;
                let (f_ext, t_ext) = conv_forward(&stem.spec, &stem.ext, batch)?;
                let (f_cont, t_cont) = conv_forward(&stem.spec, &stem.cont, batch)?;
                conv_tapes = ConvTapes {
                    int: Some(t_int),
                    ext: Some(t_ext),
                    cont: Some(t_cont),
                };
                let (z_int, tape_int) = forward(&self.spec_int, &self.params_int, &f_int)?;
                let (ext_raw, tape_ext) = forward(&self.spec_ext, &self.params_ext, &f_ext)?;
                let (w, tape_cont) = forward(&self.spec_cont, &self.params_cont, &f_cont)?;
                (z_int, tape_int, ext_raw, tape_ext, w, tape_cont)
            }
        };
        let n = self.n();
        let mut gaussians = Vec::with_capacity(batch.rows());
        let mut diag_grads = Vec::with_capacity(batch.rows());
        for r in 0..batch.rows() {
            let row = ext_raw.row(r);
            let (g, dg) = LatentGaussian::from_unconstrained(&row[..n], &row[n..]);
            gaussians.push(g);
            diag_grads.push(dg);
        }
        Ok((
            Frame {
                z_int,
                ext_raw,
                w,
                gaussians,
                diag_grads,
            },
            FrameTapes {
                int: tape_int,
                ext: tape_ext,
                cont: tape_cont,
                conv: conv_tapes,
            },
        ))
    }
}

/// Batch encodings of one side of the transition triples.
pub(crate) struct Frame {
    pub z_int: Tensor,
    pub ext_raw: Tensor,
    pub w: Tensor,
    pub gaussians: Vec<LatentGaussian>,
    pub diag_grads: Vec<[f64; MAX_DIM]>,
}

impl Frame {
    pub fn len(&self) -> usize {
        self.z_int.rows()
    }

    pub fn z_int_point(&self, i: usize) -> PointN {
        PointN::new(self.z_int.row(i)).expect("latent dimension within range")
    }
}

/// Forward tapes of the three networks for one frame.
pub(crate) struct FrameTapes {
    pub int: Tape,
    pub ext: Tape,
    pub cont: Tape,
    pub conv: ConvTapes,
}

pub(crate) struct ConvTapes {
    pub int: Option<ConvTape>,
    pub ext: Option<ConvTape>,
    pub cont: Option<ConvTape>,
}

/// Gradient accumulators aligned with a [`Frame`]'s outputs.
pub(crate) struct FrameGrads {
    pub z_int: Tensor,
    pub ext_raw: Tensor,
    pub w: Tensor,
}

impl FrameGrads {
    pub fn zeros_like(frame: &Frame) -> Self {
        Self {
            z_int: Tensor::zeros(frame.z_int.rows(), frame.z_int.cols()),
            ext_raw: Tensor::zeros(frame.ext_raw.rows(), frame.ext_raw.cols()),
            w: Tensor::zeros(frame.w.rows(), frame.w.cols()),
        }
    }
}
