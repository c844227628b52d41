use super::encoder::{EncoderConfig, EncoderTriple, Frame, FrameGrads, FrameTapes};
use super::losses::{
    infonce_grads, infonce_z_logits, kl_mode_grads, plus_det_grads, plus_stoch_grads,
    segment_points, GaussGrad, KlMode,
};
use super::otsu::{otsu_split, BatchClasses, Class};
use super::ReprError;
use crate::diff::{
    adam_step, backward, conv_backward, Activation, AdamConfig, AdamState, ConvSpec, MlpGrads,
    MlpParams, Tensor,
};
use crate::env::Dataset;
use crate::geom::{PointN, MAX_DIM};
use crate::textio::Doc;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Point (deterministic) or Gaussian (stochastic) object latents. The
/// stochastic mode swaps squared distances for KL / segment-sampled NLL and
/// is the right choice for bodies with volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossMode {
    Deterministic,
    Stochastic,
}

impl LossMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "deterministic" => Some(LossMode::Deterministic),
            "stochastic" => Some(LossMode::Stochastic),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossMode::Deterministic => "deterministic",
            LossMode::Stochastic => "stochastic",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LossConfig {
    pub mode: LossMode,
    pub kl_mode: KlMode,
}

/// Which loss terms to include (used by the gradient test-benches; training
/// selects everything).
#[derive(Debug, Clone, Copy)]
pub struct LossSelect {
    pub int: bool,
    pub ext: bool,
    pub cont: bool,
}

impl LossSelect {
    pub fn all() -> Self {
        Self {
            int: true,
            ext: true,
            cont: true,
        }
    }

    pub fn only_int() -> Self {
        Self {
            int: true,
            ext: false,
            cont: false,
        }
    }

    pub fn only_ext() -> Self {
        Self {
            int: false,
            ext: true,
            cont: false,
        }
    }

    pub fn only_cont() -> Self {
        Self {
            int: false,
            ext: false,
            cont: true,
        }
    }
}

/// Training protocol. Defaults follow the reference setup: Adam at 0.001,
/// batch 128, 100 epochs, 4 Monte Carlo segment samples, forward KL, two
/// warmup epochs before the interaction split starts steering φ_ext.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub mc_samples: usize,
    pub kl_mode: KlMode,
    pub warmup_epochs: usize,
    pub seed: u64,
    pub mode: LossMode,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub contrastive_dim: usize,
    /// Optional convolutional stem ahead of the dense layers (raster
    /// observations).
    pub conv: Option<ConvSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 128,
            lr: 0.001,
            mc_samples: 4,
            kl_mode: KlMode::Forward,
            warmup_epochs: 2,
            seed: 7,
            mode: LossMode::Stochastic,
            hidden: vec![64, 64],
            activation: Activation::Relu,
            contrastive_dim: 16,
            conv: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ReprError> {
        if self.epochs < 1 {
            return Err(ReprError::InvalidConfig("epochs must be ≥ 1".into()));
        }
        if self.batch_size < 2 {
            return Err(ReprError::InvalidConfig(
                "batch_size must be ≥ 2 (InfoNCE needs negatives)".into(),
            ));
        }
        if self.mc_samples < 1 {
            return Err(ReprError::InvalidConfig("mc_samples must be ≥ 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ReprError::InvalidConfig("lr must be positive".into()));
        }
        if self.contrastive_dim < 1 {
            return Err(ReprError::InvalidConfig("contrastive_dim must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        LossConfig {
            mode: self.mode,
            kl_mode: self.kl_mode,
        }
    }

    pub fn to_doc(&self, doc: &mut Doc) {
        doc.set("train", "epochs", self.epochs);
        doc.set("train", "batch_size", self.batch_size);
        doc.set("train", "lr", self.lr);
        doc.set("train", "mc_samples", self.mc_samples);
        doc.set("train", "kl_mode", self.kl_mode.name());
        doc.set("train", "warmup_epochs", self.warmup_epochs);
        doc.set("train", "seed", self.seed);
        doc.set("train", "mode", self.mode.name());
        doc.set(
            "train",
            "hidden",
            self.hidden
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        doc.set("train", "activation", self.activation.name());
        doc.set("train", "contrastive_dim", self.contrastive_dim);
        if let Some(c) = &self.conv {
            doc.set(
                "train",
                "conv",
                format!(
                    "{}x{}x{} k{} s{} c{}",
                    c.in_h, c.in_w, c.in_ch, c.kernel, c.stride, c.out_ch
                ),
            );
        }
    }

    fn parse_conv(raw: &str) -> Option<ConvSpec> {
        // Format: "HxWxC kK sS cOUT".
        let mut parts = raw.split_whitespace();
        let dims: Vec<usize> = parts
            .next()?
            .split('x')
            .map(|s| s.parse().ok())
            .collect::<Option<_>>()?;
        if dims.len() != 3 {
            return None;
        }
        let mut kernel = None;
        let mut stride = None;
        let mut out_ch = None;
        for p in parts {
            let (tag, num) = p.split_at(1);
            let v: usize = num.parse().ok()?;
            match tag {
                "k" => kernel = Some(v),
                "s" => stride = Some(v),
                "c" => out_ch = Some(v),
                _ => return None,
            }
        }
        Some(ConvSpec {
            in_h: dims[0],
            in_w: dims[1],
            in_ch: dims[2],
            out_ch: out_ch?,
            kernel: kernel?,
            stride: stride?,
        })
    }

    pub fn from_doc(doc: &Doc) -> Result<Self, ReprError> {
        let bad = |field: &str| ReprError::InvalidConfig(format!("cannot parse [train] {field}"));
        let kl_raw = doc.require("train", "kl_mode")?;
        let mode_raw = doc.require("train", "mode")?;
        let act_raw = doc.require("train", "activation")?;
        let hidden_raw = doc.require("train", "hidden")?;
        let hidden = if hidden_raw.trim().is_empty() {
            vec![]
        } else {
            hidden_raw
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| bad("hidden")))
                .collect::<Result<Vec<usize>, _>>()?
        };
        let cfg = Self {
            epochs: doc.parse_value("train", "epochs")?,
            batch_size: doc.parse_value("train", "batch_size")?,
            lr: doc.parse_value("train", "lr")?,
            mc_samples: doc.parse_value("train", "mc_samples")?,
            kl_mode: KlMode::parse(kl_raw).ok_or_else(|| bad("kl_mode"))?,
            warmup_epochs: doc.parse_value("train", "warmup_epochs")?,
            seed: doc.parse_value("train", "seed")?,
            mode: LossMode::parse(mode_raw).ok_or_else(|| bad("mode"))?,
            hidden,
            activation: Activation::parse(act_raw).ok_or_else(|| bad("activation"))?,
            contrastive_dim: doc.parse_value("train", "contrastive_dim")?,
            conv: match doc.get("train", "conv") {
                Some(raw) => Some(Self::parse_conv(raw).ok_or_else(|| bad("conv"))?),
                None => None,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchLossTerms {
    pub loss_int: f64,
    pub loss_ext: f64,
    pub loss_cont: f64,
    pub total: f64,
}

/// Parameter gradients for the three encoders (plus their conv stems when
/// present).
pub struct TripleGrads {
    pub int: MlpGrads,
    pub ext: MlpGrads,
    pub cont: MlpGrads,
    pub stem: Option<(MlpGrads, MlpGrads, MlpGrads)>,
}

/// Per-epoch training log: mean losses, mean Otsu threshold, and the mean
/// fraction of triples classified as interactions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss_int: f64,
    pub loss_ext: f64,
    pub loss_cont: f64,
    pub otsu_threshold: f64,
    pub cplus_fraction: f64,
}

impl EpochMetrics {
    pub const CSV_HEADER: &'static str =
        "epoch,loss_int,loss_ext,loss_cont,otsu_threshold,cplus_fraction";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch,
            self.loss_int,
            self.loss_ext,
            self.loss_cont,
            self.otsu_threshold,
            self.cplus_fraction
        )
    }
}

pub struct TrainOutcome {
    pub encoders: EncoderTriple,
    pub metrics: Vec<EpochMetrics>,
    pub snapshots: Vec<(usize, EncoderTriple)>,
}

/// Optional instrumentation for a training run. The epoch hook receives the
/// current encoders after each epoch; it is evaluation-side code and is the
/// only sanctioned way to watch generalization during training (the loop
/// itself never sees ground truth).
#[derive(Default)]
pub struct TrainOptions<'a> {
    pub snapshot_epochs: Vec<usize>,
    #[allow(clippy::type_complexity)]
    pub epoch_hook: Option<Box<dyn FnMut(usize, &EncoderTriple) + 'a>>,
}

/// Train the encoder triple on a transition dataset.
pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome, ReprError> {
    train_with(data, cfg, TrainOptions::default())
}

pub fn train_with(
    data: &Dataset,
    cfg: &TrainConfig,
    mut opts: TrainOptions<'_>,
) -> Result<TrainOutcome, ReprError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(ReprError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let enc_cfg = EncoderConfig {
        obs_dim: data.obs_dim,
        n: data.n,
        conv: cfg.conv,
        hidden: cfg.hidden.clone(),
        activation: cfg.activation,
        contrastive_dim: cfg.contrastive_dim,
    };
    let mut enc = EncoderTriple::init(&enc_cfg, &mut rng)?;
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut adam_int = AdamState::new(&enc.spec_int, adam_cfg);
    let mut adam_ext = AdamState::new(&enc.spec_ext, adam_cfg);
    let mut adam_cont = AdamState::new(&enc.spec_cont, adam_cfg);
    let mut adam_stem = enc.stem.as_ref().map(|s| {
        (
            AdamState::for_params(&s.int, adam_cfg),
            AdamState::for_params(&s.ext, adam_cfg),
            AdamState::for_params(&s.cont, adam_cfg),
        )
    });

    let mut indices: Vec<usize> = (0..data.len()).collect();
    let mut metrics = Vec::with_capacity(cfg.epochs);
    let mut snapshots = Vec::new();
    let lcfg = cfg.loss_config();
    // Exponential moving average of the parameters, accumulated once the
    // warmup is over. Snapshots, hooks and the returned encoders all report
    // the average: the raw iterates orbit the optimum under the constant
    // learning rate, while their running average settles onto it.
    const EMA_DECAY: f64 = 0.95;
    let mut polyak: Option<EncoderTriple> = None;

    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut rng);
        let apply_ext = epoch > cfg.warmup_epochs;
        let mut sums = (0.0, 0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;

        for chunk in indices.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // InfoNCE needs at least one negative
            }
            let obs = gather(data, chunk, false);
            let obs_next = gather(data, chunk, true);
            let actions: Vec<PointN> = chunk.iter().map(|&i| data.action_f64(i)).collect();

            let (frame0, mut tapes0) = enc.forward_frame(&obs)?;
            let (frame1, mut tapes1) = enc.forward_frame(&obs_next)?;

            // Split on raw contrastive distances: the interaction cluster
            // sits far above the no-interaction bulk, where 2-means finds
            // it reliably even at a few percent positives (in log space the
            // bulk's long lower tail captures the threshold instead).
            let dw = pair_sq_distances(&frame0.w, &frame1.w);
            let classes = otsu_split(&dw)?;

            let z_logits = infonce_z_logits(&frame1.z_int);
            let points = sample_plus_points(cfg, &classes, &frame0, &actions, &mut rng);
            let mut g0 = FrameGrads::zeros_like(&frame0);
            let mut g1 = FrameGrads::zeros_like(&frame1);
            let terms = compute_batch(
                (&frame0, &frame1),
                &actions,
                &classes,
                &points,
                &z_logits,
                &lcfg,
                LossSelect::all(),
                apply_ext,
                Some((&mut g0, &mut g1)),
            )?;
            if !terms.total.is_finite() {
                return Err(ReprError::NonFiniteLoss {
                    epoch,
                    batch: batches,
                    detail: format!("{terms:?}"),
                });
            }

            let grads = backward_frames(&enc, (&mut tapes0, &mut tapes1), (&g0, &g1))?;
            adam_step(&mut adam_int, &mut enc.params_int, &grads.int);
            adam_step(&mut adam_ext, &mut enc.params_ext, &grads.ext);
            adam_step(&mut adam_cont, &mut enc.params_cont, &grads.cont);
            if let (Some(states), Some(stem_grads), Some(stem)) =
                (adam_stem.as_mut(), grads.stem.as_ref(), enc.stem.as_mut())
            {
                adam_step(&mut states.0, &mut stem.int, &stem_grads.0);
                adam_step(&mut states.1, &mut stem.ext, &stem_grads.1);
                adam_step(&mut states.2, &mut stem.cont, &stem_grads.2);
            }

            sums.0 += terms.loss_int;
            sums.1 += terms.loss_ext;
            sums.2 += terms.loss_cont;
            sums.3 += classes.threshold;
            sums.4 += classes.cplus_fraction();
            batches += 1;
        }

        let denom = batches.max(1) as f64;
        metrics.push(EpochMetrics {
            epoch,
            loss_int: sums.0 / denom,
            loss_ext: sums.1 / denom,
            loss_cont: sums.2 / denom,
            otsu_threshold: sums.3 / denom,
            cplus_fraction: sums.4 / denom,
        });

        if epoch > cfg.warmup_epochs {
            match polyak.as_mut() {
                None => polyak = Some(enc.clone()),
                Some(avg) => {
                    let w = 1.0 - EMA_DECAY;
                    average_into(&mut avg.params_int, &enc.params_int, w);
                    average_into(&mut avg.params_ext, &enc.params_ext, w);
                    average_into(&mut avg.params_cont, &enc.params_cont, w);
                    if let (Some(avg_stem), Some(stem)) = (avg.stem.as_mut(), enc.stem.as_ref()) {
                        average_into(&mut avg_stem.int, &stem.int, w);
                        average_into(&mut avg_stem.ext, &stem.ext, w);
                        average_into(&mut avg_stem.cont, &stem.cont, w);
                    }
                }
            }
        }
        let reported = polyak.as_ref().unwrap_or(&enc);
        if opts.snapshot_epochs.contains(&epoch) {
            snapshots.push((epoch, reported.clone()));
        }
        if let Some(hook) = opts.epoch_hook.as_mut() {
            hook(epoch, reported);
        }
    }

    Ok(TrainOutcome {
        encoders: polyak.unwrap_or(enc),
        metrics,
        snapshots,
    })
}

/// In-place running mean: `avg += (new − avg) · w`.
fn average_into(avg: &mut crate::diff::MlpParams, new: &crate::diff::MlpParams, w: f64) {
    for (a, n) in avg.weights.iter_mut().zip(&new.weights) {
        for (x, y) in a.data_mut().iter_mut().zip(n.data()) {
            *x += (y - *x) * w;
        }
    }
    for (a, n) in avg.biases.iter_mut().zip(&new.biases) {
        for (x, y) in a.iter_mut().zip(n) {
            *x += (y - *x) * w;
        }
    }
}

fn gather(data: &Dataset, idx: &[usize], next: bool) -> Tensor {
    let dim = data.obs_dim;
    let mut t = Tensor::zeros(idx.len(), dim);
    for (r, &i) in idx.iter().enumerate() {
        let src = if next { data.obs_next(i) } else { data.obs(i) };
        for (dst, &v) in t.row_mut(r).iter_mut().zip(src) {
            *dst = v as f64;
        }
    }
    t
}

/// Squared contrastive distances d_W(w, w′) per triple.
fn pair_sq_distances(w: &Tensor, w_next: &Tensor) -> Vec<f64> {
    (0..w.rows())
        .map(|i| {
            w.row(i)
                .iter()
                .zip(w_next.row(i))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect()
}

/// Realized Monte Carlo points on the latent segments, one batch per C+
/// triple (empty for C− and in deterministic mode). The points are batch
/// constants of the loss — they are sampled from the current encodings and
/// do not carry gradients back into the agent head.
fn sample_plus_points(
    cfg: &TrainConfig,
    classes: &BatchClasses,
    frame0: &Frame,
    actions: &[PointN],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<PointN>> {
    classes
        .labels
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            if cfg.mode == LossMode::Stochastic && class == Class::CPlus {
                let ts: Vec<f64> = (0..cfg.mc_samples)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect();
                segment_points(&frame0.z_int_point(i), &actions[i], &ts)
            } else {
                Vec::new()
            }
        })
        .collect()
}

/// Loss terms (and optionally output-side gradients) for one encoded batch.
/// Gradients are for the batch MEAN of each selected term. `z_logits` holds
/// the constant agent pair distances entering the InfoNCE denominator;
/// `plus_points` holds the realized Monte Carlo segment samples per triple.
#[allow(clippy::too_many_arguments)]
pub(crate) fn compute_batch(
    frames: (&Frame, &Frame),
    actions: &[PointN],
    classes: &BatchClasses,
    plus_points: &[Vec<PointN>],
    z_logits: &[f64],
    lcfg: &LossConfig,
    select: LossSelect,
    apply_ext_grads: bool,
    mut grads: Option<(&mut FrameGrads, &mut FrameGrads)>,
) -> Result<BatchLossTerms, ReprError> {
    let (f0, f1) = frames;
    let b = f0.len();
    if b != f1.len() || b != actions.len() || b != classes.labels.len() || b != plus_points.len() {
        return Err(ReprError::DimMismatch {
            what: "batch arrays",
            expected: b,
            got: actions.len().min(classes.labels.len()).min(plus_points.len()),
        });
    }
    let n = actions.first().map(|a| a.dim()).unwrap_or(0);
    let scale = 1.0 / b as f64;
    let mut terms = BatchLossTerms {
        loss_int: 0.0,
        loss_ext: 0.0,
        loss_cont: 0.0,
        total: 0.0,
    };

    if select.int {
        let mut sum = 0.0;
        for i in 0..b {
            let z0 = f0.z_int_point(i);
            let z1 = f1.z_int_point(i);
            let r = z1.sub(&z0).sub(&actions[i]);
            sum += r.norm_sq();
            if let Some((g0, g1)) = grads.as_mut() {
                for k in 0..n {
                    *g1.z_int.at_mut(i, k) += 2.0 * r.get(k) * scale;
                    *g0.z_int.at_mut(i, k) -= 2.0 * r.get(k) * scale;
                }
            }
        }
        terms.loss_int = sum * scale;
    }

    if select.cont {
        let sum = match grads.as_mut() {
            Some((g0, g1)) => {
                infonce_grads(&f0.w, z_logits, &f1.w, scale, Some((&mut g0.w, &mut g1.w)))?
            }
            None => infonce_grads(&f0.w, z_logits, &f1.w, 0.0, None)?,
        };
        terms.loss_cont = sum * scale;
    }

    if select.ext {
        let mut sum = 0.0;
        for i in 0..b {
            match classes.labels[i] {
                Class::CMinus => match lcfg.mode {
                    LossMode::Deterministic => {
                        let m0 = *f0.gaussians[i].mean();
                        let m1 = *f1.gaussians[i].mean();
                        let r = m0.sub(&m1);
                        sum += r.norm_sq();
                        if apply_ext_grads {
                            if let Some((g0, g1)) = grads.as_mut() {
                                for k in 0..n {
                                    *g0.ext_raw.at_mut(i, k) += 2.0 * r.get(k) * scale;
                                    *g1.ext_raw.at_mut(i, k) -= 2.0 * r.get(k) * scale;
                                }
                            }
                        }
                    }
                    LossMode::Stochastic => {
                        let (val, ga, gb) =
                            kl_mode_grads(&f0.gaussians[i], &f1.gaussians[i], lcfg.kl_mode);
                        sum += val;
                        if apply_ext_grads {
                            if let Some((g0, g1)) = grads.as_mut() {
                                accumulate_gauss(g0.ext_raw.row_mut(i), &ga, &f0.diag_grads[i], scale, n);
                                accumulate_gauss(g1.ext_raw.row_mut(i), &gb, &f1.diag_grads[i], scale, n);
                            }
                        }
                    }
                },
                Class::CPlus => match lcfg.mode {
                    LossMode::Deterministic => {
                        let mean = *f0.gaussians[i].mean();
                        let z0 = f0.z_int_point(i);
                        let (val, d_mean, d_z) = plus_det_grads(&mean, &z0, &actions[i]);
                        sum += val;
                        if apply_ext_grads {
                            if let Some((g0, _)) = grads.as_mut() {
                                for k in 0..n {
                                    *g0.ext_raw.at_mut(i, k) += d_mean.get(k) * scale;
                                    *g0.z_int.at_mut(i, k) += d_z.get(k) * scale;
                                }
                            }
                        }
                    }
                    LossMode::Stochastic => {
                        // A C+ triple without presampled points can only
                        // come from a caller-provided split; realize the
                        // degenerate fallback (the agent latent itself).
                        let fallback;
                        let points: &[PointN] = if plus_points[i].is_empty() {
                            fallback = [f0.z_int_point(i)];
                            &fallback
                        } else {
                            &plus_points[i]
                        };
                        let (val, gg) = plus_stoch_grads(&f0.gaussians[i], points);
                        sum += val;
                        if apply_ext_grads {
                            if let Some((g0, _)) = grads.as_mut() {
                                accumulate_gauss(g0.ext_raw.row_mut(i), &gg, &f0.diag_grads[i], scale, n);
                            }
                        }
                    }
                },
            }
        }
        terms.loss_ext = sum * scale;
    }

    terms.total = terms.loss_int + terms.loss_ext + terms.loss_cont;
    Ok(terms)
}

/// Chain a Gaussian-parameter gradient into the raw head layout
/// [mean(n) ‖ packed lower triangle], applying the softplus derivative on
/// diagonal entries.
fn accumulate_gauss(
    row: &mut [f64],
    gg: &GaussGrad,
    diag_grads: &[f64; MAX_DIM],
    scale: f64,
    n: usize,
) {
    for k in 0..n {
        row[k] += gg.d_mean.get(k) * scale;
    }
    let mut idx = n;
    for i in 0..n {
        for j in 0..=i {
            let chain = if i == j { diag_grads[i] } else { 1.0 };
            row[idx] += gg.d_factor[i][j] * chain * scale;
            idx += 1;
        }
    }
}

fn backward_frames(
    enc: &EncoderTriple,
    tapes: (&mut FrameTapes, &mut FrameTapes),
    grads: (&FrameGrads, &FrameGrads),
) -> Result<TripleGrads, ReprError> {
    let (t0, t1) = tapes;
    let (g0, g1) = grads;
    let int0 = backward(&enc.spec_int, &enc.params_int, &mut t0.int, &g0.z_int)?;
    let int1 = backward(&enc.spec_int, &enc.params_int, &mut t1.int, &g1.z_int)?;
    let ext0 = backward(&enc.spec_ext, &enc.params_ext, &mut t0.ext, &g0.ext_raw)?;
    let ext1 = backward(&enc.spec_ext, &enc.params_ext, &mut t1.ext, &g1.ext_raw)?;
    let cont0 = backward(&enc.spec_cont, &enc.params_cont, &mut t0.cont, &g0.w)?;
    let cont1 = backward(&enc.spec_cont, &enc.params_cont, &mut t1.cont, &g1.w)?;

    let stem = match enc.stem.as_ref() {
        None => None,
        Some(stem) => {
            // The dense nets' input gradients drive the conv stems.
            let run = |tape: &mut Option<crate::diff::ConvTape>, input_grads: &Tensor| {
                let tape = tape.as_mut().expect("conv tape present with stem");
                conv_backward(&stem.spec, tape, input_grads)
            };
            let mut s_int = mlp_grads_from(run(&mut t0.conv.int, &int0.input)?);
            add_params(&mut s_int, &run(&mut t1.conv.int, &int1.input)?);
            let mut s_ext = mlp_grads_from(run(&mut t0.conv.ext, &ext0.input)?);
            add_params(&mut s_ext, &run(&mut t1.conv.ext, &ext1.input)?);
            let mut s_cont = mlp_grads_from(run(&mut t0.conv.cont, &cont0.input)?);
            add_params(&mut s_cont, &run(&mut t1.conv.cont, &cont1.input)?);
            Some((s_int, s_ext, s_cont))
        }
    };

    let mut int = int0;
    int.add_assign(&int1);
    let mut ext = ext0;
    ext.add_assign(&ext1);
    let mut cont = cont0;
    cont.add_assign(&cont1);
    Ok(TripleGrads {
        int,
        ext,
        cont,
        stem,
    })
}

fn mlp_grads_from(params: MlpParams) -> MlpGrads {
    MlpGrads {
        weights: params.weights,
        biases: params.biases,
        input: Tensor::zeros(0, 0),
    }
}

fn add_params(dst: &mut MlpGrads, src: &MlpParams) {
    for (a, b) in dst.weights.iter_mut().zip(&src.weights) {
        for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
            *x += y;
        }
    }
    for (a, b) in dst.biases.iter_mut().zip(&src.biases) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// Loss terms for an explicit batch. The class split, the realized Monte
/// Carlo segment points, and (optionally) frozen InfoNCE agent logits are
/// supplied by the caller — they are constants of the batch, so values are
/// exactly reproducible and differentiation is well defined.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss(
    enc: &EncoderTriple,
    obs: &Tensor,
    obs_next: &Tensor,
    actions: &[PointN],
    lcfg: &LossConfig,
    select: LossSelect,
    classes: &BatchClasses,
    plus_points: &[Vec<PointN>],
    frozen_z_logits: Option<&[f64]>,
) -> Result<BatchLossTerms, ReprError> {
    let (f0, _) = enc.forward_frame(obs)?;
    let (f1, _) = enc.forward_frame(obs_next)?;
    let z_logits = match frozen_z_logits {
        Some(z) => z.to_vec(),
        None => infonce_z_logits(&f1.z_int),
    };
    compute_batch(
        (&f0, &f1),
        actions,
        classes,
        plus_points,
        &z_logits,
        lcfg,
        select,
        true,
        None,
    )
}

/// As [`batch_loss`], also returning parameter gradients of the selected
/// total.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss_and_grads(
    enc: &EncoderTriple,
    obs: &Tensor,
    obs_next: &Tensor,
    actions: &[PointN],
    lcfg: &LossConfig,
    select: LossSelect,
    classes: &BatchClasses,
    plus_points: &[Vec<PointN>],
    frozen_z_logits: Option<&[f64]>,
) -> Result<(BatchLossTerms, TripleGrads), ReprError> {
    let (f0, mut t0) = enc.forward_frame(obs)?;
    let (f1, mut t1) = enc.forward_frame(obs_next)?;
    let z_logits = match frozen_z_logits {
        Some(z) => z.to_vec(),
        None => infonce_z_logits(&f1.z_int),
    };
    let mut g0 = FrameGrads::zeros_like(&f0);
    let mut g1 = FrameGrads::zeros_like(&f1);
    let terms = compute_batch(
        (&f0, &f1),
        actions,
        classes,
        plus_points,
        &z_logits,
        lcfg,
        select,
        true,
        Some((&mut g0, &mut g1)),
    )?;
    let grads = backward_frames(enc, (&mut t0, &mut t1), (&g0, &g1))?;
    Ok((terms, grads))
}

/// Contrastive distances d_W(w, w′) for every record of a dataset, encoded
/// in chunks.
pub fn contrastive_distances(enc: &EncoderTriple, data: &Dataset) -> Result<Vec<f64>, ReprError> {
    let mut out = Vec::with_capacity(data.len());
    let chunk = 512;
    let mut start = 0;
    while start < data.len() {
        let idx: Vec<usize> = (start..(start + chunk).min(data.len())).collect();
        let (f0, _) = enc.forward_frame(&gather(data, &idx, false))?;
        let (f1, _) = enc.forward_frame(&gather(data, &idx, true))?;
        out.extend(pair_sq_distances(&f0.w, &f1.w));
        start += chunk;
    }
    Ok(out)
}

/// Otsu split of a whole dataset by contrastive distance.
pub fn split_dataset(enc: &EncoderTriple, data: &Dataset) -> Result<BatchClasses, ReprError> {
    let dw = contrastive_distances(enc, data)?;
    otsu_split(&dw)
}
