use super::ReprError;
use crate::diff::Tensor;
use crate::geom::{
    closest_param, dist_point_segment, kl_gaussian, nll_gaussian, LatentGaussian, OpenSegment,
    PointN, MAX_DIM,
};

/// Which direction of KL replaces the squared distance in the invariance
/// loss. The symmetric mode sums both directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlMode {
    Forward,
    Reverse,
    Symmetric,
}

impl KlMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "forward" => Some(KlMode::Forward),
            "reverse" => Some(KlMode::Reverse),
            "symmetric" => Some(KlMode::Symmetric),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KlMode::Forward => "forward",
            KlMode::Reverse => "reverse",
            KlMode::Symmetric => "symmetric",
        }
    }
}

/// Equivariance loss: squared distance between the successor agent latent
/// and the translated one, `‖z_int′ − (z_int + a)‖²`.
pub fn loss_int(z_int: &PointN, a: &PointN, z_int_next: &PointN) -> f64 {
    z_int_next.dist_sq(&z_int.add(a))
}

/// No-interaction loss, deterministic form: squared distance of the object
/// means before and after the transition.
pub fn loss_minus_deterministic(mean: &PointN, mean_next: &PointN) -> f64 {
    mean.dist_sq(mean_next)
}

/// No-interaction loss, stochastic form: KL divergence between the object
/// Gaussians in the configured direction.
pub fn loss_minus_stochastic(g: &LatentGaussian, g_next: &LatentGaussian, mode: KlMode) -> f64 {
    match mode {
        KlMode::Forward => kl_gaussian(g, g_next),
        KlMode::Reverse => kl_gaussian(g_next, g),
        KlMode::Symmetric => kl_gaussian(g, g_next) + kl_gaussian(g_next, g),
    }
}

/// Interaction loss, deterministic form: squared distance from the object
/// mean to the latent swept segment ⌊z_int, z_int + a⌋. A zero action
/// degenerates to the distance to the single point `z_int`.
pub fn loss_plus_deterministic(mean: &PointN, z_int: &PointN, a: &PointN) -> f64 {
    dist_point_segment(mean, &OpenSegment::new(*z_int, *a))
}

/// Interaction loss, stochastic form: average negative log-likelihood of
/// points sampled uniformly on the latent segment, at the parameters `ts`
/// (the caller draws them so the estimate stays reproducible). A zero action
/// degenerates to the NLL of `z_int` itself.
///
/// The sampled points are Monte Carlo constants: gradients flow into the
/// Gaussian parameters, not back through the segment endpoints.
pub fn loss_plus_stochastic(g: &LatentGaussian, z_int: &PointN, a: &PointN, ts: &[f64]) -> f64 {
    let points = segment_points(z_int, a, ts);
    points.iter().map(|p| nll_gaussian(g, p)).sum::<f64>() / points.len() as f64
}

/// Realize uniform segment parameters as concrete latent points; a zero
/// action collapses to the single point `z_int`.
pub fn segment_points(z_int: &PointN, a: &PointN, ts: &[f64]) -> Vec<PointN> {
    if a.is_zero() || ts.is_empty() {
        return vec![*z_int];
    }
    let seg = OpenSegment::new(*z_int, *a);
    ts.iter().map(|&t| seg.point_at(t)).collect()
}

/// Pairwise squared distances of the successor agent latents, flattened
/// row-major (B×B). These enter the InfoNCE logits as constants of the
/// batch: the pair set is computed first and the loss is evaluated on it,
/// so the contrastive term steers `w` but never stretches the agent head
/// (equivariance alone pins that scale).
pub fn infonce_z_logits(z_int_next: &Tensor) -> Vec<f64> {
    let b = z_int_next.rows();
    let mut out = vec![0.0; b * b];
    for i in 0..b {
        for j in 0..b {
            out[i * b + j] = sq_dist(z_int_next.row(i), z_int_next.row(j));
        }
    }
    out
}

/// InfoNCE over a batch: per anchor `d_W(w, w′) + log Σ_j exp(−d_W(w′, w′_j)
/// − d(z_int′, z_int′_j))`, averaged over anchors. The sum marginalizes over
/// the batch's successor encodings and includes the anchor itself, so each
/// per-anchor term is nonnegative.
pub fn loss_infonce(w: &Tensor, z_int_next: &Tensor, w_next: &Tensor) -> Result<f64, ReprError> {
    let z_sq = infonce_z_logits(z_int_next);
    let total = infonce_grads(w, &z_sq, w_next, 0.0, None)?;
    Ok(total / w.rows() as f64)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Shared value/gradient path for InfoNCE. `z_sq` holds the constant agent
/// pair distances (see [`infonce_z_logits`]). Returns the SUM of per-anchor
/// losses; when `grads` is provided, accumulates d(sum)/d(w, w_next) scaled
/// by `scale`.
pub(crate) fn infonce_grads(
    w: &Tensor,
    z_sq: &[f64],
    w_next: &Tensor,
    scale: f64,
    mut grads: Option<(&mut Tensor, &mut Tensor)>,
) -> Result<f64, ReprError> {
    let b = w.rows();
    if b < 2 {
        return Err(ReprError::BatchTooSmall(b));
    }
    debug_assert_eq!(z_sq.len(), b * b);
    let mut total = 0.0;
    let mut logits = vec![0.0; b];
    let mut probs = vec![0.0; b];
    for i in 0..b {
        for (j, l) in logits.iter_mut().enumerate() {
            *l = -sq_dist(w_next.row(i), w_next.row(j)) - z_sq[i * b + j];
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut denom = 0.0;
        for (p, &l) in probs.iter_mut().zip(&logits) {
            *p = (l - max).exp();
            denom += *p;
        }
        let lse = max + denom.ln();
        total += sq_dist(w.row(i), w_next.row(i)) + lse;

        if let Some((gw, gwn)) = grads.as_mut() {
            for p in probs.iter_mut() {
                *p /= denom;
            }
            // Positive pair term.
            for k in 0..w.cols() {
                let d = 2.0 * (w.at(i, k) - w_next.at(i, k)) * scale;
                *gw.at_mut(i, k) += d;
                *gwn.at_mut(i, k) -= d;
            }
            // Softmax-weighted repulsion among successor codes.
            for (j, &p) in probs.iter().enumerate() {
                if j == i || p == 0.0 {
                    continue;
                }
                for k in 0..w_next.cols() {
                    let diff = w_next.at(i, k) - w_next.at(j, k);
                    let d = 2.0 * p * diff * scale;
                    *gwn.at_mut(i, k) -= d;
                    *gwn.at_mut(j, k) += d;
                }
            }
        }
    }
    Ok(total)
}

/// Gradient of a Gaussian-valued loss w.r.t. the Gaussian's parameters,
/// expressed in factor space (the training code chains the factor diagonal
/// through its softplus).
#[derive(Debug, Clone, Copy)]
pub(crate) struct GaussGrad {
    pub d_mean: PointN,
    pub d_factor: [[f64; MAX_DIM]; MAX_DIM],
}

impl GaussGrad {
    fn zeros(dim: usize) -> Self {
        Self {
            d_mean: PointN::zeros(dim),
            d_factor: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }
}

/// NLL value plus gradients w.r.t. the Gaussian parameters and the point.
pub(crate) fn nll_grads(g: &LatentGaussian, u: &PointN) -> (f64, GaussGrad, PointN) {
    let n = g.dim();
    let f = g.factor();
    let r = u.sub(g.mean());
    let y = f.solve(&r);
    let gr = f.solve_transpose(&y);
    let val = 0.5 * y.norm_sq() + f.log_det() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    let mut gg = GaussGrad::zeros(n);
    gg.d_mean = gr.scale(-1.0);
    for i in 0..n {
        for j in 0..=i {
            gg.d_factor[i][j] = -gr.get(i) * y.get(j);
        }
        gg.d_factor[i][i] += 1.0 / f.entry(i, i);
    }
    (val, gg, gr)
}

/// KL(g1 ‖ g2) value plus gradients w.r.t. both Gaussians' parameters.
pub(crate) fn kl_grads(g1: &LatentGaussian, g2: &LatentGaussian) -> (f64, GaussGrad, GaussGrad) {
    let n = g1.dim();
    let (f1, f2) = (g1.factor(), g2.factor());
    let m = f2.solve_factor(f1);
    let r = g1.mean().sub(g2.mean());
    let y = f2.solve(&r);
    let gr = f2.solve_transpose(&y);

    let mut frob = 0.0;
    for row in m.iter().take(n) {
        for &v in row.iter().take(n) {
            frob += v * v;
        }
    }
    let val = 0.5 * (frob + y.norm_sq() - n as f64) + f2.log_det() - f1.log_det();

    let mut g1g = GaussGrad::zeros(n);
    let mut g2g = GaussGrad::zeros(n);
    g1g.d_mean = gr;
    g2g.d_mean = gr.scale(-1.0);

    // d/dL1 = lower(L2⁻ᵀ M) − diag(1/L1_ii)
    let linv_t_m = solve_transpose_cols(f2, &m, n);
    for i in 0..n {
        for j in 0..=i {
            g1g.d_factor[i][j] = linv_t_m[i][j];
        }
        g1g.d_factor[i][i] -= 1.0 / f1.entry(i, i);
    }

    // d/dL2 = lower(−L2⁻ᵀ(M Mᵀ + y yᵀ)) + diag(1/L2_ii)
    let mut a = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            let mut acc = y.get(i) * y.get(j);
            for k in 0..n {
                acc += m[i][k] * m[j][k];
            }
            a[i][j] = acc;
        }
    }
    let linv_t_a = solve_transpose_cols(f2, &a, n);
    for i in 0..n {
        for j in 0..=i {
            g2g.d_factor[i][j] = -linv_t_a[i][j];
        }
        g2g.d_factor[i][i] += 1.0 / f2.entry(i, i);
    }
    (val.max(0.0), g1g, g2g)
}

/// KL in the configured direction, with gradients mapped back to
/// (first, second) argument order.
pub(crate) fn kl_mode_grads(
    g: &LatentGaussian,
    g_next: &LatentGaussian,
    mode: KlMode,
) -> (f64, GaussGrad, GaussGrad) {
    match mode {
        KlMode::Forward => kl_grads(g, g_next),
        KlMode::Reverse => {
            let (v, gn, gf) = kl_grads(g_next, g);
            (v, gf, gn)
        }
        KlMode::Symmetric => {
            let (v1, a1, b1) = kl_grads(g, g_next);
            let (v2, b2, a2) = kl_grads(g_next, g);
            let mut a = a1;
            let mut b = b1;
            add_gauss(&mut a, &a2);
            add_gauss(&mut b, &b2);
            (v1 + v2, a, b)
        }
    }
}

fn add_gauss(dst: &mut GaussGrad, src: &GaussGrad) {
    dst.d_mean = dst.d_mean.add(&src.d_mean);
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            dst.d_factor[i][j] += src.d_factor[i][j];
        }
    }
}

/// Solve L2ᵀ X = A column by column.
fn solve_transpose_cols(
    f: &crate::geom::TriFactor,
    a: &[[f64; MAX_DIM]; MAX_DIM],
    n: usize,
) -> [[f64; MAX_DIM]; MAX_DIM] {
    let mut out = [[0.0; MAX_DIM]; MAX_DIM];
    for j in 0..n {
        let mut col = PointN::zeros(n);
        for i in 0..n {
            col.set(i, a[i][j]);
        }
        let solved = f.solve_transpose(&col);
        for i in 0..n {
            out[i][j] = solved.get(i);
        }
    }
    out
}

/// Deterministic segment loss with gradients. At the clamped optimum the
/// envelope theorem lets us differentiate holding t* fixed.
pub(crate) fn plus_det_grads(mean: &PointN, z_int: &PointN, a: &PointN) -> (f64, PointN, PointN) {
    let seg = OpenSegment::new(*z_int, *a);
    let t = closest_param(mean, &seg).unwrap_or(0.0);
    let r = mean.sub(&seg.point_at(t));
    (r.norm_sq(), r.scale(2.0), r.scale(-2.0))
}

/// Stochastic segment loss with gradients: mean NLL over realized sample
/// points (Monte Carlo constants — no gradient into the segment).
pub(crate) fn plus_stoch_grads(g: &LatentGaussian, points: &[PointN]) -> (f64, GaussGrad) {
    debug_assert!(!points.is_empty());
    let n = g.dim();
    let scale = 1.0 / points.len() as f64;
    let mut total = 0.0;
    let mut acc = GaussGrad::zeros(n);
    for p in points {
        let (val, gg, _) = nll_grads(g, p);
        total += val;
        acc.d_mean = acc.d_mean.add(&gg.d_mean.scale(scale));
        for i in 0..n {
            for j in 0..=i {
                acc.d_factor[i][j] += gg.d_factor[i][j] * scale;
            }
        }
    }
    (total * scale, acc)
}
