use super::{GeomError, PointN, Rotation, MAX_DIM};

/// Floor added to softplus-activated diagonal entries so the factor stays
/// invertible even when raw parameters underflow.
const DIAG_FLOOR: f64 = 1e-6;

/// Lower-triangular Cholesky-style factor with strictly positive diagonal.
/// The represented covariance is `L·Lᵀ`, symmetric positive definite by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriFactor {
    dim: usize,
    l: [[f64; MAX_DIM]; MAX_DIM],
}

impl TriFactor {
    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1 && dim <= MAX_DIM);
        let mut l = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in l.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self { dim, l }
    }

    /// Build from explicit lower-triangular rows (row-major, `rows[i][j]` for
    /// `j ≤ i`). Diagonal entries must be strictly positive.
    pub fn from_rows(dim: usize, rows: &[&[f64]]) -> Result<Self, GeomError> {
        if dim == 0 || dim > MAX_DIM || rows.len() != dim {
            return Err(GeomError::InvalidDimension(rows.len()));
        }
        let mut l = [[0.0; MAX_DIM]; MAX_DIM];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(GeomError::DimensionMismatch(row.len(), i + 1));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(GeomError::NonFinite("factor entry"));
                }
                l[i][j] = v;
            }
            if l[i][i] <= 0.0 {
                return Err(GeomError::InvalidBody(format!(
                    "factor diagonal must be strictly positive, got {}",
                    l[i][i]
                )));
            }
        }
        Ok(Self { dim, l })
    }

    /// Cholesky factorization of an explicit SPD covariance.
    pub fn from_covariance(
        dim: usize,
        cov: &[[f64; MAX_DIM]; MAX_DIM],
    ) -> Result<Self, GeomError> {
        if dim == 0 || dim > MAX_DIM {
            return Err(GeomError::InvalidDimension(dim));
        }
        let mut l = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..dim {
            for j in 0..=i {
                let mut acc = cov[i][j];
                for k in 0..j {
                    acc -= l[i][k] * l[j][k];
                }
                if i == j {
                    if acc <= 0.0 {
                        return Err(GeomError::InvalidBody(
                            "covariance is not positive definite".into(),
                        ));
                    }
                    l[i][j] = acc.sqrt();
                } else {
                    l[i][j] = acc / l[j][j];
                }
            }
        }
        Ok(Self { dim, l })
    }

    /// Map unconstrained raw parameters (packed row-major lower triangle)
    /// into a valid factor: off-diagonal entries pass through, diagonal
    /// entries go through softplus plus a small floor.
    ///
    /// Also returns d(diagonal)/d(raw) — the softplus derivative — which the
    /// training code chains through.
    pub fn from_unconstrained(dim: usize, raw: &[f64]) -> (Self, [f64; MAX_DIM]) {
        assert_eq!(raw.len(), dim * (dim + 1) / 2);
        let mut l = [[0.0; MAX_DIM]; MAX_DIM];
        let mut diag_grad = [0.0; MAX_DIM];
        let mut k = 0;
        for i in 0..dim {
            for j in 0..=i {
                if i == j {
                    l[i][j] = softplus(raw[k]) + DIAG_FLOOR;
                    diag_grad[i] = sigmoid(raw[k]);
                } else {
                    l[i][j] = raw[k];
                }
                k += 1;
            }
        }
        (Self { dim, l }, diag_grad)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.l[i][j]
    }

    /// Σ_i ln L_ii — half the log-determinant of the covariance.
    pub fn log_det(&self) -> f64 {
        (0..self.dim).map(|i| self.l[i][i].ln()).sum()
    }

    /// Solve `L y = b` by forward substitution.
    pub fn solve(&self, b: &PointN) -> PointN {
        let mut y = PointN::zeros(self.dim);
        for i in 0..self.dim {
            let mut acc = b.get(i);
            for j in 0..i {
                acc -= self.l[i][j] * y.get(j);
            }
            y.set(i, acc / self.l[i][i]);
        }
        y
    }

    /// Solve `Lᵀ y = b` by back substitution.
    pub fn solve_transpose(&self, b: &PointN) -> PointN {
        let mut y = PointN::zeros(self.dim);
        for i in (0..self.dim).rev() {
            let mut acc = b.get(i);
            for j in (i + 1)..self.dim {
                acc -= self.l[j][i] * y.get(j);
            }
            y.set(i, acc / self.l[i][i]);
        }
        y
    }

    /// `M = self⁻¹ · other`, column by column (M is again lower-triangular).
    pub fn solve_factor(&self, other: &TriFactor) -> [[f64; MAX_DIM]; MAX_DIM] {
        debug_assert_eq!(self.dim, other.dim);
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for col in 0..self.dim {
            for i in 0..self.dim {
                let mut acc = other.l[i][col];
                for j in 0..i {
                    acc -= self.l[i][j] * m[j][col];
                }
                m[i][col] = acc / self.l[i][i];
            }
        }
        m
    }

    pub fn cov(&self) -> [[f64; MAX_DIM]; MAX_DIM] {
        let mut c = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..self.dim {
            for j in 0..self.dim {
                let mut acc = 0.0;
                for k in 0..=i.min(j) {
                    acc += self.l[i][k] * self.l[j][k];
                }
                c[i][j] = acc;
            }
        }
        c
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// A Gaussian latent: mean plus SPD covariance in factored form. This is the
/// stochastic output of the object encoder; the covariance plays the role of
/// the object's inertia ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentGaussian {
    mean: PointN,
    factor: TriFactor,
}

impl LatentGaussian {
    pub fn new(mean: PointN, factor: TriFactor) -> Result<Self, GeomError> {
        if mean.dim() != factor.dim() {
            return Err(GeomError::DimensionMismatch(mean.dim(), factor.dim()));
        }
        Ok(Self { mean, factor })
    }

    pub fn isotropic(mean: PointN, sigma: f64) -> Self {
        let dim = mean.dim();
        let mut factor = TriFactor::identity(dim);
        for i in 0..dim {
            factor.l[i][i] = sigma;
        }
        Self { mean, factor }
    }

    /// Build from raw encoder outputs; see [`TriFactor::from_unconstrained`].
    pub fn from_unconstrained(mean: &[f64], raw_tri: &[f64]) -> (Self, [f64; MAX_DIM]) {
        let mean = PointN::new(mean).expect("mean within supported dimensions");
        let (factor, diag_grad) = TriFactor::from_unconstrained(mean.dim(), raw_tri);
        (Self { mean, factor }, diag_grad)
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn mean(&self) -> &PointN {
        &self.mean
    }

    pub fn factor(&self) -> &TriFactor {
        &self.factor
    }

    pub fn cov(&self) -> [[f64; MAX_DIM]; MAX_DIM] {
        self.factor.cov()
    }
}

/// Closed-form KL divergence `KL(g1 ‖ g2)` between multivariate Gaussians.
///
/// Computed via triangular solves against the covariance factors; the result
/// is clamped at zero against rounding for near-identical inputs.
pub fn kl_gaussian(g1: &LatentGaussian, g2: &LatentGaussian) -> f64 {
    debug_assert_eq!(g1.dim(), g2.dim());
    let n = g1.dim();
    let m = g2.factor.solve_factor(&g1.factor);
    let mut frob = 0.0;
    for row in m.iter().take(n) {
        for &v in row.iter().take(n) {
            frob += v * v;
        }
    }
    let r = g1.mean.sub(&g2.mean);
    let y = g2.factor.solve(&r);
    let val = 0.5 * (frob + y.norm_sq() - n as f64) + g2.factor.log_det() - g1.factor.log_det();
    val.max(0.0)
}

/// Negative log-likelihood of `x` under the Gaussian `g`.
pub fn nll_gaussian(g: &LatentGaussian, x: &PointN) -> f64 {
    debug_assert_eq!(g.dim(), x.dim());
    let n = g.dim() as f64;
    let r = x.sub(&g.mean);
    let y = g.factor.solve(&r);
    0.5 * y.norm_sq() + g.factor.log_det() + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

/// Orthonormal diagonalization of a Gaussian covariance.
#[derive(Debug, Clone)]
pub struct PrincipalAxes {
    /// Columns are the principal axes, det +1.
    pub rotation: Rotation,
    /// Standard deviations along the axes, sorted descending;
    /// `rotation · diag(scales²) · rotationᵀ` reconstructs the covariance.
    pub scales: Vec<f64>,
    /// False when the covariance is near-isotropic (max/min scale ratio
    /// below 1 + 1e−6), in which case the frame is arbitrary.
    pub orientation_defined: bool,
}

/// Diagonalize the covariance of `g` into an SO(n) frame and per-axis scales.
///
/// Axes are sorted by descending scale; each axis has its first nonzero
/// component made positive, and the last axis is flipped if needed to land in
/// SO(n).
pub fn principal_axes(g: &LatentGaussian) -> PrincipalAxes {
    let n = g.dim();
    let cov = g.cov();
    let (mut eigvals, mut eigvecs) = match n {
        1 => (vec![cov[0][0]], vec![vec![1.0]]),
        2 => eig_sym_2(&cov),
        _ => eig_sym_3_jacobi(&cov),
    };

    // Sort descending by eigenvalue (insertion sort; n ≤ 3).
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap());
    eigvals = order.iter().map(|&i| eigvals[i]).collect();
    eigvecs = order.iter().map(|&i| eigvecs[i].clone()).collect();

    // Sign convention: first component of magnitude above threshold positive.
    for v in eigvecs.iter_mut() {
        let lead = v.iter().find(|c| c.abs() > 1e-12).copied().unwrap_or(1.0);
        if lead < 0.0 {
            for c in v.iter_mut() {
                *c = -*c;
            }
        }
    }

    let mut m = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for (j, v) in eigvecs.iter().enumerate() {
        for i in 0..n {
            m[i][j] = v[i];
        }
    }
    let mut rotation = Rotation::from_rows_unchecked(n, m);
    if rotation.det() < 0.0 {
        let mut m = m;
        for row in m.iter_mut().take(n) {
            row[n - 1] = -row[n - 1];
        }
        rotation = Rotation::from_rows_unchecked(n, m);
    }

    let scales: Vec<f64> = eigvals.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let ratio = scales[0] / scales[n - 1].max(f64::MIN_POSITIVE);
    PrincipalAxes {
        rotation,
        scales,
        orientation_defined: n > 1 && ratio >= 1.0 + 1e-6,
    }
}

/// Closed-form eigen decomposition of a symmetric 2×2 matrix.
fn eig_sym_2(c: &[[f64; MAX_DIM]; MAX_DIM]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (a, b, d) = (c[0][0], c[0][1], c[1][1]);
    let half_diff = 0.5 * (a - d);
    let disc = (half_diff * half_diff + b * b).sqrt();
    let mid = 0.5 * (a + d);
    let l1 = mid + disc;
    let l2 = mid - disc;
    let v1 = if b.abs() > 1e-300 {
        normalize2(b, l1 - a)
    } else if a >= d {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let v2 = (-v1.1, v1.0);
    (
        vec![l1, l2],
        vec![vec![v1.0, v1.1], vec![v2.0, v2.1]],
    )
}

fn normalize2(x: f64, y: f64) -> (f64, f64) {
    let norm = (x * x + y * y).sqrt();
    if norm == 0.0 {
        (1.0, 0.0)
    } else {
        (x / norm, y / norm)
    }
}

/// Cyclic Jacobi iteration for a symmetric 3×3 matrix.
fn eig_sym_3_jacobi(c: &[[f64; MAX_DIM]; MAX_DIM]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut a = *c;
    let mut v = [[0.0; MAX_DIM]; MAX_DIM];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-28 {
            break;
        }
        for p in 0..2 {
            for q in (p + 1)..3 {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let tau = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cos = 1.0 / (1.0 + t * t).sqrt();
                let sin = t * cos;
                for k in 0..3 {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = cos * akp - sin * akq;
                    a[k][q] = sin * akp + cos * akq;
                }
                for k in 0..3 {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = cos * apk - sin * aqk;
                    a[q][k] = sin * apk + cos * aqk;
                }
                for vk in v.iter_mut() {
                    let (vp, vq) = (vk[p], vk[q]);
                    vk[p] = cos * vp - sin * vq;
                    vk[q] = sin * vp + cos * vq;
                }
            }
        }
    }
    let eigvals = vec![a[0][0], a[1][1], a[2][2]];
    let eigvecs = (0..3)
        .map(|j| (0..3).map(|i| v[i][j]).collect())
        .collect();
    (eigvals, eigvecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian_1d(mu: f64, sigma: f64) -> LatentGaussian {
        LatentGaussian::new(
            PointN::new(&[mu]).unwrap(),
            TriFactor::from_rows(1, &[&[sigma]]).unwrap(),
        )
        .unwrap()
    }

    fn random_gaussian_2d(rng: &mut ChaCha8Rng) -> LatentGaussian {
        let mean = PointN::from_xy(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let factor = TriFactor::from_rows(
            2,
            &[
                &[rng.random_range(0.3..1.5)],
                &[rng.random_range(-0.8..0.8), rng.random_range(0.3..1.5)],
            ],
        )
        .unwrap();
        LatentGaussian::new(mean, factor).unwrap()
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + k as f64 * h);
        }
        acc * h / 3.0
    }

    fn pdf_1d(mu: f64, sigma: f64, x: f64) -> f64 {
        let z = (x - mu) / sigma;
        (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    fn log_pdf_1d(mu: f64, sigma: f64, x: f64) -> f64 {
        let z = (x - mu) / sigma;
        -0.5 * z * z - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }

    #[test]
    fn kl_identical_is_exactly_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let g = random_gaussian_2d(&mut rng);
            assert_eq!(kl_gaussian(&g, &g), 0.0);
        }
    }

    #[test]
    fn kl_1d_matches_quadrature() {
        // KL(N(0,1) ‖ N(1,1)) against numerical integration of p·log(p/q).
        let g1 = gaussian_1d(0.0, 1.0);
        let g2 = gaussian_1d(1.0, 1.0);
        let f = |x: f64| {
            let p = pdf_1d(0.0, 1.0, x);
            let q = pdf_1d(1.0, 1.0, x);
            p * (p / q).ln()
        };
        let oracle = simpson(f, -20.0, 21.0, 200_000);
        let val = kl_gaussian(&g1, &g2);
        assert!((val - oracle).abs() < 1e-6, "val={val} oracle={oracle}");
        // Also the hand value 1/2 for this pair.
        assert!((val - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_1d_random_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let (m1, s1) = (rng.random_range(-1.0..1.0), rng.random_range(0.4..1.6));
            let (m2, s2) = (rng.random_range(-1.0..1.0), rng.random_range(0.4..1.6));
            let g1 = gaussian_1d(m1, s1);
            let g2 = gaussian_1d(m2, s2);
            // Work in logs so tail underflow of q cannot blow up the ratio.
            let f = |x: f64| {
                let lp = log_pdf_1d(m1, s1, x);
                let lq = log_pdf_1d(m2, s2, x);
                lp.exp() * (lp - lq)
            };
            let lo = (m1.min(m2)) - 20.0 * s1.max(s2);
            let hi = (m1.max(m2)) + 20.0 * s1.max(s2);
            let oracle = simpson(f, lo, hi, 100_000);
            let val = kl_gaussian(&g1, &g2);
            assert!((val - oracle).abs() < 1e-4, "val={val} oracle={oracle}");
        }
    }

    #[test]
    fn kl_2d_diagonal_factorizes_over_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let (m1x, m1y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (m2x, m2y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let (s1x, s1y) = (rng.random_range(0.4..1.5), rng.random_range(0.4..1.5));
            let (s2x, s2y) = (rng.random_range(0.4..1.5), rng.random_range(0.4..1.5));
            let g1 = LatentGaussian::new(
                PointN::from_xy(m1x, m1y),
                TriFactor::from_rows(2, &[&[s1x], &[0.0, s1y]]).unwrap(),
            )
            .unwrap();
            let g2 = LatentGaussian::new(
                PointN::from_xy(m2x, m2y),
                TriFactor::from_rows(2, &[&[s2x], &[0.0, s2y]]).unwrap(),
            )
            .unwrap();
            let per_coord =
                kl_gaussian(&gaussian_1d(m1x, s1x), &gaussian_1d(m2x, s2x))
                    + kl_gaussian(&gaussian_1d(m1y, s1y), &gaussian_1d(m2y, s2y));
            let val = kl_gaussian(&g1, &g2);
            assert!((val - per_coord).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_nonnegative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let g1 = random_gaussian_2d(&mut rng);
            let g2 = random_gaussian_2d(&mut rng);
            assert!(kl_gaussian(&g1, &g2) >= 0.0);
        }
    }

    #[test]
    fn nll_standard_normal_at_origin() {
        let g = LatentGaussian::isotropic(PointN::from_xy(0.0, 0.0), 1.0);
        let val = nll_gaussian(&g, &PointN::from_xy(0.0, 0.0));
        assert!((val - (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_is_minimized_at_the_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for _ in 0..50 {
            let g = random_gaussian_2d(&mut rng);
            let at_mean = nll_gaussian(&g, g.mean());
            for _ in 0..10 {
                let off = PointN::from_xy(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                );
                if off.norm_sq() < 1e-6 {
                    continue;
                }
                assert!(nll_gaussian(&g, &g.mean().add(&off)) > at_mean);
            }
        }
    }

    #[test]
    fn nll_matches_quadrature_normalization() {
        // Independent route: Mahalanobis form via the adjugate inverse plus a
        // normalization constant obtained by 2-D Simpson quadrature.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..5 {
            let g = random_gaussian_2d(&mut rng);
            let x = PointN::from_xy(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let c = g.cov();
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            let inv = [
                [c[1][1] / det, -c[0][1] / det],
                [-c[1][0] / det, c[0][0] / det],
            ];
            let quad_form = |p: &PointN| {
                let r = p.sub(g.mean());
                r.get(0) * (inv[0][0] * r.get(0) + inv[0][1] * r.get(1))
                    + r.get(1) * (inv[1][0] * r.get(0) + inv[1][1] * r.get(1))
            };
            // Z = ∬ exp(−q/2) over a wide box via tensor Simpson.
            let sx = c[0][0].sqrt() * 10.0;
            let sy = c[1][1].sqrt() * 10.0;
            let n = 400;
            let inner = |y: f64| {
                simpson(
                    |x0| {
                        let p = PointN::from_xy(x0, y);
                        (-0.5 * quad_form(&p)).exp()
                    },
                    g.mean().get(0) - sx,
                    g.mean().get(0) + sx,
                    n,
                )
            };
            let z = simpson(inner, g.mean().get(1) - sy, g.mean().get(1) + sy, n);
            let oracle = 0.5 * quad_form(&x) + z.ln();
            let val = nll_gaussian(&g, &x);
            assert!((val - oracle).abs() < 1e-3, "val={val} oracle={oracle}");
        }
    }

    #[test]
    fn principal_axes_identity_covariance_is_isotropic() {
        let g = LatentGaussian::isotropic(PointN::from_xy(0.0, 0.0), 1.0);
        let axes = principal_axes(&g);
        assert!(!axes.orientation_defined);
        assert!((axes.scales[0] - 1.0).abs() < 1e-12);
        assert!((axes.scales[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn principal_axes_already_diagonal() {
        // cov = diag(4, 1) → scales (2, 1), axes aligned with the grid.
        let g = LatentGaussian::new(
            PointN::from_xy(0.0, 0.0),
            TriFactor::from_rows(2, &[&[2.0], &[0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let axes = principal_axes(&g);
        assert!(axes.orientation_defined);
        assert!((axes.scales[0] - 2.0).abs() < 1e-12);
        assert!((axes.scales[1] - 1.0).abs() < 1e-12);
        assert!((axes.rotation.entry(0, 0).abs() - 1.0).abs() < 1e-12);
        assert!(axes.rotation.entry(1, 0).abs() < 1e-12);
    }

    #[test]
    fn principal_axes_reconstructs_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for dim in [2usize, 3] {
            for _ in 0..100 {
                let g = random_spd(dim, &mut rng);
                let axes = principal_axes(&g);
                let cov = g.cov();
                let r = &axes.rotation;
                assert!((r.det() - 1.0).abs() < 1e-9);
                for i in 0..dim {
                    for j in 0..dim {
                        let mut acc = 0.0;
                        for k in 0..dim {
                            acc += r.entry(i, k) * axes.scales[k] * axes.scales[k]
                                * r.entry(j, k);
                        }
                        assert!(
                            (acc - cov[i][j]).abs() < 1e-8,
                            "dim={dim} recon={acc} cov={}",
                            cov[i][j]
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn eigenvalues_match_characteristic_polynomial_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for _ in 0..100 {
            let g = random_spd(2, &mut rng);
            let axes = principal_axes(&g);
            let c = g.cov();
            // λ² − tr·λ + det = 0, solved directly.
            let tr = c[0][0] + c[1][1];
            let det = c[0][0] * c[1][1] - c[0][1] * c[1][0];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let roots = [tr / 2.0 + disc, tr / 2.0 - disc];
            for (scale, root) in axes.scales.iter().zip(roots) {
                assert!((scale * scale - root).abs() < 1e-8);
            }
        }
        for _ in 0..100 {
            let g = random_spd(3, &mut rng);
            let axes = principal_axes(&g);
            let c = g.cov();
            // Coefficients of λ³ − c2λ² + c1λ − c0.
            let c2 = c[0][0] + c[1][1] + c[2][2];
            let c1 = c[0][0] * c[1][1] - c[0][1] * c[1][0] + c[0][0] * c[2][2]
                - c[0][2] * c[2][0]
                + c[1][1] * c[2][2]
                - c[1][2] * c[2][1];
            let c0 = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
                - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
                + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
            let mut roots = cubic_roots_symmetric(c2, c1, c0);
            roots.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for (scale, root) in axes.scales.iter().zip(roots) {
                assert!(
                    (scale * scale - root).abs() < 1e-7,
                    "eig={} root={root}",
                    scale * scale
                );
            }
        }
    }

    fn random_spd(dim: usize, rng: &mut ChaCha8Rng) -> LatentGaussian {
        let mean = PointN::zeros(dim);
        let factor = match dim {
            2 => TriFactor::from_rows(
                2,
                &[
                    &[rng.random_range(0.3..1.5)],
                    &[rng.random_range(-0.8..0.8), rng.random_range(0.3..1.5)],
                ],
            )
            .unwrap(),
            _ => TriFactor::from_rows(
                3,
                &[
                    &[rng.random_range(0.3..1.5)],
                    &[rng.random_range(-0.8..0.8), rng.random_range(0.3..1.5)],
                    &[
                        rng.random_range(-0.8..0.8),
                        rng.random_range(-0.8..0.8),
                        rng.random_range(0.3..1.5),
                    ],
                ],
            )
            .unwrap(),
        };
        LatentGaussian::new(mean, factor).unwrap()
    }

    /// All-real cubic roots of λ³ − c2λ² + c1λ − c0 via the trigonometric
    /// method (valid for symmetric matrices).
    fn cubic_roots_symmetric(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
        let p = c1 - c2 * c2 / 3.0;
        let q = -2.0 * c2 * c2 * c2 / 27.0 + c2 * c1 / 3.0 - c0;
        let shift = c2 / 3.0;
        if p.abs() < 1e-14 {
            let r = (-q).cbrt();
            return vec![r + shift; 3];
        }
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| {
                m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift
            })
            .collect()
    }
}
