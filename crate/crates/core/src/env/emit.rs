use super::{EmissionSpec, EnvError, WorldConfig, WorldState};
use crate::geom::{Body, PointN, Rotation};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Precompiled emission map. Construction draws any random ingredients
/// (scramble matrices, background pattern) from the spec's own seed, so the
/// map itself is a fixed deterministic function of the state.
pub struct Emitter {
    n: usize,
    body: Body,
    kind: Kind,
}

enum Kind {
    Identity,
    Scrambled { stages: Vec<Stage> },
    Raster {
        resolution: usize,
        channels: usize,
        background: Option<Vec<Bump>>,
    },
}

/// One linear stage of the scrambled emission: a matrix with orthonormal
/// columns (rows × cols, rows ≥ cols), hence injective.
struct Stage {
    rows: usize,
    cols: usize,
    m: Vec<f64>,
}

struct Bump {
    cx: f64,
    cy: f64,
    inv_two_sigma_sq: f64,
    amp: f64,
}

impl Emitter {
    pub fn new(cfg: &WorldConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let kind = match &cfg.emission {
            EmissionSpec::Identity => Kind::Identity,
            EmissionSpec::Scrambled {
                seed,
                out_dim,
                hidden,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let d0 = cfg.state_dim();
                let mut stages = Vec::new();
                // Square rotation first, then the injective lifts.
                stages.push(Stage::random_orthonormal(d0, d0, &mut rng));
                let mut prev = d0;
                for &w in hidden.iter().chain(std::iter::once(out_dim)) {
                    stages.push(Stage::random_orthonormal(w, prev, &mut rng));
                    prev = w;
                }
                Kind::Scrambled { stages }
            }
            EmissionSpec::Raster {
                resolution,
                channels,
                background_seed,
            } => Kind::Raster {
                resolution: *resolution,
                channels: *channels,
                background: background_seed.map(|seed| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    // Bumps scattered over a 3×3 copy of the view window, so
                    // the visible crop translates with the agent.
                    (0..25)
                        .map(|_| {
                            let sigma: f64 = rng.random_range(0.08..0.2);
                            Bump {
                                cx: rng.random_range(0.0..3.0),
                                cy: rng.random_range(0.0..3.0),
                                inv_two_sigma_sq: 1.0 / (2.0 * sigma * sigma),
                                amp: rng.random_range(0.4..1.0),
                            }
                        })
                        .collect()
                }),
            },
            EmissionSpec::RasterAnisotropic { resolution } => Kind::Raster {
                resolution: *resolution,
                channels: 3,
                background: None,
            },
        };
        Ok(Self {
            n: cfg.n,
            body: cfg.body.clone(),
            kind,
        })
    }

    pub fn obs_dim(&self) -> usize {
        match &self.kind {
            Kind::Identity => self.state_dim(),
            Kind::Scrambled { stages } => stages.last().unwrap().rows,
            Kind::Raster {
                resolution,
                channels,
                ..
            } => resolution * resolution * channels,
        }
    }

    fn state_dim(&self) -> usize {
        2 * self.n + if matches!(self.body, Body::Box { .. }) { 2 } else { 0 }
    }

    /// Raw state vector: s_int ‖ s_ext ‖ (cos 2θ, sin 2θ if oriented).
    /// The doubled angle matches the rectangle's half-turn symmetry, keeping
    /// the encoding continuous and injective on the canonical range [0, π).
    fn state_vector(&self, state: &WorldState) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.state_dim());
        v.extend_from_slice(state.s_int.as_slice());
        v.extend_from_slice(state.s_ext.as_slice());
        if let Some(theta) = state.orientation {
            v.push((2.0 * theta).cos());
            v.push((2.0 * theta).sin());
        }
        v
    }

    /// Deterministic, injective-on-reachable-states observation of a state.
    pub fn emit(&self, state: &WorldState) -> Vec<f64> {
        match &self.kind {
            Kind::Identity => self.state_vector(state),
            Kind::Scrambled { stages } => {
                let mut v = self.state_vector(state);
                for (i, stage) in stages.iter().enumerate() {
                    v = stage.apply(&v);
                    // Strictly monotone coordinatewise warp between stages.
                    if i + 1 < stages.len() {
                        for x in v.iter_mut() {
                            *x += 0.5 * (2.0 * *x).tanh();
                        }
                    }
                }
                v
            }
            Kind::Raster {
                resolution,
                channels,
                background,
            } => self.render(state, *resolution, *channels, background.as_deref()),
        }
    }

    fn render(
        &self,
        state: &WorldState,
        res: usize,
        channels: usize,
        background: Option<&[Bump]>,
    ) -> Vec<f64> {
        let mut img = vec![0.0; res * res * channels];
        let px = |i: usize| (i as f64 + 0.5) / res as f64;
        // Agent: a small Gaussian splat, sigma 1.3 pixels.
        let sigma_px = 1.3 / res as f64;
        let inv2s2 = 1.0 / (2.0 * sigma_px * sigma_px);
        let rot = state
            .orientation
            .map(Rotation::from_angle)
            .unwrap_or_else(|| Rotation::identity(2));
        // Smooth edge width for body coverage, ~0.7 pixel.
        let edge = 0.7 / res as f64;

        for iy in 0..res {
            for ix in 0..res {
                let p = PointN::from_xy(px(ix), px(iy));
                let base = (iy * res + ix) * channels;

                let agent_val = (-p.dist_sq(&state.s_int) * inv2s2).exp();
                let object_val = match &self.body {
                    // Wider splat than the agent's so the two stay
                    // distinguishable even in single-channel images.
                    Body::Point => (-p.dist_sq(&state.s_ext) * inv2s2 / 4.0).exp(),
                    Body::Disc { radius } => {
                        let d = p.dist_sq(&state.s_ext).sqrt();
                        smooth_step((radius - d) / edge)
                    }
                    Body::Box { half_extents } => {
                        let local = rot.apply_inverse(&p.sub(&state.s_ext));
                        let cx = smooth_step((half_extents.get(0) - local.get(0).abs()) / edge);
                        let cy = smooth_step((half_extents.get(1) - local.get(1).abs()) / edge);
                        cx * cy
                    }
                };

                if channels == 1 {
                    img[base] = agent_val + object_val;
                } else {
                    img[base] = agent_val;
                    img[base + 1] = object_val;
                }
                if let Some(bumps) = background {
                    // The field of view follows the agent: sample the fixed
                    // pattern at pixel + s_int.
                    let ux = p.get(0) + state.s_int.get(0);
                    let uy = p.get(1) + state.s_int.get(1);
                    let mut v = 0.0;
                    for b in bumps {
                        let dx = ux - b.cx;
                        let dy = uy - b.cy;
                        v += b.amp * (-(dx * dx + dy * dy) * b.inv_two_sigma_sq).exp();
                    }
                    img[base + 2] = v.min(1.0);
                }
            }
        }
        img
    }
}

/// Logistic ramp from 0 to 1; strictly monotone, so body edges stay
/// sub-pixel sensitive to the underlying state.
fn smooth_step(x: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * x).exp())
}

impl Stage {
    /// Random matrix with orthonormal columns via Gram-Schmidt on seeded
    /// Gaussian draws.
    fn random_orthonormal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(rows >= cols);
        let mut columns: Vec<Vec<f64>> = Vec::with_capacity(cols);
        while columns.len() < cols {
            let mut v: Vec<f64> = (0..rows).map(|_| gaussian(rng)).collect();
            for u in &columns {
                let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= dot * ui;
                }
            }
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-6 {
                continue;
            }
            for x in v.iter_mut() {
                *x /= norm;
            }
            columns.push(v);
        }
        let mut m = vec![0.0; rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[i * cols + j] = v;
            }
        }
        Self { rows, cols, m }
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.m[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; avoids an extra dependency for normal draws.
    let u1: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.random_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
