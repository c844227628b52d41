use super::{sample_action, sample_state, step, Emitter, EnvError, WorldConfig, WorldState};
use crate::geom::PointN;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Transition records as the learner sees them: observations and actions in
/// 32-bit floats (the on-disk format), no ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub obs_dim: usize,
    obs: Vec<f32>,
    act: Vec<f32>,
    obs_next: Vec<f32>,
}

impl Dataset {
    pub fn new(n: usize, obs_dim: usize) -> Self {
        Self {
            n,
            obs_dim,
            obs: Vec::new(),
            act: Vec::new(),
            obs_next: Vec::new(),
        }
    }

    pub fn from_parts(
        n: usize,
        obs_dim: usize,
        obs: Vec<f32>,
        act: Vec<f32>,
        obs_next: Vec<f32>,
    ) -> Result<Self, EnvError> {
        if obs.len() % obs_dim != 0
            || obs_next.len() != obs.len()
            || act.len() / n != obs.len() / obs_dim
            || act.len() % n != 0
        {
            return Err(EnvError::BadData("record arrays have mismatched sizes".into()));
        }
        Ok(Self {
            n,
            obs_dim,
            obs,
            act,
            obs_next,
        })
    }

    pub fn len(&self) -> usize {
        self.obs.len() / self.obs_dim
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }

    pub fn obs(&self, i: usize) -> &[f32] {
        &self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f32] {
        &self.act[i * self.n..(i + 1) * self.n]
    }

    pub fn obs_next(&self, i: usize) -> &[f32] {
        &self.obs_next[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action_f64(&self, i: usize) -> PointN {
        let a = self.action(i);
        let vals: Vec<f64> = a.iter().map(|&v| v as f64).collect();
        PointN::new(&vals).expect("action dimension within range")
    }

    fn push(&mut self, obs: &[f64], act: &PointN, obs_next: &[f64]) {
        self.obs.extend(obs.iter().map(|&v| v as f32));
        self.act.extend(act.as_slice().iter().map(|&v| v as f32));
        self.obs_next.extend(obs_next.iter().map(|&v| v as f32));
    }

    /// Flat little-endian serialization: per record obs ‖ a ‖ obs′.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.len() * (2 * self.obs_dim + self.n) * 4);
        for i in 0..self.len() {
            for v in self.obs(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in self.action(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in self.obs_next(i) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(n: usize, obs_dim: usize, bytes: &[u8]) -> Result<Self, EnvError> {
        let record = (2 * obs_dim + n) * 4;
        if record == 0 || bytes.len() % record != 0 {
            return Err(EnvError::BadData(format!(
                "record file length {} is not a multiple of the record size {record}",
                bytes.len()
            )));
        }
        let count = bytes.len() / record;
        let mut ds = Dataset::new(n, obs_dim);
        let read_f32 = |chunk: &[u8]| f32::from_le_bytes(chunk.try_into().unwrap());
        for r in 0..count {
            let base = r * record;
            let mut off = base;
            for _ in 0..obs_dim {
                ds.obs.push(read_f32(&bytes[off..off + 4]));
                off += 4;
            }
            for _ in 0..n {
                ds.act.push(read_f32(&bytes[off..off + 4]));
                off += 4;
            }
            for _ in 0..obs_dim {
                ds.obs_next.push(read_f32(&bytes[off..off + 4]));
                off += 4;
            }
        }
        Ok(ds)
    }
}

/// Evaluation-only ground truth for one transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRecord {
    pub s: WorldState,
    pub s_next: WorldState,
    pub action: PointN,
    pub interacted: bool,
}

/// Ground-truth sidecar. Training code must never read this; the file is
/// stored separately and the training API does not accept the type.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TruthSidecar {
    pub records: Vec<TruthRecord>,
}

impl TruthSidecar {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn interaction_fraction(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.interacted).count() as f64 / self.records.len() as f64
    }
}

/// Per-record interaction labels from the truth sidecar.
pub fn ground_truth_labels(truth: &TruthSidecar) -> Vec<bool> {
    truth.records.iter().map(|r| r.interacted).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenReport {
    pub records: usize,
    pub interaction_fraction: f64,
}

/// Generate `count` transition triples from a single persistent random walk.
///
/// Actions are quantized to f32 before stepping so the on-disk records
/// reproduce the rollout exactly. Deterministic in (config, seed).
pub fn generate_dataset(
    cfg: &WorldConfig,
    count: usize,
    seed: u64,
) -> Result<(Dataset, TruthSidecar, GenReport), EnvError> {
    generate_dataset_chunked(cfg, count, seed, 1)
}

/// Chunked variant: the rollout is split into `chunks` independent seeded
/// random walks generated in parallel and concatenated in chunk order, so
/// the output is identical no matter how threads are scheduled.
pub fn generate_dataset_chunked(
    cfg: &WorldConfig,
    count: usize,
    seed: u64,
    chunks: usize,
) -> Result<(Dataset, TruthSidecar, GenReport), EnvError> {
    if count == 0 {
        return Err(EnvError::InvalidConfig {
            field: "records",
            msg: "dataset must contain at least one record".into(),
        });
    }
    let chunks = chunks.clamp(1, count);
    cfg.validate()?;
    let emitter = Emitter::new(cfg)?;

    let mut sizes = vec![count / chunks; chunks];
    for s in sizes.iter_mut().take(count % chunks) {
        *s += 1;
    }

    let mut results: Vec<Option<(Dataset, TruthSidecar)>> = Vec::new();
    results.resize_with(chunks, || None);

    if chunks == 1 {
        results[0] = Some(rollout(cfg, &emitter, sizes[0], seed)?);
    } else {
        std::thread::scope(|scope| -> Result<(), EnvError> {
            let mut handles = Vec::new();
            for (idx, &size) in sizes.iter().enumerate() {
                let emitter = &emitter;
                handles.push((
                    idx,
                    scope.spawn(move || rollout(cfg, emitter, size, seed.wrapping_add(idx as u64))),
                ));
            }
            for (idx, handle) in handles {
                results[idx] = Some(handle.join().expect("rollout thread panicked")?);
            }
            Ok(())
        })?;
    }

    let mut data = Dataset::new(cfg.n, emitter.obs_dim());
    let mut truth = TruthSidecar::default();
    for r in results.into_iter().flatten() {
        data.obs.extend(r.0.obs);
        data.act.extend(r.0.act);
        data.obs_next.extend(r.0.obs_next);
        truth.records.extend(r.1.records);
    }
    let report = GenReport {
        records: data.len(),
        interaction_fraction: truth.interaction_fraction(),
    };
    Ok((data, truth, report))
}

fn rollout(
    cfg: &WorldConfig,
    emitter: &Emitter,
    count: usize,
    seed: u64,
) -> Result<(Dataset, TruthSidecar), EnvError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Dataset::new(cfg.n, emitter.obs_dim());
    let mut truth = TruthSidecar::default();
    let mut state = sample_state(cfg, &mut rng);
    let mut obs = emitter.emit(&state);
    while truth.records.len() < count {
        // Quantize the action to f32 so the stored record replays exactly;
        // re-draw in the rare case rounding pushes the agent out of bounds.
        let action = loop {
            let a = sample_action(&state, &mut rng, cfg.max_step);
            let vals: Vec<f64> = a.as_slice().iter().map(|&v| (v as f32) as f64).collect();
            let q = PointN::new(&vals).expect("quantized action stays finite");
            if super::step::action_is_valid(&state, &q) {
                break q;
            }
        };
        let (next, interacted) = step(cfg, &state, &action, &mut rng)?;
        let obs_next = emitter.emit(&next);
        data.push(&obs, &action, &obs_next);
        truth.records.push(TruthRecord {
            s: state,
            s_next: next,
            action,
            interacted,
        });
        state = next;
        obs = obs_next;
    }
    Ok((data, truth))
}
