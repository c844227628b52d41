use super::{MlpGrads, MlpParams, Tensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Per-parameter first/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub cfg: AdamConfig,
    pub step: u64,
    m: MlpParams,
    v: MlpParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    /// Gradients contained NaN/Inf; parameters and moments left untouched.
    SkippedNonFinite,
}

impl AdamState {
    pub fn new(spec: &super::MlpSpec, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            step: 0,
            m: MlpParams::zeros_like(spec),
            v: MlpParams::zeros_like(spec),
        }
    }

    /// Moments shaped after an existing parameter set (e.g. a conv stem).
    pub fn for_params(params: &MlpParams, cfg: AdamConfig) -> Self {
        let zero = |p: &MlpParams| MlpParams {
            weights: p
                .weights
                .iter()
                .map(|w| Tensor::zeros(w.rows(), w.cols()))
                .collect(),
            biases: p.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        Self {
            cfg,
            step: 0,
            m: zero(params),
            v: zero(params),
        }
    }
}

/// One Adam update with bias correction. Non-finite gradients skip the step
/// entirely so a single bad batch cannot poison the moments.
pub fn adam_step(state: &mut AdamState, params: &mut MlpParams, grads: &MlpGrads) -> StepOutcome {
    if !grads.all_finite() {
        return StepOutcome::SkippedNonFinite;
    }
    state.step += 1;
    let t = state.step as i32;
    let c = state.cfg;
    let corr1 = 1.0 - c.beta1.powi(t);
    let corr2 = 1.0 - c.beta2.powi(t);

    let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = c.beta1 * *m + (1.0 - c.beta1) * g;
        *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
        let m_hat = *m / corr1;
        let v_hat = *v / corr2;
        *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
    };

    for l in 0..params.weights.len() {
        let gw: &Tensor = &grads.weights[l];
        for i in 0..gw.data().len() {
            update(
                &mut params.weights[l].data_mut()[i],
                gw.data()[i],
                &mut state.m.weights[l].data_mut()[i],
                &mut state.v.weights[l].data_mut()[i],
            );
        }
        for i in 0..grads.biases[l].len() {
            update(
                &mut params.biases[l][i],
                grads.biases[l][i],
                &mut state.m.biases[l][i],
                &mut state.v.biases[l][i],
            );
        }
    }
    StepOutcome::Applied
}
