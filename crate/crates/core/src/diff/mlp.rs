use super::{DiffError, Tensor};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }

    fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed in terms of the post-activation value.
    fn grad_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

/// A named slice of the network's final linear layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Head {
    pub name: String,
    pub width: usize,
}

/// Architecture of a dense feedforward network. `widths` runs from the input
/// width through the hidden layers to the output width; hidden layers use
/// `activation`, the final layer is linear and is carved into `heads`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub heads: Vec<Head>,
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, heads: Vec<Head>) -> Self {
        Self {
            widths,
            activation,
            heads,
        }
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        if self.widths.len() < 2 {
            return Err(DiffError::InvalidSpec(
                "need at least input and output widths".into(),
            ));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(DiffError::InvalidSpec("zero-width layer".into()));
        }
        let head_sum: usize = self.heads.iter().map(|h| h.width).sum();
        if !self.heads.is_empty() && head_sum != self.out_width() {
            return Err(DiffError::InvalidSpec(format!(
                "head widths sum to {head_sum}, output width is {}",
                self.out_width()
            )));
        }
        Ok(())
    }

    pub fn in_width(&self) -> usize {
        self.widths[0]
    }

    pub fn out_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn layer_count(&self) -> usize {
        self.widths.len() - 1
    }

    /// Column range of a named head within the output layer.
    pub fn head_range(&self, name: &str) -> Option<std::ops::Range<usize>> {
        let mut start = 0;
        for h in &self.heads {
            if h.name == name {
                return Some(start..start + h.width);
            }
            start += h.width;
        }
        None
    }

    pub fn param_count(&self) -> usize {
        (1..self.widths.len())
            .map(|l| self.widths[l - 1] * self.widths[l] + self.widths[l])
            .sum()
    }
}

/// Weights and biases of one network. Weight `l` has shape
/// (widths[l] × widths[l+1]); bias `l` has length widths[l+1].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: Vec<Tensor>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// He-style uniform fan-in initialization: W ~ U(±√(6/fan_in)), b = 0.
    pub fn init(spec: &MlpSpec, rng: &mut impl Rng) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..spec.widths.len() {
            let fan_in = spec.widths[l - 1];
            let bound = (6.0 / fan_in as f64).sqrt();
            weights.push(Tensor::from_fn(fan_in, spec.widths[l], |_, _| {
                rng.random_range(-bound..bound)
            }));
            biases.push(vec![0.0; spec.widths[l]]);
        }
        Self { weights, biases }
    }

    pub fn zeros_like(spec: &MlpSpec) -> Self {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..spec.widths.len() {
            weights.push(Tensor::zeros(spec.widths[l - 1], spec.widths[l]));
            biases.push(vec![0.0; spec.widths[l]]);
        }
        Self { weights, biases }
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.data().len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Flatten in layer order (weights then bias per layer) for checkpoints
    /// and finite-difference sweeps.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn from_flat(spec: &MlpSpec, flat: &[f64]) -> Result<Self, DiffError> {
        if flat.len() != spec.param_count() {
            return Err(DiffError::ParamCount {
                expected: spec.param_count(),
                got: flat.len(),
            });
        }
        let mut params = Self::zeros_like(spec);
        let mut off = 0;
        for (w, b) in params.weights.iter_mut().zip(&mut params.biases) {
            let wn = w.data().len();
            w.data_mut().copy_from_slice(&flat[off..off + wn]);
            off += wn;
            let bn = b.len();
            b.copy_from_slice(&flat[off..off + bn]);
            off += bn;
        }
        Ok(params)
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.all_finite())
            && self
                .biases
                .iter()
                .all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Gradients with the same layout as [`MlpParams`], plus the gradient with
/// respect to the network input.
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Tensor>,
    pub biases: Vec<Vec<f64>>,
    pub input: Tensor,
}

impl MlpGrads {
    pub fn add_assign(&mut self, other: &MlpGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.all_finite())
            && self
                .biases
                .iter()
                .all(|b| b.iter().all(|v| v.is_finite()))
    }
}

/// Recorded intermediates of one forward pass. Consumed by [`backward`].
#[derive(Debug)]
pub struct Tape {
    input: Tensor,
    /// Post-activation values of each hidden layer.
    hidden: Vec<Tensor>,
    consumed: bool,
}

/// Run the network on a batch (rows are samples). Returns the linear output
/// layer and the tape of intermediates for the backward pass.
pub fn forward(spec: &MlpSpec, params: &MlpParams, batch: &Tensor) -> Result<(Tensor, Tape), DiffError> {
    if batch.cols() != spec.in_width() {
        return Err(DiffError::ShapeMismatch {
            expected: (batch.rows(), spec.in_width()),
            got: batch.shape(),
        });
    }
    let layers = spec.layer_count();
    let mut hidden: Vec<Tensor> = Vec::with_capacity(layers.saturating_sub(1));
    let mut current = batch;
    let mut out = Tensor::zeros(0, 0);
    for l in 0..layers {
        let mut z = current.matmul(&params.weights[l]);
        for r in 0..z.rows() {
            let row = z.row_mut(r);
            for (v, b) in row.iter_mut().zip(&params.biases[l]) {
                *v += b;
            }
        }
        if l + 1 < layers {
            for v in z.data_mut() {
                *v = spec.activation.apply(*v);
            }
            hidden.push(z);
            current = hidden.last().unwrap();
        } else {
            out = z;
        }
    }
    if !out.all_finite() {
        return Err(DiffError::NonFinite("forward outputs"));
    }
    Ok((
        out,
        Tape {
            input: batch.clone(),
            hidden,
            consumed: false,
        },
    ))
}

/// Reverse pass: gradients of a scalar loss w.r.t. parameters and input,
/// given dL/d(outputs). The tape is consumed; a second call errors.
pub fn backward(
    spec: &MlpSpec,
    params: &MlpParams,
    tape: &mut Tape,
    out_grads: &Tensor,
) -> Result<MlpGrads, DiffError> {
    if tape.consumed {
        return Err(DiffError::TapeConsumed);
    }
    tape.consumed = true;
    let layers = spec.layer_count();
    let expected_rows = tape.input.rows();
    if out_grads.shape() != (expected_rows, spec.out_width()) {
        return Err(DiffError::ShapeMismatch {
            expected: (expected_rows, spec.out_width()),
            got: out_grads.shape(),
        });
    }

    let mut grads_w: Vec<Tensor> = Vec::with_capacity(layers);
    let mut grads_b: Vec<Vec<f64>> = Vec::with_capacity(layers);
    let mut delta = out_grads.clone();

    for l in (0..layers).rev() {
        let layer_input: &Tensor = if l == 0 { &tape.input } else { &tape.hidden[l - 1] };
        grads_w.push(layer_input.t_matmul(&delta));
        let mut gb = vec![0.0; delta.cols()];
        for r in 0..delta.rows() {
            for (g, &d) in gb.iter_mut().zip(delta.row(r)) {
                *g += d;
            }
        }
        grads_b.push(gb);
        // Propagate through the linear map, then the activation of the layer
        // below (if any).
        delta = delta.matmul_t(&params.weights[l]);
        if l > 0 {
            let h = &tape.hidden[l - 1];
            for (d, &y) in delta.data_mut().iter_mut().zip(h.data()) {
                *d *= spec.activation.grad_from_output(y);
            }
        }
    }
    grads_w.reverse();
    grads_b.reverse();
    Ok(MlpGrads {
        weights: grads_w,
        biases: grads_b,
        input: delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(widths: &[usize]) -> MlpSpec {
        MlpSpec::new(widths.to_vec(), Activation::Relu, vec![])
    }

    #[test]
    fn zero_params_give_zero_output() {
        let s = spec(&[3, 4, 2]);
        let p = MlpParams::zeros_like(&s);
        let batch = Tensor::from_fn(5, 3, |r, c| (r * 3 + c) as f64);
        let (out, _) = forward(&s, &p, &batch).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_linear_layer_reproduces_affine_map() {
        let s = spec(&[2, 2]);
        let mut p = MlpParams::zeros_like(&s);
        // W = [[1, 2], [3, 4]], b = [0.5, -0.5]
        p.weights[0] = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        p.biases[0] = vec![0.5, -0.5];
        let x = Tensor::from_vec(1, 2, vec![10.0, 20.0]).unwrap();
        let (out, _) = forward(&s, &p, &x).unwrap();
        assert_eq!(out.data(), &[10.0 + 60.0 + 0.5, 20.0 + 80.0 - 0.5]);
    }

    /// Independent straightforward re-evaluation of a relu network, scalar
    /// style, used as a duplicate-implementation oracle.
    fn eval_scalar(s: &MlpSpec, p: &MlpParams, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        for l in 0..s.layer_count() {
            let w = &p.weights[l];
            let mut next = p.biases[l].clone();
            for (j, n) in next.iter_mut().enumerate() {
                for (i, &xi) in cur.iter().enumerate() {
                    *n += xi * w.at(i, j);
                }
            }
            if l + 1 < s.layer_count() {
                for v in next.iter_mut() {
                    *v = s.activation.apply(*v);
                }
            }
            cur = next;
        }
        cur
    }

    #[test]
    fn forward_matches_duplicate_implementation() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = spec(&[4, 7, 5, 3]);
        let p = MlpParams::init(&s, &mut rng);
        let batch = Tensor::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let (out, _) = forward(&s, &p, &batch).unwrap();
        for r in 0..batch.rows() {
            let expect = eval_scalar(&s, &p, batch.row(r));
            for (a, b) in out.row(r).iter().zip(&expect) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_mismatch_reports_both_shapes() {
        let s = spec(&[3, 2]);
        let p = MlpParams::zeros_like(&s);
        let batch = Tensor::zeros(4, 5);
        match forward(&s, &p, &batch) {
            Err(DiffError::ShapeMismatch { expected, got }) => {
                assert_eq!(expected, (4, 3));
                assert_eq!(got, (4, 5));
            }
            other => panic!("expected shape mismatch, got {other:?}"),
        }
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = spec(&[3, 5, 2]);
        let p = MlpParams::init(&s, &mut rng);
        let batch = Tensor::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let (_, mut tape) = forward(&s, &p, &batch).unwrap();
        let grads = backward(&s, &p, &mut tape, &Tensor::zeros(4, 2)).unwrap();
        assert!(grads.weights.iter().all(|w| w.data().iter().all(|&v| v == 0.0)));
        assert!(grads.biases.iter().all(|b| b.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn tape_reuse_errors() {
        let s = spec(&[2, 2]);
        let p = MlpParams::zeros_like(&s);
        let batch = Tensor::zeros(1, 2);
        let (_, mut tape) = forward(&s, &p, &batch).unwrap();
        let g = Tensor::zeros(1, 2);
        assert!(backward(&s, &p, &mut tape, &g).is_ok());
        assert_eq!(
            backward(&s, &p, &mut tape, &g).unwrap_err(),
            DiffError::TapeConsumed
        );
    }

    #[test]
    fn gradient_of_sum_equals_sum_of_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let s = spec(&[3, 6, 2]);
        let p = MlpParams::init(&s, &mut rng);
        let batch = Tensor::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0));
        let g1 = Tensor::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let g2 = Tensor::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
        let gsum = Tensor::from_fn(4, 2, |r, c| g1.at(r, c) + g2.at(r, c));

        let run = |g: &Tensor| {
            let (_, mut tape) = forward(&s, &p, &batch).unwrap();
            backward(&s, &p, &mut tape, g).unwrap()
        };
        let (ga, gb, gs) = (run(&g1), run(&g2), run(&gsum));
        for l in 0..s.layer_count() {
            for i in 0..gs.weights[l].data().len() {
                let sum = ga.weights[l].data()[i] + gb.weights[l].data()[i];
                assert!((gs.weights[l].data()[i] - sum).abs() < 1e-12);
            }
        }
    }

    /// Finite-difference check of backward through the full parameter set,
    /// with the scalar loss 0.5·Σ out², whose output gradient is `out`.
    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for act in [Activation::Relu, Activation::Tanh] {
            let s = MlpSpec::new(vec![3, 6, 4], act, vec![]);
            let p = MlpParams::init(&s, &mut rng);
            let batch = Tensor::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));

            let loss = |params: &MlpParams| {
                let (out, _) = forward(&s, params, &batch).unwrap();
                0.5 * out.data().iter().map(|v| v * v).sum::<f64>()
            };

            let (out, mut tape) = forward(&s, &p, &batch).unwrap();
            let grads = backward(&s, &p, &mut tape, &out).unwrap();

            let flat = p.to_flat();
            let mut analytic = Vec::new();
            for (w, b) in grads.weights.iter().zip(&grads.biases) {
                analytic.extend_from_slice(w.data());
                analytic.extend_from_slice(b);
            }
            let h = 1e-5;
            for (idx, &g) in analytic.iter().enumerate() {
                let mut plus = flat.clone();
                plus[idx] += h;
                let mut minus = flat.clone();
                minus[idx] -= h;
                let fd = (loss(&MlpParams::from_flat(&s, &plus).unwrap())
                    - loss(&MlpParams::from_flat(&s, &minus).unwrap()))
                    / (2.0 * h);
                let denom = g.abs().max(fd.abs()).max(1e-6);
                assert!(
                    ((g - fd) / denom).abs() < 1e-4,
                    "{act:?} param {idx}: analytic={g} fd={fd}"
                );
            }
        }
    }

    #[test]
    fn head_ranges_partition_output() {
        let s = MlpSpec::new(
            vec![4, 8, 5],
            Activation::Relu,
            vec![
                Head {
                    name: "mean".into(),
                    width: 2,
                },
                Head {
                    name: "cov".into(),
                    width: 3,
                },
            ],
        );
        s.validate().unwrap();
        assert_eq!(s.head_range("mean"), Some(0..2));
        assert_eq!(s.head_range("cov"), Some(2..5));
        assert_eq!(s.head_range("missing"), None);
    }
}
