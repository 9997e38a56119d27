//! A small fully-connected neural toolkit with manual backprop.
//!
//! Everything the pipeline trains — the node classifier, the link predictor,
//! and the MLP evaluator — is a plain multi-layer perceptron: `L` linear
//! layers with ReLU between them (none after the last) and optional inverted
//! dropout on the hidden activations. Gradients are computed by hand and
//! checked against central finite differences in the tests, which is the
//! reason this module exists instead of pulling in an autograd dependency:
//! the oracle has to be independent of the thing it checks.
//!
//! Arithmetic is f64 throughout; checkpoints store f32 (see [`save_mlp`]).

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{
    matmul, matmul_nt, matmul_sparse, matmul_sparse_tn, matmul_tn, Matrix, SparseRows,
};

/// Parameters of a multi-layer perceptron with layer widths `dims`:
/// `weights[l]` is `dims[l] x dims[l+1]`, `biases[l]` has length `dims[l+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    /// Layer widths, input first: `[d_in, h_1, ..., d_out]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.weights[0].rows()];
        dims.extend(self.weights.iter().map(|w| w.cols()));
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.as_slice().len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }
}

/// Gradients with the same shapes as [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

/// Glorot-uniform initialization: weights from U(-a, a) with
/// a = sqrt(6 / (fan_in + fan_out)), biases zero. Deterministic in `seed`;
/// entries are drawn layer by layer in row-major order.
pub fn init_mlp(dims: &[usize], seed: u64) -> MlpParams {
    assert!(dims.len() >= 2, "an MLP needs at least one layer");
    assert!(dims.iter().all(|&d| d > 0), "zero-width layer");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::with_capacity(dims.len() - 1);
    let mut biases = Vec::with_capacity(dims.len() - 1);
    for l in 0..dims.len() - 1 {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data: Vec<f64> = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-a..a))
            .collect();
        weights.push(Matrix::from_vec(fan_in, fan_out, data).unwrap());
        biases.push(vec![0.0; fan_out]);
    }
    MlpParams { weights, biases }
}

/// Input rows for a forward pass: dense, or compressed sparse rows for
/// very sparse inputs (bag-of-words features).
#[derive(Clone, Copy)]
pub enum Input<'a> {
    Dense(&'a Matrix),
    Sparse(&'a SparseRows),
}

impl<'a> Input<'a> {
    pub fn rows(&self) -> usize {
        match self {
            Input::Dense(m) => m.rows(),
            Input::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Input::Dense(m) => m.cols(),
            Input::Sparse(s) => s.cols(),
        }
    }

    fn matmul(&self, w: &Matrix) -> Matrix {
        match self {
            Input::Dense(m) => matmul(m, w),
            Input::Sparse(s) => matmul_sparse(s, w),
        }
    }

    fn matmul_tn(&self, b: &Matrix) -> Matrix {
        match self {
            Input::Dense(m) => matmul_tn(m, b),
            Input::Sparse(s) => matmul_sparse_tn(s, b),
        }
    }
}

/// Training vs inference behavior of a forward pass.
pub enum ForwardMode<'r> {
    /// No dropout; deterministic.
    Eval,
    /// Inverted dropout with the given keep-side scaling, driven by `rng`.
    Train { dropout: f64, rng: &'r mut ChaCha8Rng },
}

/// Intermediate state of a forward pass, consumed by [`mlp_backward`].
///
/// `hidden[l]` is the post-ReLU (and post-dropout, in training) activation of
/// layer `l`; `masks[l]` is the dropout mask actually applied (empty in eval
/// mode or when dropout is 0).
pub struct ForwardTrace {
    hidden: Vec<Matrix>,
    masks: Vec<Option<Vec<f64>>>,
    input_rows: usize,
}

/// Run the MLP: `logits = W_L(...ReLU(W_1 x + b_1)...) + b_L`.
///
/// Returns the logits and the trace needed for backprop. In training mode,
/// hidden activations are dropped with probability `dropout` and survivors
/// scaled by `1/(1-dropout)` (inverted dropout), so evaluation needs no
/// rescaling.
pub fn mlp_forward(
    params: &MlpParams,
    input: Input<'_>,
    mode: ForwardMode<'_>,
) -> (Matrix, ForwardTrace) {
    let num_layers = params.num_layers();
    assert_eq!(
        input.cols(),
        params.weights[0].rows(),
        "input width does not match first layer"
    );
    let mut hidden: Vec<Matrix> = Vec::with_capacity(num_layers.saturating_sub(1));
    let mut masks: Vec<Option<Vec<f64>>> = Vec::with_capacity(num_layers.saturating_sub(1));
    let mut mode = mode;

    let mut current: Option<Matrix> = None;
    for l in 0..num_layers {
        let mut z = match &current {
            None => input.matmul(&params.weights[l]),
            Some(h) => matmul(h, &params.weights[l]),
        };
        add_bias(&mut z, &params.biases[l]);
        if l + 1 == num_layers {
            return (
                z,
                ForwardTrace {
                    hidden,
                    masks,
                    input_rows: input.rows(),
                },
            );
        }
        // ReLU
        for v in z.as_mut_slice() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        // Inverted dropout on the hidden activation.
        let mask = match &mut mode {
            ForwardMode::Train { dropout, rng } if *dropout > 0.0 => {
                let keep = 1.0 - *dropout;
                let scale = 1.0 / keep;
                let mask: Vec<f64> = (0..z.as_slice().len())
                    .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
                    .collect();
                for (v, &m) in z.as_mut_slice().iter_mut().zip(&mask) {
                    *v *= m;
                }
                Some(mask)
            }
            _ => None,
        };
        masks.push(mask);
        hidden.push(z.clone());
        current = Some(z);
    }
    unreachable!("loop returns at the last layer");
}

fn add_bias(z: &mut Matrix, b: &[f64]) {
    let cols = z.cols();
    for i in 0..z.rows() {
        let row = z.row_mut(i);
        for j in 0..cols {
            row[j] += b[j];
        }
    }
}

/// Backprop through the network for the given upstream gradient on the
/// logits. `input` must be the same rows the trace was produced from.
///
/// Returns parameter gradients and, when `want_input_grad` is set, the
/// gradient with respect to the (dense) input — that is how condensation
/// optimizes features through a frozen classifier.
pub fn mlp_backward(
    params: &MlpParams,
    input: Input<'_>,
    trace: &ForwardTrace,
    grad_logits: &Matrix,
    want_input_grad: bool,
) -> (MlpGrads, Option<Matrix>) {
    let num_layers = params.num_layers();
    assert_eq!(trace.input_rows, input.rows(), "trace/input row mismatch");
    assert_eq!(grad_logits.rows(), input.rows(), "gradient row mismatch");
    assert_eq!(
        grad_logits.cols(),
        params.weights[num_layers - 1].cols(),
        "gradient width mismatch"
    );

    let mut grads = MlpGrads {
        weights: Vec::with_capacity(num_layers),
        biases: Vec::with_capacity(num_layers),
    };
    // Filled back-to-front, reversed at the end.
    let mut dz = grad_logits.clone();
    for l in (0..num_layers).rev() {
        // Parameter gradients for layer l.
        let grad_w = if l == 0 {
            input.matmul_tn(&dz)
        } else {
            matmul_tn(&trace.hidden[l - 1], &dz)
        };
        let mut grad_b = vec![0.0; dz.cols()];
        for i in 0..dz.rows() {
            for (gb, &v) in grad_b.iter_mut().zip(dz.row(i)) {
                *gb += v;
            }
        }
        grads.weights.push(grad_w);
        grads.biases.push(grad_b);

        if l == 0 {
            let grad_input = if want_input_grad {
                Some(matmul_nt(&dz, &params.weights[0]))
            } else {
                None
            };
            grads.weights.reverse();
            grads.biases.reverse();
            return (grads, grad_input);
        }

        // Through the linear layer, then dropout + ReLU of layer l-1.
        let mut dh = matmul_nt(&dz, &params.weights[l]);
        let h = &trace.hidden[l - 1];
        match &trace.masks[l - 1] {
            Some(mask) => {
                for ((dv, &hv), &m) in dh
                    .as_mut_slice()
                    .iter_mut()
                    .zip(h.as_slice())
                    .zip(mask.iter())
                {
                    // hv > 0 implies the unit survived dropout and the ReLU
                    // was active; everywhere else the gradient is zero.
                    *dv = if hv > 0.0 { *dv * m } else { 0.0 };
                }
            }
            None => {
                for (dv, &hv) in dh.as_mut_slice().iter_mut().zip(h.as_slice()) {
                    if hv <= 0.0 {
                        *dv = 0.0;
                    }
                }
            }
        }
        dz = dh;
    }
    unreachable!("loop returns at layer 0");
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// Mean softmax cross-entropy over rows, with the gradient w.r.t. logits.
///
/// Numerically stabilized by subtracting each row's max before
/// exponentiation. The gradient of the mean loss is
/// `(softmax(z) - onehot(y)) / n` per row.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[u32]) -> (f64, Matrix) {
    assert_eq!(logits.rows(), labels.len(), "one label per logit row");
    let n = logits.rows();
    assert!(n > 0, "empty batch");
    let c = logits.cols();
    let mut grad = Matrix::zeros(n, c);
    let mut loss = 0.0;
    for i in 0..n {
        let row = logits.row(i);
        let y = labels[i] as usize;
        assert!(y < c, "label out of range");
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &v in row {
            sum += (v - max).exp();
        }
        let log_sum = max + sum.ln();
        loss += log_sum - row[y];
        let grow = grad.row_mut(i);
        for j in 0..c {
            let p = (row[j] - log_sum).exp();
            grow[j] = (p - if j == y { 1.0 } else { 0.0 }) / n as f64;
        }
    }
    (loss / n as f64, grad)
}

/// Row-wise softmax probabilities (for reporting; training uses the fused
/// loss above).
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean binary cross-entropy on logits, with the gradient w.r.t. the logits.
///
/// Uses the log-sum-exp form `max(s,0) - s*t + ln(1 + e^{-|s|})`, which never
/// exponentiates a positive number. Gradient: `(sigmoid(s) - t) / n`.
pub fn bce_with_logits(scores: &[f64], targets: &[bool]) -> (f64, Vec<f64>) {
    assert_eq!(scores.len(), targets.len(), "one target per score");
    assert!(!scores.is_empty(), "empty batch");
    let n = scores.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(scores.len());
    for (&s, &t) in scores.iter().zip(targets) {
        let tf = if t { 1.0 } else { 0.0 };
        loss += s.max(0.0) - s * tf + (-s.abs()).exp().ln_1p();
        grad.push((sigmoid(s) - tf) / n);
    }
    (loss / n, grad)
}

/// Fraction of rows whose argmax equals the label. Ties resolve to the
/// lowest index, matching a plain max scan.
pub fn argmax_accuracy(logits: &Matrix, labels: &[u32]) -> f64 {
    assert_eq!(logits.rows(), labels.len());
    assert!(!labels.is_empty());
    let mut correct = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let mut arg = 0usize;
        let mut best = row[0];
        for (j, &v) in row.iter().enumerate().skip(1) {
            if v > best {
                best = v;
                arg = j;
            }
        }
        if arg == y as usize {
            correct += 1;
        }
    }
    correct as f64 / labels.len() as f64
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Adam optimizer state over a list of parameter tensors (flattened).
///
/// Standard bias-corrected form: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(tensor_lens: &[usize], lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: tensor_lens.iter().map(|&l| vec![0.0; l]).collect(),
            v: tensor_lens.iter().map(|&l| vec![0.0; l]).collect(),
        }
    }

    /// State sized for every weight and bias tensor of `params`, in order
    /// `W_0, b_0, W_1, b_1, ...` — the order [`adam_step_mlp`] uses.
    pub fn new_for_mlp(params: &MlpParams, lr: f64) -> Self {
        let mut lens = Vec::new();
        for l in 0..params.num_layers() {
            lens.push(params.weights[l].as_slice().len());
            lens.push(params.biases[l].len());
        }
        AdamState::new(&lens, lr)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update across all tensors: `p -= lr * m̂ / (sqrt(v̂) + eps)`.
    pub fn step(&mut self, tensors: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(tensors.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "gradient count mismatch");
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step as i32);
        let c2 = 1.0 - self.beta2.powi(self.step as i32);
        for ((params, grad), (m, v)) in tensors
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(params.len(), m.len(), "tensor length changed");
            assert_eq!(grad.len(), m.len(), "gradient length mismatch");
            for i in 0..params.len() {
                let g = grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Adam update for a whole MLP. Optional coupled L2 weight decay is added to
/// the weight gradients (not biases) before the step, torch-style.
pub fn adam_step_mlp(
    state: &mut AdamState,
    params: &mut MlpParams,
    grads: &MlpGrads,
    weight_decay: f64,
) {
    let mut grad_tensors: Vec<Vec<f64>> = Vec::new();
    for l in 0..params.num_layers() {
        let mut gw = grads.weights[l].as_slice().to_vec();
        if weight_decay != 0.0 {
            for (g, &w) in gw.iter_mut().zip(params.weights[l].as_slice()) {
                *g += weight_decay * w;
            }
        }
        grad_tensors.push(gw);
        grad_tensors.push(grads.biases[l].clone());
    }
    // Mutable slices in the same W_0, b_0, W_1, b_1 ... order as the state.
    let mut tensors: Vec<&mut [f64]> = Vec::new();
    let MlpParams { weights, biases } = params;
    for (w, b) in weights.iter_mut().zip(biases.iter_mut()) {
        tensors.push(w.as_mut_slice());
        tensors.push(b.as_mut_slice());
    }
    let grad_refs: Vec<&[f64]> = grad_tensors.iter().map(|g| g.as_slice()).collect();
    state.step(&mut tensors, &grad_refs);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 4] = b"DCMP";

/// Write an MLP checkpoint: magic `DCMP`, u32 layer count, u32 layer widths
/// (input first), then per layer the row-major f32 weight block and the f32
/// bias block. Little-endian throughout; f64 weights are narrowed to f32.
pub fn save_mlp(path: impl AsRef<Path>, params: &MlpParams) -> Result<()> {
    let path = path.as_ref();
    let dims = params.dims();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&(params.num_layers() as u32).to_le_bytes());
    for &d in &dims {
        bytes.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for l in 0..params.num_layers() {
        for &v in params.weights[l].as_slice() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for &v in &params.biases[l] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))
}

/// Read a checkpoint written by [`save_mlp`].
pub fn load_mlp(path: impl AsRef<Path>) -> Result<MlpParams> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::format(path, 0, msg.to_string());
    if bytes.len() < 8 || &bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(fail("not a model checkpoint (bad magic)"));
    }
    let num_layers = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if num_layers == 0 || num_layers > 64 {
        return Err(fail("unreasonable layer count"));
    }
    let mut pos = 8;
    let mut dims = Vec::with_capacity(num_layers + 1);
    for _ in 0..num_layers + 1 {
        if pos + 4 > bytes.len() {
            return Err(fail("truncated header"));
        }
        dims.push(u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize);
        pos += 4;
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(fail("zero-width layer"));
    }
    let mut read_block = |len: usize| -> Result<Vec<f64>> {
        let need = len * 4;
        if pos + need > bytes.len() {
            return Err(fail("truncated parameter block"));
        }
        let out = bytes[pos..pos + need]
            .chunks_exact(4)
            .map(|ch| f32::from_le_bytes(ch.try_into().unwrap()) as f64)
            .collect();
        pos += need;
        Ok(out)
    };
    let mut weights = Vec::with_capacity(num_layers);
    let mut biases = Vec::with_capacity(num_layers);
    for l in 0..num_layers {
        let w = read_block(dims[l] * dims[l + 1])?;
        weights.push(Matrix::from_vec(dims[l], dims[l + 1], w)?);
        biases.push(read_block(dims[l + 1])?);
    }
    if pos != bytes.len() {
        return Err(fail("trailing bytes after parameter blocks"));
    }
    if weights.iter().any(|w| !w.is_finite())
        || biases.iter().any(|b| b.iter().any(|v| !v.is_finite()))
    {
        return Err(fail("non-finite parameter"));
    }
    Ok(MlpParams { weights, biases })
}

// ---------------------------------------------------------------------------
