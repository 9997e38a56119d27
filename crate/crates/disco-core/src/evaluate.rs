//! Evaluation: train a GNN on a condensed graph, test it on the original
//! one, and measure the condensed graph's intrinsic quality.
//!
//! The protocol is transductive condensation's standard loop: the model
//! trains on the condensed nodes (all of them are training rows), while
//! validation and test accuracy come from full-batch inference on the
//! *original* graph's val/test nodes. Model selection is by best validation
//! accuracy; the reported test accuracy is the one observed at that epoch.
//!
//! Three architectures are supported: a 2-layer GCN (the default), SGC
//! (K propagation steps then a linear map), and a graph-blind MLP.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::condense::{as_input, maybe_sparse};
use crate::data::{CondensedGraph, Dataset, LabelVector};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, NormalizedAdjacency, SparseGraph};
use crate::matrix::{matmul, matmul_nt, matmul_tn, Matrix, SparseRows};
use crate::neural::{
    adam_step_mlp, argmax_accuracy, init_mlp, mlp_backward, mlp_forward, softmax_cross_entropy,
    AdamState, ForwardMode, Input, MlpGrads, MlpParams,
};

/// Evaluator architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnnArch {
    Gcn,
    Sgc,
    Mlp,
}

impl std::str::FromStr for GnnArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(GnnArch::Gcn),
            "sgc" => Ok(GnnArch::Sgc),
            "mlp" => Ok(GnnArch::Mlp),
            other => Err(Error::Invalid(format!(
                "unknown architecture '{other}' (expected gcn/sgc/mlp)"
            ))),
        }
    }
}

impl std::fmt::Display for GnnArch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GnnArch::Gcn => "gcn",
            GnnArch::Sgc => "sgc",
            GnnArch::Mlp => "mlp",
        })
    }
}

/// Evaluator training configuration.
#[derive(Debug, Clone)]
pub struct GnnConfig {
    pub arch: GnnArch,
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// Run validation/test inference every this many epochs (and always at
    /// the final epoch).
    pub eval_every: usize,
    /// Propagation steps for SGC.
    pub sgc_k: usize,
    pub seed: u64,
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig {
            arch: GnnArch::Gcn,
            layers: 2,
            hidden: 256,
            dropout: 0.5,
            lr: 0.01,
            weight_decay: 1e-5,
            epochs: 600,
            eval_every: 10,
            sgc_k: 2,
            seed: 0,
        }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.epochs == 0 || self.eval_every == 0 {
            return Err(Error::Invalid(
                "layers, hidden, epochs, and eval_every must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Invalid(format!(
                "dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Invalid("bad lr/weight decay".into()));
        }
        if self.sgc_k == 0 {
            return Err(Error::Invalid("sgc_k must be positive".into()));
        }
        Ok(())
    }
}

/// One evaluation point of the training loop.
#[derive(Debug, Clone, Copy)]
pub struct EvalEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub test_acc: f64,
}

/// Intrinsic quality metrics of a condensed graph.
#[derive(Debug, Clone, Copy)]
pub struct CondensedMetrics {
    pub nodes: usize,
    pub edges: usize,
    /// None when the graph has no edges.
    pub homophily: Option<f64>,
    pub silhouette: f64,
    pub davies_bouldin: f64,
    pub calinski_harabasz: f64,
}

/// Result of one training/evaluation run. `metrics` carries the condensed
/// graph's intrinsic quality and is absent when training ran on the
/// original graph itself (the whole-dataset reference).
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub best_val_acc: f64,
    pub test_acc: f64,
    pub best_epoch: usize,
    pub log: Vec<EvalEpoch>,
    pub metrics: Option<CondensedMetrics>,
}

// ---------------------------------------------------------------------------
// GCN
// ---------------------------------------------------------------------------

/// Post-dropout input actually fed to a GCN layer. Only layer 0 can be
/// sparse (bag-of-words features); hidden activations are always dense.
enum LayerInput {
    Dense(Matrix),
    Sparse(SparseRows),
}

/// Trace of a GCN training forward pass: the post-dropout input of each
/// layer plus the applied masks. Layer l computes
/// `Z_l = S * (D_l W_l) + b_l`, with `D_l` the (dropped-out) layer input.
/// The layer-0 mask is `None` in the sparse case — dropout is folded into
/// the stored values, and input gradients are never needed.
struct GcnTrace {
    inputs: Vec<LayerInput>,
    masks: Vec<Option<Vec<f64>>>,
}

/// Training-mode GCN forward pass. Dropout is applied to each layer's input
/// (Kipf-style); ReLU follows propagation on every layer but the last.
/// `identity_activation` disables the ReLU — the hook that makes the SGC
/// equivalence assertable.
fn gcn_forward_train(
    s: &NormalizedAdjacency,
    x: Input<'_>,
    params: &MlpParams,
    dropout: f64,
    rng: &mut ChaCha8Rng,
    identity_activation: bool,
) -> (Matrix, GcnTrace) {
    use rand::Rng;
    let num_layers = params.num_layers();
    let mut trace = GcnTrace {
        inputs: Vec::with_capacity(num_layers),
        masks: Vec::with_capacity(num_layers),
    };
    let keep = 1.0 - dropout;
    let scale = 1.0 / keep;

    // Layer 0 straight from the (possibly sparse) input.
    let xw = match x {
        Input::Dense(m) => {
            let mut h = m.clone();
            let mask = if dropout > 0.0 {
                let mask: Vec<f64> = (0..h.as_slice().len())
                    .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
                    .collect();
                for (v, &mv) in h.as_mut_slice().iter_mut().zip(&mask) {
                    *v *= mv;
                }
                Some(mask)
            } else {
                None
            };
            trace.masks.push(mask);
            let xw = matmul(&h, &params.weights[0]);
            trace.inputs.push(LayerInput::Dense(h));
            xw
        }
        Input::Sparse(sp) => {
            let mut h = sp.clone();
            if dropout > 0.0 {
                // Dropping a zero is a no-op, so masking only the stored
                // values is exact inverted dropout on the full matrix.
                for v in h.values_mut() {
                    *v = if rng.gen::<f64>() < keep { *v * scale } else { 0.0 };
                }
            }
            trace.masks.push(None);
            let xw = crate::matrix::matmul_sparse(&h, &params.weights[0]);
            trace.inputs.push(LayerInput::Sparse(h));
            xw
        }
    };
    let mut h = s.apply(&xw);
    add_bias(&mut h, &params.biases[0]);
    if num_layers > 1 && !identity_activation {
        for v in h.as_mut_slice() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    for l in 1..num_layers {
        let mask = if dropout > 0.0 {
            let mask: Vec<f64> = (0..h.as_slice().len())
                .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
                .collect();
            for (v, &mv) in h.as_mut_slice().iter_mut().zip(&mask) {
                *v *= mv;
            }
            Some(mask)
        } else {
            None
        };
        trace.masks.push(mask);

        let mut z = s.apply(&matmul(&h, &params.weights[l]));
        add_bias(&mut z, &params.biases[l]);
        if l + 1 < num_layers && !identity_activation {
            for v in z.as_mut_slice() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        trace.inputs.push(LayerInput::Dense(h));
        h = z;
    }
    (h, trace)
}

/// Backprop through the GCN training pass. S is symmetric, so the gradient
/// through propagation is another application of S.
fn gcn_backward(
    s: &NormalizedAdjacency,
    params: &MlpParams,
    trace: &GcnTrace,
    grad_logits: &Matrix,
    identity_activation: bool,
) -> MlpGrads {
    let num_layers = params.num_layers();
    let mut grads = MlpGrads {
        weights: Vec::with_capacity(num_layers),
        biases: Vec::with_capacity(num_layers),
    };
    let mut dz = grad_logits.clone();
    for l in (0..num_layers).rev() {
        let mut grad_b = vec![0.0; dz.cols()];
        for i in 0..dz.rows() {
            for (gb, &v) in grad_b.iter_mut().zip(dz.row(i)) {
                *gb += v;
            }
        }
        let dy = s.apply(&dz);
        let grad_w = match &trace.inputs[l] {
            LayerInput::Dense(m) => matmul_tn(m, &dy),
            LayerInput::Sparse(sp) => crate::matrix::matmul_sparse_tn(sp, &dy),
        };
        grads.weights.push(grad_w);
        grads.biases.push(grad_b);
        if l == 0 {
            break;
        }
        let mut dh = matmul_nt(&dy, &params.weights[l]);
        // Through this layer's input dropout, then the previous ReLU.
        // Layer inputs at l >= 1 are always dense.
        let prev = match &trace.inputs[l] {
            LayerInput::Dense(m) => m,
            LayerInput::Sparse(_) => unreachable!("hidden activations are dense"),
        };
        if let Some(mask) = &trace.masks[l] {
            for (dv, &m) in dh.as_mut_slice().iter_mut().zip(mask) {
                *dv *= m;
            }
        }
        if !identity_activation {
            // prev is dropout(relu(Z_{l-1})): positive entries are exactly
            // the surviving active units (see the MLP for the same argument).
            for (dv, &hv) in dh.as_mut_slice().iter_mut().zip(prev.as_slice()) {
                if hv <= 0.0 {
                    *dv = 0.0;
                }
            }
            // Where dropout zeroed a positive activation the mask multiply
            // above already zeroed the gradient.
        }
        dz = dh;
    }
    grads.weights.reverse();
    grads.biases.reverse();
    grads
}

/// Evaluation-mode GCN forward (no dropout), sparse-input friendly.
fn gcn_infer(
    s: &NormalizedAdjacency,
    x: Input<'_>,
    params: &MlpParams,
    identity_activation: bool,
) -> Matrix {
    let num_layers = params.num_layers();
    let mut h: Option<Matrix> = None;
    for l in 0..num_layers {
        let xw = match &h {
            None => match x {
                Input::Dense(m) => matmul(m, &params.weights[l]),
                Input::Sparse(sp) => crate::matrix::matmul_sparse(sp, &params.weights[l]),
            },
            Some(h) => matmul(h, &params.weights[l]),
        };
        let mut z = s.apply(&xw);
        add_bias(&mut z, &params.biases[l]);
        if l + 1 < num_layers && !identity_activation {
            for v in z.as_mut_slice() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        h = Some(z);
    }
    h.expect("at least one layer")
}

fn add_bias(z: &mut Matrix, b: &[f64]) {
    for i in 0..z.rows() {
        for (v, &bv) in z.row_mut(i).iter_mut().zip(b) {
            *v += bv;
        }
    }
}

// ---------------------------------------------------------------------------
// The evaluation protocol
// ---------------------------------------------------------------------------

fn subset_accuracy(logits: &Matrix, labels: &LabelVector, idx: &[u32]) -> f64 {
    let rows: Vec<usize> = idx.iter().map(|&i| i as usize).collect();
    let sub = logits.select_rows(&rows);
    let y: Vec<u32> = idx.iter().map(|&i| labels.get(i as usize)).collect();
    argmax_accuracy(&sub, &y)
}

/// Train an evaluator on the condensed graph and test it transductively on
/// the original dataset.
pub fn train_and_test(
    cond: &CondensedGraph,
    orig: &Dataset,
    cfg: &GnnConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    orig.validate()?;
    if cond.features.cols() != orig.features.cols() {
        return Err(Error::Invalid(format!(
            "condensed feature width {} != original {}",
            cond.features.cols(),
            orig.features.cols()
        )));
    }
    if cond.labels.num_classes() != orig.labels.num_classes() {
        return Err(Error::Invalid("label spaces differ".into()));
    }
    if cond.labels.len() != cond.features.rows() || cond.graph.num_nodes() != cond.features.rows()
    {
        return Err(Error::Invalid("condensed graph components disagree".into()));
    }
    let val_idx = orig.split.val_indices();
    let test_idx = orig.split.test_indices();
    if val_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Invalid(
            "the original dataset needs validation and test nodes".into(),
        ));
    }

    let metrics = condensed_metrics(cond)?;
    let y_cond = cond.labels.as_slice();
    let num_classes = cond.labels.num_classes();
    let d = cond.features.cols();
    let orig_sparse = maybe_sparse(&orig.features);
    let orig_input = as_input(&orig.features, &orig_sparse);

    // The three architectures share the selection/logging loop; they differ
    // in how one epoch trains and how inference produces original-graph
    // logits.
    let mut log: Vec<EvalEpoch> = Vec::new();
    let mut best: Option<(f64, f64, usize)> = None; // (val, test, epoch)
    let mut record = |epoch: usize, train_loss: f64, logits: &Matrix| {
        let val_acc = subset_accuracy(logits, &orig.labels, &val_idx);
        let test_acc = subset_accuracy(logits, &orig.labels, &test_idx);
        log.push(EvalEpoch {
            epoch,
            train_loss,
            val_acc,
            test_acc,
        });
        // Strict improvement: ties keep the earliest epoch.
        if best.map_or(true, |(bv, _, _)| val_acc > bv) {
            best = Some((val_acc, test_acc, epoch));
        }
    };

    match cfg.arch {
        GnnArch::Gcn => {
            let s_cond = normalize_adjacency(&cond.graph);
            let s_orig = normalize_adjacency(&orig.graph);
            let mut dims = vec![d];
            dims.extend(std::iter::repeat(cfg.hidden).take(cfg.layers - 1));
            dims.push(num_classes);
            let mut params = init_mlp(&dims, derive_seed(cfg.seed, 0x41));
            let mut adam = AdamState::new_for_mlp(&params, cfg.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x42));
            for epoch in 0..cfg.epochs {
                let (logits, trace) = gcn_forward_train(
                    &s_cond,
                    Input::Dense(&cond.features),
                    &params,
                    cfg.dropout,
                    &mut rng,
                    false,
                );
                let (loss, grad_logits) = softmax_cross_entropy(&logits, y_cond);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
                }
                let grads = gcn_backward(&s_cond, &params, &trace, &grad_logits, false);
                adam_step_mlp(&mut adam, &mut params, &grads, cfg.weight_decay);
                if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
                    let logits = gcn_infer(&s_orig, orig_input, &params, false);
                    record(epoch, loss, &logits);
                }
            }
        }
        GnnArch::Sgc => {
            // Propagate K times up front, then train a plain linear map.
            let s_cond = normalize_adjacency(&cond.graph);
            let s_orig = normalize_adjacency(&orig.graph);
            let mut p_cond = cond.features.clone();
            for _ in 0..cfg.sgc_k {
                p_cond = s_cond.apply(&p_cond);
            }
            let mut p_orig = orig.features.clone();
            for _ in 0..cfg.sgc_k {
                p_orig = s_orig.apply(&p_orig);
            }
            let mut params = init_mlp(&[d, num_classes], derive_seed(cfg.seed, 0x41));
            let mut adam = AdamState::new_for_mlp(&params, cfg.lr);
            for epoch in 0..cfg.epochs {
                let (logits, trace) =
                    mlp_forward(&params, Input::Dense(&p_cond), ForwardMode::Eval);
                let (loss, grad_logits) = softmax_cross_entropy(&logits, y_cond);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
                }
                let (grads, _) =
                    mlp_backward(&params, Input::Dense(&p_cond), &trace, &grad_logits, false);
                adam_step_mlp(&mut adam, &mut params, &grads, cfg.weight_decay);
                if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
                    let (logits, _) =
                        mlp_forward(&params, Input::Dense(&p_orig), ForwardMode::Eval);
                    record(epoch, loss, &logits);
                }
            }
        }
        GnnArch::Mlp => {
            let mut dims = vec![d];
            dims.extend(std::iter::repeat(cfg.hidden).take(cfg.layers - 1));
            dims.push(num_classes);
            let mut params = init_mlp(&dims, derive_seed(cfg.seed, 0x41));
            let mut adam = AdamState::new_for_mlp(&params, cfg.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x42));
            for epoch in 0..cfg.epochs {
                let mode = if cfg.dropout > 0.0 {
                    ForwardMode::Train {
                        dropout: cfg.dropout,
                        rng: &mut rng,
                    }
                } else {
                    ForwardMode::Eval
                };
                let (logits, trace) = mlp_forward(&params, Input::Dense(&cond.features), mode);
                let (loss, grad_logits) = softmax_cross_entropy(&logits, y_cond);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
                }
                let (grads, _) = mlp_backward(
                    &params,
                    Input::Dense(&cond.features),
                    &trace,
                    &grad_logits,
                    false,
                );
                adam_step_mlp(&mut adam, &mut params, &grads, cfg.weight_decay);
                if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
                    let (logits, _) = mlp_forward(&params, orig_input, ForwardMode::Eval);
                    record(epoch, loss, &logits);
                }
            }
        }
    }

    let (best_val_acc, test_acc, best_epoch) = best.expect("at least one evaluation point");
    Ok(EvalReport {
        best_val_acc,
        test_acc,
        best_epoch,
        log,
        metrics: Some(metrics),
    })
}

/// Cross-entropy over a subset of logit rows, with the gradient scattered
/// back into a full-size (zero elsewhere) matrix — the masked training loss
/// of the transductive whole-graph protocol.
fn masked_softmax_ce(logits: &Matrix, labels: &LabelVector, rows: &[u32]) -> (f64, Matrix) {
    let idx: Vec<usize> = rows.iter().map(|&i| i as usize).collect();
    let sub = logits.select_rows(&idx);
    let y: Vec<u32> = rows.iter().map(|&i| labels.get(i as usize)).collect();
    let (loss, grad_sub) = softmax_cross_entropy(&sub, &y);
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for (k, &i) in idx.iter().enumerate() {
        grad.row_mut(i).copy_from_slice(grad_sub.row(k));
    }
    (loss, grad)
}

/// Train an evaluator on the original dataset itself (full-graph
/// propagation, loss on the training nodes only) — the whole-dataset
/// reference the condensed runs are compared against. Model selection and
/// reporting follow [`train_and_test`].
pub fn train_on_original(orig: &Dataset, cfg: &GnnConfig) -> Result<EvalReport> {
    cfg.validate()?;
    orig.validate()?;
    let train_idx = orig.split.train_indices();
    let val_idx = orig.split.val_indices();
    let test_idx = orig.split.test_indices();
    if val_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Invalid(
            "the dataset needs validation and test nodes".into(),
        ));
    }
    let num_classes = orig.labels.num_classes();
    let d = orig.features.cols();
    let orig_sparse = maybe_sparse(&orig.features);
    let orig_input = as_input(&orig.features, &orig_sparse);

    let mut log: Vec<EvalEpoch> = Vec::new();
    let mut best: Option<(f64, f64, usize)> = None;
    let mut record = |epoch: usize, train_loss: f64, logits: &Matrix| {
        let val_acc = subset_accuracy(logits, &orig.labels, &val_idx);
        let test_acc = subset_accuracy(logits, &orig.labels, &test_idx);
        log.push(EvalEpoch {
            epoch,
            train_loss,
            val_acc,
            test_acc,
        });
        if best.map_or(true, |(bv, _, _)| val_acc > bv) {
            best = Some((val_acc, test_acc, epoch));
        }
    };

    match cfg.arch {
        GnnArch::Gcn => {
            let s = normalize_adjacency(&orig.graph);
            let mut dims = vec![d];
            dims.extend(std::iter::repeat(cfg.hidden).take(cfg.layers - 1));
            dims.push(num_classes);
            let mut params = init_mlp(&dims, derive_seed(cfg.seed, 0x41));
            let mut adam = AdamState::new_for_mlp(&params, cfg.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x42));
            for epoch in 0..cfg.epochs {
                let (logits, trace) =
                    gcn_forward_train(&s, orig_input, &params, cfg.dropout, &mut rng, false);
                let (loss, grad_logits) = masked_softmax_ce(&logits, &orig.labels, &train_idx);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
                }
                let grads = gcn_backward(&s, &params, &trace, &grad_logits, false);
                adam_step_mlp(&mut adam, &mut params, &grads, cfg.weight_decay);
                if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
                    let logits = gcn_infer(&s, orig_input, &params, false);
                    record(epoch, loss, &logits);
                }
            }
        }
        GnnArch::Sgc => {
            let s = normalize_adjacency(&orig.graph);
            let mut p = orig.features.clone();
            for _ in 0..cfg.sgc_k {
                p = s.apply(&p);
            }
            // Propagation is precomputed, so training only ever touches the
            // training rows — no masking needed.
            let rows: Vec<usize> = train_idx.iter().map(|&i| i as usize).collect();
            let p_train = p.select_rows(&rows);
            let y_train: Vec<u32> = train_idx.iter().map(|&i| orig.labels.get(i as usize)).collect();
            let mut params = init_mlp(&[d, num_classes], derive_seed(cfg.seed, 0x41));
            let mut adam = AdamState::new_for_mlp(&params, cfg.lr);
            for epoch in 0..cfg.epochs {
                let (logits, trace) =
                    mlp_forward(&params, Input::Dense(&p_train), ForwardMode::Eval);
                let (loss, grad_logits) = softmax_cross_entropy(&logits, &y_train);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
                }
                let (grads, _) =
                    mlp_backward(&params, Input::Dense(&p_train), &trace, &grad_logits, false);
                adam_step_mlp(&mut adam, &mut params, &grads, cfg.weight_decay);
                if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
                    let (logits, _) = mlp_forward(&params, Input::Dense(&p), ForwardMode::Eval);
                    record(epoch, loss, &logits);
                }
            }
        }
        GnnArch::Mlp => {
            let rows: Vec<usize> = train_idx.iter().map(|&i| i as usize).collect();
            let x_train = orig.features.select_rows(&rows);
            let y_train: Vec<u32> = train_idx.iter().map(|&i| orig.labels.get(i as usize)).collect();
            let mut dims = vec![d];
            dims.extend(std::iter::repeat(cfg.hidden).take(cfg.layers - 1));
            dims.push(num_classes);
            let mut params = init_mlp(&dims, derive_seed(cfg.seed, 0x41));
            let mut adam = AdamState::new_for_mlp(&params, cfg.lr);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x42));
            for epoch in 0..cfg.epochs {
                let mode = if cfg.dropout > 0.0 {
                    ForwardMode::Train {
                        dropout: cfg.dropout,
                        rng: &mut rng,
                    }
                } else {
                    ForwardMode::Eval
                };
                let (logits, trace) = mlp_forward(&params, Input::Dense(&x_train), mode);
                let (loss, grad_logits) = softmax_cross_entropy(&logits, &y_train);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
                }
                let (grads, _) = mlp_backward(
                    &params,
                    Input::Dense(&x_train),
                    &trace,
                    &grad_logits,
                    false,
                );
                adam_step_mlp(&mut adam, &mut params, &grads, cfg.weight_decay);
                if (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs {
                    let (logits, _) = mlp_forward(&params, orig_input, ForwardMode::Eval);
                    record(epoch, loss, &logits);
                }
            }
        }
    }

    let (best_val_acc, test_acc, best_epoch) = best.expect("at least one evaluation point");
    Ok(EvalReport {
        best_val_acc,
        test_acc,
        best_epoch,
        log,
        metrics: None,
    })
}

// ---------------------------------------------------------------------------
// Graph and clustering metrics
// ---------------------------------------------------------------------------

/// Weighted edge homophily: `Σ w·[y_u = y_v] / Σ w` over undirected edges.
/// Reduces to the plain same-label edge fraction at unit weights, and is
/// invariant to uniform scaling of all weights. Errors on an edgeless graph.
pub fn homophily(g: &SparseGraph, labels: &LabelVector) -> Result<f64> {
    if g.num_nodes() != labels.len() {
        return Err(Error::Invalid("one label per node".into()));
    }
    let mut same = 0.0f64;
    let mut total = 0.0f64;
    for (u, v, w) in g.edges() {
        total += w;
        if labels.get(u as usize) == labels.get(v as usize) {
            same += w;
        }
    }
    if total == 0.0 {
        return Err(Error::Invalid("homophily is undefined without edges".into()));
    }
    Ok(same / total)
}

/// Mean silhouette coefficient of the labeled feature rows. For row i with
/// mean intra-cluster distance a and smallest mean distance to another
/// cluster b, the coefficient is (b - a) / max(a, b); singleton clusters
/// contribute 0.
pub fn silhouette_score(x: &Matrix, labels: &[u32]) -> Result<f64> {
    let n = x.rows();
    if n != labels.len() || n == 0 {
        return Err(Error::Invalid("one label per row".into()));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    if num_classes < 2 {
        return Err(Error::Invalid(
            "silhouette needs at least two clusters".into(),
        ));
    }
    let counts = {
        let mut counts = vec![0usize; num_classes];
        for &l in labels {
            counts[l as usize] += 1;
        }
        counts
    };
    let mut total = 0.0;
    for i in 0..n {
        let ci = labels[i] as usize;
        if counts[ci] <= 1 {
            continue; // contributes 0
        }
        let mut sums = vec![0.0f64; num_classes];
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = x.row_dist2(i, x, j).sqrt();
            sums[labels[j] as usize] += dist;
        }
        let a = sums[ci] / (counts[ci] - 1) as f64;
        let mut b = f64::INFINITY;
        for c in 0..num_classes {
            if c != ci && counts[c] > 0 {
                b = b.min(sums[c] / counts[c] as f64);
            }
        }
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Davies-Bouldin index: mean over clusters of the worst
/// `(S_i + S_j) / d(mu_i, mu_j)` ratio, with S the mean distance to the
/// cluster centroid. Lower is better-separated.
pub fn davies_bouldin(x: &Matrix, labels: &[u32]) -> Result<f64> {
    let n = x.rows();
    if n != labels.len() || n == 0 {
        return Err(Error::Invalid("one label per row".into()));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    if num_classes < 2 {
        return Err(Error::Invalid(
            "davies-bouldin needs at least two clusters".into(),
        ));
    }
    let target = crate::condense::compute_centroids(x, labels, num_classes)?;
    let mut scatter = vec![0.0f64; num_classes];
    let mut counts = vec![0usize; num_classes];
    for i in 0..n {
        let c = labels[i] as usize;
        scatter[c] += x.row_dist2(i, &target.means, c).sqrt();
        counts[c] += 1;
    }
    for c in 0..num_classes {
        scatter[c] /= counts[c] as f64;
    }
    let mut total = 0.0;
    for i in 0..num_classes {
        let mut worst = 0.0f64;
        for j in 0..num_classes {
            if i == j {
                continue;
            }
            let m = target.means.row_dist2(i, &target.means, j).sqrt();
            let ratio = if m > 0.0 {
                (scatter[i] + scatter[j]) / m
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
        total += worst;
    }
    Ok(total / num_classes as f64)
}

/// Calinski-Harabasz index: between-cluster over within-cluster variance,
/// degree-of-freedom corrected. Higher is better-separated. A zero
/// within-cluster scatter yields infinity.
pub fn calinski_harabasz(x: &Matrix, labels: &[u32]) -> Result<f64> {
    let n = x.rows();
    if n != labels.len() || n == 0 {
        return Err(Error::Invalid("one label per row".into()));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    if num_classes < 2 || n <= num_classes {
        return Err(Error::Invalid(
            "calinski-harabasz needs at least two clusters and more rows than clusters".into(),
        ));
    }
    let target = crate::condense::compute_centroids(x, labels, num_classes)?;
    let d = x.cols();
    let mut overall = vec![0.0f64; d];
    for i in 0..n {
        for (o, &v) in overall.iter_mut().zip(x.row(i)) {
            *o += v;
        }
    }
    for o in overall.iter_mut() {
        *o /= n as f64;
    }
    let counts = {
        let mut counts = vec![0usize; num_classes];
        for &l in labels {
            counts[l as usize] += 1;
        }
        counts
    };
    let mut between = 0.0;
    for c in 0..num_classes {
        let mu = target.means.row(c);
        let dist2: f64 = mu
            .iter()
            .zip(&overall)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum();
        between += counts[c] as f64 * dist2;
    }
    let mut within = 0.0;
    for i in 0..n {
        within += x.row_dist2(i, &target.means, labels[i] as usize);
    }
    let numer = between / (num_classes - 1) as f64;
    let denom = within / (n - num_classes) as f64;
    Ok(if denom > 0.0 { numer / denom } else { f64::INFINITY })
}

/// All intrinsic metrics of a condensed graph in one struct.
pub fn condensed_metrics(cond: &CondensedGraph) -> Result<CondensedMetrics> {
    let labels = cond.labels.as_slice();
    Ok(CondensedMetrics {
        nodes: cond.graph.num_nodes(),
        edges: cond.graph.num_edges(),
        homophily: homophily(&cond.graph, &cond.labels).ok(),
        silhouette: silhouette_score(&cond.features, labels)?,
        davies_bouldin: davies_bouldin(&cond.features, labels)?,
        calinski_harabasz: calinski_harabasz(&cond.features, labels)?,
    })
}

// ---------------------------------------------------------------------------
// Link metrics
// ---------------------------------------------------------------------------

/// Binary link-prediction quality at a score threshold, plus threshold-free
/// AUC (Mann-Whitney with tie correction).
#[derive(Debug, Clone, Copy)]
pub struct LinkMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
}

pub fn link_metrics(scores: &[f64], targets: &[bool], threshold: f64) -> Result<LinkMetrics> {
    if scores.len() != targets.len() || scores.is_empty() {
        return Err(Error::Invalid("one target per score".into()));
    }
    let n_pos = targets.iter().filter(|&&t| t).count();
    let n_neg = targets.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Invalid(
            "link metrics need both positives and negatives".into(),
        ));
    }
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    let mut correct = 0usize;
    for (&s, &t) in scores.iter().zip(targets) {
        let pred = s >= threshold;
        if pred == t {
            correct += 1;
        }
        match (pred, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let accuracy = correct as f64 / targets.len() as f64;
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };

    // AUC by average ranks (ties share the mean rank).
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut ranks = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j + 2) as f64 / 2.0; // 1-based
        for &k in &order[i..=j] {
            ranks[k] = mean_rank;
        }
        i = j + 1;
    }
    let pos_rank_sum: f64 = ranks
        .iter()
        .zip(targets)
        .filter(|(_, &t)| t)
        .map(|(&r, _)| r)
        .sum();
    let auc = (pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos * n_neg) as f64;

    Ok(LinkMetrics {
        accuracy,
        precision,
        recall,
        f1,
        auc,
    })
}

// ---------------------------------------------------------------------------
