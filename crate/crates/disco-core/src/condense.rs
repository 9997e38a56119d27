//! Node condensation: learn a small synthetic feature matrix whose rows
//! train classifiers the way the full training set does.
//!
//! The optimization is deliberately GNN-free. A plain MLP classifier is
//! pre-trained on the real training rows and then frozen; the condensed
//! features X' are the only thing optimized, by first-order descent on
//!
//! ```text
//! L(X') = CE(classifier(X'), y')                    (classification)
//!       + alpha * sum_c lambda_c ||mu'_c - mu_c||^2  (centroid alignment)
//!       + beta  * sum_i sum_{j in A(i)} ||X'_i - X_j||^2   (anchor)
//! ```
//!
//! where mu_c / mu'_c are real/condensed class centroids, lambda_c is the
//! real class frequency, and A(i) holds the `m` nearest real same-class
//! training nodes of condensed node i (its anchors). The anchors also feed
//! edge translation later: they are the stand-in neighborhoods of the
//! synthetic nodes.

use crate::coreset::{allocate_budget, group_by_class, kcenter_select, ClassBudget};
use crate::data::{Dataset, LabelVector};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::matrix::{Matrix, SparseRows};
use crate::neural::{
    adam_step_mlp, argmax_accuracy, init_mlp, mlp_backward, mlp_forward, softmax_cross_entropy,
    AdamState, ForwardMode, Input, MlpParams,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Below this density the classifier consumes features through the
/// compressed-rows path. Bag-of-words matrices sit around 1%.
const SPARSE_INPUT_DENSITY: f64 = 0.25;

pub(crate) fn maybe_sparse(x: &Matrix) -> Option<SparseRows> {
    let sp = SparseRows::from_dense(x);
    (sp.density() < SPARSE_INPUT_DENSITY).then_some(sp)
}

pub(crate) fn as_input<'a>(dense: &'a Matrix, sparse: &'a Option<SparseRows>) -> Input<'a> {
    match sparse {
        Some(s) => Input::Sparse(s),
        None => Input::Dense(dense),
    }
}

// ---------------------------------------------------------------------------
// Classifier pretraining
// ---------------------------------------------------------------------------

/// MLP classifier hyperparameters.
#[derive(Debug, Clone)]
pub struct ClassifierConfig {
    /// Number of linear layers (3 means in -> hidden -> hidden -> out).
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            layers: 3,
            hidden: 256,
            dropout: 0.0,
            lr: 0.01,
            weight_decay: 0.0,
            epochs: 500,
        }
    }
}

impl ClassifierConfig {
    pub fn dims(&self, input: usize, classes: usize) -> Vec<usize> {
        assert!(self.layers >= 1);
        let mut dims = vec![input];
        dims.extend(std::iter::repeat(self.hidden).take(self.layers - 1));
        dims.push(classes);
        dims
    }

    fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.epochs == 0 {
            return Err(Error::Invalid(
                "classifier layers, hidden width, and epochs must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Invalid(format!(
                "classifier dropout must be in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(self.lr > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::Invalid("bad classifier lr/weight decay".into()));
        }
        Ok(())
    }
}

/// Train the label-space classifier on the real training rows (full batch,
/// Adam). Returns the trained parameters and the final training accuracy.
pub fn pretrain_classifier(
    x_train: &Matrix,
    y_train: &[u32],
    num_classes: usize,
    cfg: &ClassifierConfig,
    seed: u64,
) -> Result<(MlpParams, f64)> {
    cfg.validate()?;
    if x_train.rows() != y_train.len() || x_train.rows() == 0 {
        return Err(Error::Invalid("classifier needs one label per row".into()));
    }
    let dims = cfg.dims(x_train.cols(), num_classes);
    let mut params = init_mlp(&dims, derive_seed(seed, 0x11));
    let mut adam = AdamState::new_for_mlp(&params, cfg.lr);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x12));

    let sparse = maybe_sparse(x_train);
    for _ in 0..cfg.epochs {
        let input = as_input(x_train, &sparse);
        let mode = if cfg.dropout > 0.0 {
            ForwardMode::Train {
                dropout: cfg.dropout,
                rng: &mut dropout_rng,
            }
        } else {
            ForwardMode::Eval
        };
        let (logits, trace) = mlp_forward(&params, input, mode);
        let (loss, grad_logits) = softmax_cross_entropy(&logits, y_train);
        if !loss.is_finite() {
            return Err(Error::Numeric("classifier loss diverged".into()));
        }
        let (grads, _) = mlp_backward(&params, input, &trace, &grad_logits, false);
        adam_step_mlp(&mut adam, &mut params, &grads, cfg.weight_decay);
    }

    let input = as_input(x_train, &sparse);
    let (logits, _) = mlp_forward(&params, input, ForwardMode::Eval);
    let acc = argmax_accuracy(&logits, y_train);
    Ok((params, acc))
}

// ---------------------------------------------------------------------------
// Centroids and anchors
// ---------------------------------------------------------------------------

/// Real-side alignment target: per-class centroids and class frequencies.
#[derive(Debug, Clone)]
pub struct CentroidTarget {
    /// `num_classes x dim`; row c is the centroid of class c.
    pub means: Matrix,
    /// Class frequencies lambda_c (sum to 1).
    pub weights: Vec<f64>,
}

/// Per-class feature centroids and frequencies of the given rows.
/// Every class must be represented.
pub fn compute_centroids(x: &Matrix, labels: &[u32], num_classes: usize) -> Result<CentroidTarget> {
    if x.rows() != labels.len() || x.rows() == 0 {
        return Err(Error::Invalid("centroids need one label per row".into()));
    }
    let mut means = Matrix::zeros(num_classes, x.cols());
    let mut counts = vec![0usize; num_classes];
    for (i, &l) in labels.iter().enumerate() {
        let c = l as usize;
        if c >= num_classes {
            return Err(Error::Invalid(format!("label {l} out of range")));
        }
        counts[c] += 1;
        let row = x.row(i);
        let mrow = means.row_mut(c);
        for (m, &v) in mrow.iter_mut().zip(row) {
            *m += v;
        }
    }
    for c in 0..num_classes {
        if counts[c] == 0 {
            return Err(Error::Invalid(format!("class {c} has no rows")));
        }
        let inv = 1.0 / counts[c] as f64;
        for m in means.row_mut(c) {
            *m *= inv;
        }
    }
    let total = labels.len() as f64;
    let weights = counts.iter().map(|&n| n as f64 / total).collect();
    Ok(CentroidTarget { means, weights })
}

/// Anchors: for each condensed node, the ids of its `m` nearest same-class
/// real training nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    anchors: Vec<Vec<u32>>,
}

impl AnchorSet {
    /// Build from explicit per-node anchor lists (each must be non-empty).
    pub fn new(anchors: Vec<Vec<u32>>) -> Result<Self> {
        if anchors.iter().any(|a| a.is_empty()) {
            return Err(Error::Invalid("every node needs at least one anchor".into()));
        }
        Ok(AnchorSet { anchors })
    }

    pub fn node(&self, i: usize) -> &[u32] {
        &self.anchors[i]
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u32]> {
        self.anchors.iter().map(|a| a.as_slice())
    }
}

/// Find the `m` nearest same-class training nodes of every condensed row
/// (Euclidean distance, ties to the lower node id). `pools[c]` holds the
/// real training ids of class c as row indices into `x_real`; a class pool
/// smaller than `m` contributes all its nodes.
pub fn find_anchors(
    x_cond: &Matrix,
    y_cond: &[u32],
    x_real: &Matrix,
    pools: &[Vec<u32>],
    m: usize,
) -> Result<AnchorSet> {
    if x_cond.rows() != y_cond.len() {
        return Err(Error::Invalid("anchors need one label per row".into()));
    }
    if x_cond.cols() != x_real.cols() {
        return Err(Error::Invalid(
            "condensed and real feature widths differ".into(),
        ));
    }
    if m == 0 {
        return Err(Error::Invalid("anchor count m must be positive".into()));
    }
    let mut anchors = Vec::with_capacity(x_cond.rows());
    for i in 0..x_cond.rows() {
        let c = y_cond[i] as usize;
        let pool = pools.get(c).filter(|p| !p.is_empty()).ok_or_else(|| {
            Error::Invalid(format!("class {c} has no anchor candidates"))
        })?;
        let mut scored: Vec<(f64, u32)> = pool
            .iter()
            .map(|&id| (x_cond.row_dist2(i, x_real, id as usize), id))
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        anchors.push(scored.iter().take(m).map(|&(_, id)| id).collect());
    }
    Ok(AnchorSet { anchors })
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

/// The three loss components and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub classification: f64,
    pub alignment: f64,
    pub anchor: f64,
    pub total: f64,
}

/// Condensation loss and its gradient with respect to the condensed
/// features. The classifier is frozen (evaluation mode); only X' moves.
pub fn condensation_loss(
    classifier: &MlpParams,
    x_cond: &Matrix,
    y_cond: &[u32],
    target: &CentroidTarget,
    anchors: &AnchorSet,
    x_real: &Matrix,
    alpha: f64,
    beta: f64,
) -> Result<(LossParts, Matrix)> {
    let n = x_cond.rows();
    let d = x_cond.cols();
    if n != y_cond.len() || n != anchors.len() {
        return Err(Error::Invalid(
            "condensed rows, labels, and anchors must align".into(),
        ));
    }
    let num_classes = target.means.rows();

    // Classification term through the frozen classifier.
    let (logits, trace) = mlp_forward(classifier, Input::Dense(x_cond), ForwardMode::Eval);
    let (l_cls, grad_logits) = softmax_cross_entropy(&logits, y_cond);
    let (_, grad_input) = mlp_backward(classifier, Input::Dense(x_cond), &trace, &grad_logits, true);
    let mut grad = grad_input.expect("input gradient requested");

    // Centroid alignment: lambda-weighted squared distance between real and
    // condensed class centroids.
    let cond_target = compute_centroids(x_cond, y_cond, num_classes)?;
    let mut class_count = vec![0usize; num_classes];
    for &y in y_cond {
        class_count[y as usize] += 1;
    }
    let mut l_alg = 0.0;
    // Per-class gradient direction, reused for every row of the class.
    let mut class_grad = Matrix::zeros(num_classes, d);
    for c in 0..num_classes {
        let lambda = target.weights[c];
        let real = target.means.row(c);
        let cond = cond_target.means.row(c);
        let g = class_grad.row_mut(c);
        let inv_n = 1.0 / class_count[c] as f64;
        for k in 0..d {
            let diff = cond[k] - real[k];
            l_alg += lambda * diff * diff;
            g[k] = alpha * lambda * 2.0 * diff * inv_n;
        }
    }
    for i in 0..n {
        let c = y_cond[i] as usize;
        let g = class_grad.row(c).to_vec();
        for (gv, &cv) in grad.row_mut(i).iter_mut().zip(&g) {
            *gv += cv;
        }
    }

    // Anchor proximity: plain double sum of squared distances to each
    // node's anchors.
    let mut l_anc = 0.0;
    for i in 0..n {
        let grow = grad.row_mut(i);
        // Summed over this node's anchors: d/dX'_i = 2 beta (m X'_i - sum Z_j)
        for &a in anchors.node(i) {
            let zrow = x_real.row(a as usize);
            let xrow = &x_cond.row(i);
            for k in 0..d {
                let diff = xrow[k] - zrow[k];
                l_anc += diff * diff;
                grow[k] += beta * 2.0 * diff;
            }
        }
    }

    let total = l_cls + alpha * l_alg + beta * l_anc;
    if !total.is_finite() {
        return Err(Error::Numeric("condensation loss diverged".into()));
    }
    Ok((
        LossParts {
            classification: l_cls,
            alignment: l_alg,
            anchor: l_anc,
            total,
        },
        grad,
    ))
}

// ---------------------------------------------------------------------------
// The condensation loop
// ---------------------------------------------------------------------------

/// Configuration for [`condense`].
#[derive(Debug, Clone)]
pub struct CondenseConfig {
    /// Fraction of the training set to keep, in (0, 1].
    pub reduction_rate: f64,
    /// Weight of the centroid alignment term.
    pub alpha: f64,
    /// Weight of the anchor proximity term.
    pub beta: f64,
    /// Anchors per condensed node.
    pub anchors_m: usize,
    /// Feature-optimization epochs.
    pub epochs: usize,
    /// Adam learning rate for the condensed features.
    pub lr_features: f64,
    /// Recompute anchors every this many epochs (1 = every epoch).
    pub anchor_refresh_every: usize,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl Default for CondenseConfig {
    fn default() -> Self {
        CondenseConfig {
            reduction_rate: 0.25,
            alpha: 50.0,
            beta: 1.0,
            anchors_m: 1,
            epochs: 1500,
            lr_features: 0.01,
            anchor_refresh_every: 1,
            classifier: ClassifierConfig::default(),
            seed: 0,
        }
    }
}

impl CondenseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reduction_rate > 0.0 && self.reduction_rate <= 1.0) {
            return Err(Error::Invalid(format!(
                "reduction rate must be in (0, 1], got {}",
                self.reduction_rate
            )));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Invalid("alpha and beta must be nonnegative".into()));
        }
        if self.anchors_m == 0 || self.epochs == 0 || self.anchor_refresh_every == 0 {
            return Err(Error::Invalid(
                "anchors_m, epochs, and anchor_refresh_every must be positive".into(),
            ));
        }
        if !(self.lr_features > 0.0) {
            return Err(Error::Invalid("feature learning rate must be positive".into()));
        }
        self.classifier.validate()
    }
}

/// One logged epoch of the condensation loop.
#[derive(Debug, Clone, Copy)]
pub struct CondenseEpoch {
    pub epoch: usize,
    pub classification: f64,
    pub alignment: f64,
    pub anchor: f64,
    pub total: f64,
}

/// Everything condensation produces: the synthetic features and labels, the
/// anchors of the final features (edge translation wants them), the frozen
/// classifier, the per-class budget, and the loss log.
#[derive(Debug, Clone)]
pub struct CondenseResult {
    pub features: Matrix,
    pub labels: LabelVector,
    pub anchors: AnchorSet,
    pub classifier: MlpParams,
    pub classifier_train_acc: f64,
    pub budget: ClassBudget,
    pub log: Vec<CondenseEpoch>,
}

/// Pre-train the classifier on the dataset's training rows, then condense.
pub fn condense(ds: &Dataset, cfg: &CondenseConfig) -> Result<CondenseResult> {
    cfg.validate()?;
    ds.validate()?;
    let train_idx = ds.split.train_indices();
    let train_rows: Vec<usize> = train_idx.iter().map(|&i| i as usize).collect();
    let x_train = ds.features.select_rows(&train_rows);
    let y_train: Vec<u32> = train_idx
        .iter()
        .map(|&i| ds.labels.get(i as usize))
        .collect();
    let (classifier, acc) = pretrain_classifier(
        &x_train,
        &y_train,
        ds.labels.num_classes(),
        &cfg.classifier,
        cfg.seed,
    )?;
    condense_with_classifier(ds, classifier, acc, cfg)
}

/// Condense with an already-trained (frozen) classifier — the staged CLI
/// path, where pretraining and condensation are separate, resumable steps.
pub fn condense_with_classifier(
    ds: &Dataset,
    classifier: MlpParams,
    classifier_train_acc: f64,
    cfg: &CondenseConfig,
) -> Result<CondenseResult> {
    cfg.validate()?;
    ds.validate()?;
    let num_classes = ds.labels.num_classes();
    let expected_dims = cfg.classifier.dims(ds.features.cols(), num_classes);
    if classifier.dims() != expected_dims {
        return Err(Error::Invalid(format!(
            "classifier dims {:?} do not match configured {:?}",
            classifier.dims(),
            expected_dims
        )));
    }

    let train_idx = ds.split.train_indices();
    let y_train: Vec<u32> = train_idx
        .iter()
        .map(|&i| ds.labels.get(i as usize))
        .collect();
    let budget = allocate_budget(&y_train, num_classes, cfg.reduction_rate)?;
    let pools = group_by_class(&train_idx, &ds.labels);

    // Initialize X' with the k-center rows of each class — a well-spread
    // deterministic cover of the class geometry; the condensed label vector
    // is class-major by construction.
    let init_ids = kcenter_select(
        &ds.features,
        &pools,
        &budget,
        derive_seed(cfg.seed, 0x21),
    )?;
    let init_rows: Vec<usize> = init_ids.iter().map(|&i| i as usize).collect();
    let mut x_cond = ds.features.select_rows(&init_rows);
    let mut y_cond: Vec<u32> = Vec::with_capacity(budget.total());
    for c in 0..num_classes {
        y_cond.extend(std::iter::repeat(c as u32).take(budget.class(c)));
    }

    // Alignment target from the real training rows.
    let train_rows: Vec<usize> = train_idx.iter().map(|&i| i as usize).collect();
    let x_train = ds.features.select_rows(&train_rows);
    let target = compute_centroids(&x_train, &y_train, num_classes)?;

    let mut adam = AdamState::new(&[x_cond.as_slice().len()], cfg.lr_features);
    let mut anchors = find_anchors(&x_cond, &y_cond, &ds.features, &pools, cfg.anchors_m)?;
    let mut log = Vec::with_capacity(cfg.epochs);
    // The returned features are the best state seen, not the last one: each
    // epoch's loss is evaluated before its update, and the lowest total wins
    // (earliest epoch on ties, so min(log.total) identifies the snapshot).
    let mut best_total = f64::INFINITY;
    let mut best_x = x_cond.clone();
    for epoch in 0..cfg.epochs {
        if epoch > 0 && epoch % cfg.anchor_refresh_every == 0 {
            anchors = find_anchors(&x_cond, &y_cond, &ds.features, &pools, cfg.anchors_m)?;
        }
        let (parts, grad) = condensation_loss(
            &classifier,
            &x_cond,
            &y_cond,
            &target,
            &anchors,
            &ds.features,
            cfg.alpha,
            cfg.beta,
        )?;
        log.push(CondenseEpoch {
            epoch,
            classification: parts.classification,
            alignment: parts.alignment,
            anchor: parts.anchor,
            total: parts.total,
        });
        if parts.total < best_total {
            best_total = parts.total;
            best_x.as_mut_slice().copy_from_slice(x_cond.as_slice());
        }
        let mut tensors: Vec<&mut [f64]> = vec![x_cond.as_mut_slice()];
        adam.step(&mut tensors, &[grad.as_slice()]);
        if !x_cond.is_finite() {
            return Err(Error::Numeric(format!(
                "condensed features diverged at epoch {epoch}"
            )));
        }
    }
    let x_cond = best_x;

    // Anchors consistent with the features actually returned.
    let anchors = find_anchors(&x_cond, &y_cond, &ds.features, &pools, cfg.anchors_m)?;
    Ok(CondenseResult {
        features: x_cond,
        labels: LabelVector::new(y_cond, num_classes)?,
        anchors,
        classifier,
        classifier_train_acc,
        budget,
        log,
    })
}
