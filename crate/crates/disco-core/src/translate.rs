//! Edge translation: give condensed nodes a topology.
//!
//! A link predictor is pre-trained on the *original* graph to answer "are
//! these two nodes connected?" from their features. The twist that makes it
//! transfer to synthetic nodes is neighbor awareness: each node is
//! represented by its convolved features `H_v = [x_v ; agg(neighbors of v)]`,
//! so the predictor sees both the node and its surroundings. Condensed nodes
//! have no surroundings — their anchors (nearest real training nodes) stand
//! in as pseudo-neighbors.
//!
//! Scores are symmetrized by averaging both concatenation orders:
//! `s(i,j) = sigmoid((f([H_i;H_j]) + f([H_j;H_i])) / 2)`. Pairs scoring at
//! least `delta` become weighted edges of the condensed graph.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::condense::AnchorSet;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::matrix::{Matrix, SparseRows};
use crate::neural::{
    adam_step_mlp, bce_with_logits, init_mlp, mlp_backward, mlp_forward, sigmoid, AdamState,
    ForwardMode, Input, MlpParams,
};

/// Neighborhood aggregation flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregator {
    /// Componentwise maximum of neighbor rows; edge weights are ignored.
    Max,
    /// Weighted mean: sum of w * x_v over the weighted degree.
    Mean,
    /// Weighted sum of neighbor rows.
    Sum,
}

impl std::str::FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Aggregator::Max),
            "mean" => Ok(Aggregator::Mean),
            "sum" => Ok(Aggregator::Sum),
            other => Err(Error::Invalid(format!(
                "unknown aggregator '{other}' (expected max/mean/sum)"
            ))),
        }
    }
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Aggregator::Max => "max",
            Aggregator::Mean => "mean",
            Aggregator::Sum => "sum",
        })
    }
}

/// Aggregate `x` rows selected by `ids` into `out`. `weights` must align
/// with `ids` when present; Max ignores weights entirely. Empty `ids`
/// leaves `out` zero — an isolated node aggregates to the zero vector.
fn aggregate_rows(x: &Matrix, ids: &[u32], weights: Option<&[f64]>, agg: Aggregator, out: &mut [f64]) {
    if ids.is_empty() {
        return;
    }
    match agg {
        Aggregator::Max => {
            out.copy_from_slice(x.row(ids[0] as usize));
            for &v in &ids[1..] {
                for (o, &xv) in out.iter_mut().zip(x.row(v as usize)) {
                    if xv > *o {
                        *o = xv;
                    }
                }
            }
        }
        Aggregator::Sum | Aggregator::Mean => {
            let mut total_w = 0.0;
            for (k, &v) in ids.iter().enumerate() {
                let w = weights.map_or(1.0, |ws| ws[k]);
                total_w += w;
                for (o, &xv) in out.iter_mut().zip(x.row(v as usize)) {
                    *o += w * xv;
                }
            }
            if agg == Aggregator::Mean && total_w != 0.0 {
                for o in out.iter_mut() {
                    *o /= total_w;
                }
            }
        }
    }
}

/// Neighborhood features of every node: row v is `agg` over v's neighbors
/// in `g`. Degree-zero rows are zero.
pub fn aggregate_neighbors(g: &SparseGraph, x: &Matrix, agg: Aggregator) -> Matrix {
    assert_eq!(g.num_nodes(), x.rows(), "graph/features size mismatch");
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for u in 0..g.num_nodes() as u32 {
        let ids = g.neighbors(u);
        let ws = g.neighbor_weights(u);
        aggregate_rows(x, ids, Some(ws), agg, out.row_mut(u as usize));
    }
    out
}

/// Convolved node representation: `[x_v ; h_v]` per row.
pub fn build_convolved(x: &Matrix, h: &Matrix) -> Matrix {
    assert_eq!(x.rows(), h.rows(), "row count mismatch");
    let (n, d, dh) = (x.rows(), x.cols(), h.cols());
    let mut out = Matrix::zeros(n, d + dh);
    for i in 0..n {
        let row = out.row_mut(i);
        row[..d].copy_from_slice(x.row(i));
        row[d..].copy_from_slice(h.row(i));
    }
    out
}

/// Pseudo-neighborhood features for condensed nodes: row i is `agg` over the
/// real features of node i's anchors (unit weights).
pub fn pseudo_neighbor_features(anchors: &AnchorSet, x_real: &Matrix, agg: Aggregator) -> Matrix {
    let mut out = Matrix::zeros(anchors.len(), x_real.cols());
    for (i, ids) in anchors.iter().enumerate() {
        aggregate_rows(x_real, ids, None, agg, out.row_mut(i));
    }
    out
}

// ---------------------------------------------------------------------------
// The predictor
// ---------------------------------------------------------------------------

/// A trained link predictor: a scoring MLP plus the representation recipe it
/// was trained with (aggregator and whether neighborhoods are used at all).
#[derive(Debug, Clone)]
pub struct LinkPredictor {
    pub mlp: MlpParams,
    pub aggregator: Aggregator,
    /// When false, the predictor scores raw feature pairs ([x_i;x_j]) with
    /// no neighborhood information — the ablation baseline.
    pub neighbor_aware: bool,
}

impl LinkPredictor {
    /// Width the representation rows must have for this predictor.
    pub fn rep_width(&self) -> usize {
        self.mlp.weights[0].rows() / 2
    }
}

/// Link predictor training configuration.
#[derive(Debug, Clone)]
pub struct TranslateConfig {
    /// Linear layers in the scoring MLP.
    pub layers: usize,
    pub hidden: usize,
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
    /// Optimization steps; each consumes one batch of positives (cycling
    /// through the training edges) and freshly sampled negatives.
    pub steps: usize,
    /// Positive pairs per step.
    pub batch_positives: usize,
    /// Negatives sampled per positive, each step.
    pub negative_ratio: usize,
    /// Fraction of edges held out for evaluation.
    pub holdout_frac: f64,
    pub aggregator: Aggregator,
    pub neighbor_aware: bool,
    /// Score threshold for keeping a condensed edge.
    pub delta: f64,
    pub seed: u64,
}

impl Default for TranslateConfig {
    fn default() -> Self {
        TranslateConfig {
            layers: 3,
            hidden: 256,
            dropout: 0.0,
            lr: 0.01,
            weight_decay: 0.0,
            steps: 300,
            batch_positives: 512,
            negative_ratio: 3,
            holdout_frac: 0.1,
            aggregator: Aggregator::Max,
            neighbor_aware: true,
            delta: 0.95,
            seed: 0,
        }
    }
}

impl TranslateConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.steps == 0 || self.batch_positives == 0 {
            return Err(Error::Invalid(
                "layers, hidden, steps, and batch_positives must be positive".into(),
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
        if self.negative_ratio == 0 {
            return Err(Error::Invalid("negative_ratio must be positive".into()));
        }
        if !(self.holdout_frac > 0.0 && self.holdout_frac < 1.0) {
            return Err(Error::Invalid(format!(
                "holdout fraction must be in (0, 1), got {}",
                self.holdout_frac
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Invalid(format!(
                "delta must be in (0, 1), got {}",
                self.delta
            )));
        }
        Ok(())
    }

    pub fn mlp_dims(&self, rep_width: usize) -> Vec<usize> {
        let mut dims = vec![2 * rep_width];
        dims.extend(std::iter::repeat(self.hidden).take(self.layers - 1));
        dims.push(1);
        dims
    }
}

/// Representation rows with an optional compressed view for sparse inputs.
struct Reps {
    dense: Matrix,
    sparse: Option<SparseRows>,
}

impl Reps {
    fn new(dense: Matrix) -> Self {
        let sparse = crate::condense::maybe_sparse(&dense);
        Reps { dense, sparse }
    }

    fn width(&self) -> usize {
        self.dense.cols()
    }

    /// Rows `[H_i ; H_j]` then `[H_j ; H_i]` for each pair, as the MLP input
    /// batch (2 rows per pair). Assembled sparsely when the reps are sparse.
    fn pair_batch(&self, pairs: &[(u32, u32)]) -> PairBatch {
        let d = self.width();
        match &self.sparse {
            Some(sp) => {
                let mut offsets = Vec::with_capacity(pairs.len() * 2 + 1);
                let mut indices = Vec::new();
                let mut values = Vec::new();
                offsets.push(0);
                let mut push_row = |a: u32, b: u32| {
                    let (ai, av) = sp.row(a as usize);
                    let (bi, bv) = sp.row(b as usize);
                    indices.extend_from_slice(ai);
                    values.extend_from_slice(av);
                    indices.extend(bi.iter().map(|&j| j + d as u32));
                    values.extend_from_slice(bv);
                    offsets.push(indices.len());
                };
                for &(i, j) in pairs {
                    push_row(i, j);
                    push_row(j, i);
                }
                PairBatch::Sparse(SparseRows::from_parts(
                    pairs.len() * 2,
                    2 * d,
                    offsets,
                    indices,
                    values,
                ))
            }
            None => {
                let mut m = Matrix::zeros(pairs.len() * 2, 2 * d);
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    let row = m.row_mut(2 * k);
                    row[..d].copy_from_slice(self.dense.row(i as usize));
                    row[d..].copy_from_slice(self.dense.row(j as usize));
                    let row = m.row_mut(2 * k + 1);
                    row[..d].copy_from_slice(self.dense.row(j as usize));
                    row[d..].copy_from_slice(self.dense.row(i as usize));
                }
                PairBatch::Dense(m)
            }
        }
    }
}

enum PairBatch {
    Dense(Matrix),
    Sparse(SparseRows),
}

impl PairBatch {
    fn input(&self) -> Input<'_> {
        match self {
            PairBatch::Dense(m) => Input::Dense(m),
            PairBatch::Sparse(s) => Input::Sparse(s),
        }
    }
}

/// Symmetrized pair logits: `(f([H_i;H_j]) + f([H_j;H_i])) / 2` per pair.
/// Addition is commutative in IEEE arithmetic, so swapping i and j gives the
/// bitwise-identical logit.
fn pair_logits(mlp: &MlpParams, batch: &PairBatch) -> Vec<f64> {
    let (z, _) = mlp_forward(mlp, batch.input(), ForwardMode::Eval);
    z.as_slice()
        .chunks_exact(2)
        .map(|ab| (ab[0] + ab[1]) / 2.0)
        .collect()
}

/// Score one pair of representation rows in [0, 1].
pub fn score_pair(predictor: &LinkPredictor, h_i: &[f64], h_j: &[f64]) -> f64 {
    assert_eq!(h_i.len(), h_j.len(), "representation widths differ");
    assert_eq!(
        h_i.len(),
        predictor.rep_width(),
        "representation width does not match predictor"
    );
    let mut m = Matrix::zeros(2, h_i.len() * 2);
    let d = h_i.len();
    m.row_mut(0)[..d].copy_from_slice(h_i);
    m.row_mut(0)[d..].copy_from_slice(h_j);
    m.row_mut(1)[..d].copy_from_slice(h_j);
    m.row_mut(1)[d..].copy_from_slice(h_i);
    let batch = PairBatch::Dense(m);
    sigmoid(pair_logits(&predictor.mlp, &batch)[0])
}

/// Score many pairs against the given representation rows, chunked.
pub fn score_pairs(predictor: &LinkPredictor, reps: &Matrix, pairs: &[(u32, u32)]) -> Vec<f64> {
    assert_eq!(
        reps.cols(),
        predictor.rep_width(),
        "representation width does not match predictor"
    );
    let reps = Reps::new(reps.clone());
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(2048) {
        let batch = reps.pair_batch(chunk);
        out.extend(pair_logits(&predictor.mlp, &batch).into_iter().map(sigmoid));
    }
    out
}

/// Held-out link evaluation data: scores and ground truth, computed on the
/// held-out positive edges plus an equal number of sampled non-edges.
#[derive(Debug, Clone)]
pub struct HeldOut {
    pub scores: Vec<f64>,
    pub targets: Vec<bool>,
}

fn sample_negatives(
    g: &SparseGraph,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(u32, u32)>> {
    let n = g.num_nodes() as u32;
    if n < 2 {
        return Err(Error::Invalid("graph too small for negative pairs".into()));
    }
    // Guard against near-complete graphs where rejection would spin.
    let possible = g.num_nodes() * (g.num_nodes() - 1) / 2;
    if g.num_edges() * 10 >= possible * 9 {
        return Err(Error::Invalid(
            "graph too dense for negative sampling".into(),
        ));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && !g.has_edge(u, v) {
            out.push((u.min(v), u.max(v)));
        }
    }
    Ok(out)
}

/// Pre-train a link predictor on the original graph.
///
/// `reps` are the per-node representation rows: convolved features for the
/// neighbor-aware flavor, raw features for the neighbor-blind ablation (the
/// caller builds them; see [`aggregate_neighbors`] and [`build_convolved`]).
/// Edges are split into train/held-out positives by a seeded shuffle;
/// negatives are freshly sampled non-edges, `negative_ratio` per positive,
/// every step. Returns the predictor and its held-out evaluation scores.
pub fn pretrain_link_predictor(
    g: &SparseGraph,
    reps: &Matrix,
    cfg: &TranslateConfig,
) -> Result<(LinkPredictor, HeldOut)> {
    cfg.validate()?;
    if g.num_nodes() != reps.rows() {
        return Err(Error::Invalid(
            "representation rows must match node count".into(),
        ));
    }
    let mut positives: Vec<(u32, u32)> = g.edges().map(|(u, v, _)| (u, v)).collect();
    if positives.len() < 2 {
        return Err(Error::Invalid(
            "graph needs at least two edges to train a link predictor".into(),
        ));
    }
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x31));
    positives.shuffle(&mut shuffle_rng);
    let n_hold = ((positives.len() as f64 * cfg.holdout_frac).round() as usize)
        .clamp(1, positives.len() - 1);
    let held_out: Vec<(u32, u32)> = positives.split_off(positives.len() - n_hold);

    let reps = Reps::new(reps.clone());
    let mut mlp = init_mlp(&cfg.mlp_dims(reps.width()), derive_seed(cfg.seed, 0x32));
    let mut adam = AdamState::new_for_mlp(&mlp, cfg.lr);
    let mut neg_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x33));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x34));

    let mut cursor = 0usize;
    for _ in 0..cfg.steps {
        // One batch of positives, cycling; reshuffle at each wrap.
        let mut batch: Vec<(u32, u32)> = Vec::with_capacity(cfg.batch_positives);
        while batch.len() < cfg.batch_positives {
            if cursor == positives.len() {
                positives.shuffle(&mut shuffle_rng);
                cursor = 0;
            }
            batch.push(positives[cursor]);
            cursor += 1;
        }
        let n_pos = batch.len();
        batch.extend(sample_negatives(g, n_pos * cfg.negative_ratio, &mut neg_rng)?);
        let targets: Vec<bool> = (0..batch.len()).map(|k| k < n_pos).collect();

        let pair_batch = reps.pair_batch(&batch);
        let mode = if cfg.dropout > 0.0 {
            ForwardMode::Train {
                dropout: cfg.dropout,
                rng: &mut dropout_rng,
            }
        } else {
            ForwardMode::Eval
        };
        let (z, trace) = mlp_forward(&mlp, pair_batch.input(), mode);
        let logits: Vec<f64> = z
            .as_slice()
            .chunks_exact(2)
            .map(|ab| (ab[0] + ab[1]) / 2.0)
            .collect();
        let (loss, grad_logits) = bce_with_logits(&logits, &targets);
        if !loss.is_finite() {
            return Err(Error::Numeric("link predictor loss diverged".into()));
        }
        // Each pair logit feeds back into both of its orientation rows.
        let mut grad_rows = Matrix::zeros(z.rows(), 1);
        for (k, &glk) in grad_logits.iter().enumerate() {
            grad_rows.set(2 * k, 0, glk / 2.0);
            grad_rows.set(2 * k + 1, 0, glk / 2.0);
        }
        let (grads, _) = mlp_backward(&mlp, pair_batch.input(), &trace, &grad_rows, false);
        adam_step_mlp(&mut adam, &mut mlp, &grads, cfg.weight_decay);
    }

    let predictor = LinkPredictor {
        mlp,
        aggregator: cfg.aggregator,
        neighbor_aware: cfg.neighbor_aware,
    };

    // Held-out evaluation: the held-out positives plus as many non-edges.
    let mut eval_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0x35));
    let negatives = sample_negatives(g, held_out.len(), &mut eval_rng)?;
    let mut eval_pairs = held_out;
    let n_pos = eval_pairs.len();
    eval_pairs.extend(negatives);
    let targets: Vec<bool> = (0..eval_pairs.len()).map(|k| k < n_pos).collect();
    let mut scores = Vec::with_capacity(eval_pairs.len());
    for chunk in eval_pairs.chunks(2048) {
        let batch = reps.pair_batch(chunk);
        scores.extend(pair_logits(&predictor.mlp, &batch).into_iter().map(sigmoid));
    }
    Ok((predictor, HeldOut { scores, targets }))
}

/// Score every condensed node pair and keep those at or above `delta` as
/// weighted edges. Anchors supply the pseudo-neighborhoods for the
/// neighbor-aware representation; `x_real` is the original feature matrix
/// the anchor ids index into.
pub fn translate(
    x_cond: &Matrix,
    anchors: &AnchorSet,
    x_real: &Matrix,
    predictor: &LinkPredictor,
    delta: f64,
) -> Result<SparseGraph> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Invalid(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    let n = x_cond.rows();
    if anchors.len() != n {
        return Err(Error::Invalid("one anchor set per condensed node".into()));
    }
    let reps_dense = if predictor.neighbor_aware {
        if x_cond.cols() != x_real.cols() {
            return Err(Error::Invalid(
                "condensed and real feature widths differ".into(),
            ));
        }
        let h_n = pseudo_neighbor_features(anchors, x_real, predictor.aggregator);
        build_convolved(x_cond, &h_n)
    } else {
        x_cond.clone()
    };
    if reps_dense.cols() != predictor.rep_width() {
        return Err(Error::Invalid(format!(
            "representation width {} does not match predictor ({})",
            reps_dense.cols(),
            predictor.rep_width()
        )));
    }

    let reps = Reps::new(reps_dense);
    let mut pairs = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n as u32 {
        for j in i + 1..n as u32 {
            pairs.push((i, j));
        }
    }
    let mut edges = Vec::new();
    for chunk in pairs.chunks(2048) {
        let batch = reps.pair_batch(chunk);
        for (&(i, j), logit) in chunk.iter().zip(pair_logits(&predictor.mlp, &batch)) {
            let score = sigmoid(logit);
            if score >= delta {
                edges.push((i, j, score));
            }
        }
    }
    SparseGraph::from_edges(n, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::condense::find_anchors;

    fn star_graph() -> (SparseGraph, Matrix) {
        // 0 - 1 (w 1), 0 - 2 (w 3)
        let g = SparseGraph::from_edges(3, &[(0, 1, 1.0), (0, 2, 3.0)]).unwrap();
        let x = Matrix::from_rows(&[
            vec![1.0, 2.0],
            vec![10.0, 20.0],
            vec![100.0, 200.0],
        ]);
        (g, x)
    }

    #[test]
    fn aggregators_match_hand_computation() {
        let (g, x) = star_graph();

        let sum = aggregate_neighbors(&g, &x, Aggregator::Sum);
        assert_eq!(sum.row(0), &[310.0, 620.0]); // 1*[10,20] + 3*[100,200]
        assert_eq!(sum.row(1), &[1.0, 2.0]);
        assert_eq!(sum.row(2), &[3.0, 6.0]);

        let mean = aggregate_neighbors(&g, &x, Aggregator::Mean);
        assert_eq!(mean.row(0), &[77.5, 155.0]); // /4 (weighted degree)
        assert_eq!(mean.row(1), &[1.0, 2.0]);
        assert_eq!(mean.row(2), &[1.0, 2.0]);

        let max = aggregate_neighbors(&g, &x, Aggregator::Max);
        assert_eq!(max.row(0), &[100.0, 200.0]); // weights ignored
        assert_eq!(max.row(1), &[1.0, 2.0]);
        assert_eq!(max.row(2), &[1.0, 2.0]);
    }

    #[test]
    fn isolated_nodes_aggregate_to_zero() {
        let g = SparseGraph::from_edges(3, &[(0, 1, 1.0)]).unwrap();
        let x = Matrix::from_rows(&[vec![-5.0, 1.0], vec![2.0, -3.0], vec![7.0, 7.0]]);
        for agg in [Aggregator::Max, Aggregator::Mean, Aggregator::Sum] {
            let h = aggregate_neighbors(&g, &x, agg);
            assert_eq!(h.row(2), &[0.0, 0.0], "{agg}");
        }
    }

    #[test]
    fn convolved_features_concatenate() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let h = Matrix::from_rows(&[vec![5.0], vec![6.0]]);
        let c = build_convolved(&x, &h);
        assert_eq!(c.shape(), (2, 3));
        assert_eq!(c.row(0), &[1.0, 2.0, 5.0]);
        assert_eq!(c.row(1), &[3.0, 4.0, 6.0]);
    }

    #[test]
    fn pseudo_neighbors_aggregate_anchor_rows() {
        let x_real = Matrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 4.0], vec![0.0, 8.0]]);
        let x_cond = Matrix::from_rows(&[vec![2.0, 2.0]]);
        let pools = vec![vec![0u32, 1, 2]];
        let anchors = find_anchors(&x_cond, &[0], &x_real, &pools, 2).unwrap();
        // nearest two to (2,2): id1 (d2=5) and id0 (d2=5) — tie to lower id
        // first, but the set is {0, 1} either way.
        let mean = pseudo_neighbor_features(&anchors, &x_real, Aggregator::Mean);
        assert_eq!(mean.row(0), &[2.0, 2.0]);
        let max = pseudo_neighbor_features(&anchors, &x_real, Aggregator::Max);
        assert_eq!(max.row(0), &[3.0, 4.0]);
        let sum = pseudo_neighbor_features(&anchors, &x_real, Aggregator::Sum);
        assert_eq!(sum.row(0), &[4.0, 4.0]);
    }

    #[test]
    fn scores_are_symmetric_and_in_unit_interval() {
        let predictor = LinkPredictor {
            mlp: init_mlp(&[8, 6, 1], 3),
            aggregator: Aggregator::Max,
            neighbor_aware: true,
        };
        let a = vec![0.3, -0.4, 1.2, 0.0];
        let b = vec![-1.0, 0.8, 0.1, 0.5];
        let s_ab = score_pair(&predictor, &a, &b);
        let s_ba = score_pair(&predictor, &b, &a);
        assert_eq!(s_ab, s_ba, "symmetrization must be exact");
        assert!(s_ab > 0.0 && s_ab < 1.0);
    }

    /// Features in two tight clusters; an edge exists exactly when both
    /// endpoints share a cluster. Cluster membership is recoverable from the
    /// features, so a working predictor separates held-out edges from
    /// non-edges near-perfectly (a noisier within-cluster density would cap
    /// attainable accuracy well below 1 — same-cluster non-edges would be
    /// featurewise indistinguishable from edges).
    fn clustered_link_instance(seed: u64) -> (SparseGraph, Matrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 24usize;
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let c = if i < n / 2 { 0.0 } else { 4.0 };
            rows.push(vec![
                c + rng.gen_range(-0.3..0.3),
                -c + rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
            ]);
        }
        let mut edges = Vec::new();
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                if (i < n as u32 / 2) == (j < n as u32 / 2) {
                    edges.push((i, j, 1.0));
                }
            }
        }
        (
            SparseGraph::from_edges(n, &edges).unwrap(),
            Matrix::from_rows(&rows),
        )
    }

    fn quick_lp_config(seed: u64) -> TranslateConfig {
        TranslateConfig {
            hidden: 16,
            steps: 120,
            batch_positives: 32,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn pretraining_learns_planted_cluster_links() {
        let (g, x) = clustered_link_instance(13);
        let h = aggregate_neighbors(&g, &x, Aggregator::Max);
        let reps = build_convolved(&x, &h);
        let (predictor, held) = pretrain_link_predictor(&g, &reps, &quick_lp_config(2)).unwrap();
        assert!(predictor.neighbor_aware);
        let correct = held
            .scores
            .iter()
            .zip(&held.targets)
            .filter(|(&s, &t)| (s >= 0.5) == t)
            .count();
        let acc = correct as f64 / held.targets.len() as f64;
        assert!(acc >= 0.9, "held-out accuracy {acc}");
        assert!(held.scores.iter().all(|&s| s > 0.0 && s < 1.0));
        // Both classes are present in the evaluation set.
        assert!(held.targets.iter().any(|&t| t));
        assert!(held.targets.iter().any(|&t| !t));
    }

    /// Finite-difference oracle for the one gradient path the MLP tests do
    /// not cover: BCE through the symmetrized pair logit, where each pair's
    /// gradient is split evenly across its two orientation rows.
    #[test]
    fn pair_logit_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let reps_dense = Matrix::from_vec(
            6,
            4,
            (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let reps = Reps::new(reps_dense);
        let pairs = [(0u32, 1u32), (2, 3), (4, 5), (0, 5), (1, 4)];
        let targets = [true, false, true, true, false];
        let batch = reps.pair_batch(&pairs);
        let mlp = init_mlp(&[8, 5, 1], 42);

        let loss_of = |p: &MlpParams| {
            let (z, _) = mlp_forward(p, batch.input(), ForwardMode::Eval);
            let logits: Vec<f64> = z
                .as_slice()
                .chunks_exact(2)
                .map(|ab| (ab[0] + ab[1]) / 2.0)
                .collect();
            bce_with_logits(&logits, &targets).0
        };

        // Analytic gradients, assembled exactly as the training loop does.
        let (z, trace) = mlp_forward(&mlp, batch.input(), ForwardMode::Eval);
        let logits: Vec<f64> = z
            .as_slice()
            .chunks_exact(2)
            .map(|ab| (ab[0] + ab[1]) / 2.0)
            .collect();
        let (_, grad_logits) = bce_with_logits(&logits, &targets);
        let mut grad_rows = Matrix::zeros(z.rows(), 1);
        for (k, &glk) in grad_logits.iter().enumerate() {
            grad_rows.set(2 * k, 0, glk / 2.0);
            grad_rows.set(2 * k + 1, 0, glk / 2.0);
        }
        let (grads, _) = mlp_backward(&mlp, batch.input(), &trace, &grad_rows, false);

        let h = 1e-4;
        for l in 0..2 {
            for idx in 0..mlp.weights[l].as_slice().len() {
                let mut probe = mlp.clone();
                probe.weights[l].as_mut_slice()[idx] += h;
                let fp = loss_of(&probe);
                probe.weights[l].as_mut_slice()[idx] -= 2.0 * h;
                let fm = loss_of(&probe);
                let numeric = (fp - fm) / (2.0 * h);
                let analytic = grads.weights[l].as_slice()[idx];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-4,
                    "layer {l} weight {idx}: {analytic} vs {numeric}"
                );
            }
            for idx in 0..mlp.biases[l].len() {
                let mut probe = mlp.clone();
                probe.biases[l][idx] += h;
                let fp = loss_of(&probe);
                probe.biases[l][idx] -= 2.0 * h;
                let fm = loss_of(&probe);
                let numeric = (fp - fm) / (2.0 * h);
                let analytic = grads.biases[l][idx];
                let denom = analytic.abs().max(numeric.abs()).max(1e-6);
                assert!(
                    (analytic - numeric).abs() / denom < 1e-4,
                    "layer {l} bias {idx}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn pretraining_is_deterministic_per_seed() {
        let (g, x) = clustered_link_instance(14);
        let h = aggregate_neighbors(&g, &x, Aggregator::Max);
        let reps = build_convolved(&x, &h);
        let (p1, e1) = pretrain_link_predictor(&g, &reps, &quick_lp_config(5)).unwrap();
        let (p2, e2) = pretrain_link_predictor(&g, &reps, &quick_lp_config(5)).unwrap();
        assert_eq!(p1.mlp, p2.mlp);
        assert_eq!(e1.scores, e2.scores);
        let (p3, _) = pretrain_link_predictor(&g, &reps, &quick_lp_config(6)).unwrap();
        assert_ne!(p1.mlp, p3.mlp);
    }

    #[test]
    fn translate_thresholds_scores_into_weights() {
        let (g, x) = clustered_link_instance(15);
        let h = aggregate_neighbors(&g, &x, Aggregator::Max);
        let reps = build_convolved(&x, &h);
        let (predictor, _) = pretrain_link_predictor(&g, &reps, &quick_lp_config(7)).unwrap();

        // Condense trivially: six real nodes stand in as "synthetic" ones.
        let ids = [0usize, 1, 2, 12, 13, 14];
        let x_cond = x.select_rows(&ids);
        let y_cond = [0u32, 0, 0, 1, 1, 1];
        let pools = vec![vec![0u32, 1, 2, 3], vec![12u32, 13, 14, 15]];
        let anchors = find_anchors(&x_cond, &y_cond, &x, &pools, 2).unwrap();

        let delta = 0.6;
        let cond_graph = translate(&x_cond, &anchors, &x, &predictor, delta).unwrap();
        cond_graph.validate().unwrap();
        assert_eq!(cond_graph.num_nodes(), 6);
        for (_, _, w) in cond_graph.edges() {
            assert!(w >= delta && w < 1.0, "weight {w} outside [{delta}, 1)");
        }

        // A stricter threshold keeps a subset of the edges.
        let strict = translate(&x_cond, &anchors, &x, &predictor, 0.95).unwrap();
        assert!(strict.num_edges() <= cond_graph.num_edges());
        for (u, v, _) in strict.edges() {
            assert!(cond_graph.has_edge(u, v));
        }
    }

    #[test]
    fn translate_rejects_mismatched_predictor() {
        let predictor = LinkPredictor {
            mlp: init_mlp(&[8, 4, 1], 0), // rep width 4
            aggregator: Aggregator::Max,
            neighbor_aware: false,
        };
        let x_cond = Matrix::from_rows(&[vec![0.0; 3], vec![1.0; 3]]);
        let x_real = Matrix::from_rows(&[vec![0.0; 3]]);
        let anchors = find_anchors(&x_cond, &[0, 0], &x_real, &[vec![0u32]], 1).unwrap();
        assert!(translate(&x_cond, &anchors, &x_real, &predictor, 0.9).is_err());
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut cfg = TranslateConfig::default();
        cfg.delta = 1.0;
        assert!(cfg.validate().is_err());
        cfg = TranslateConfig::default();
        cfg.holdout_frac = 0.0;
        assert!(cfg.validate().is_err());
        cfg = TranslateConfig::default();
        cfg.negative_ratio = 0;
        assert!(cfg.validate().is_err());
        cfg = TranslateConfig::default();
        cfg.dropout = -0.1;
        assert!(cfg.validate().is_err());
    }

    /// One pretrained predictor translates any number of condensed sets —
    /// no retraining, no hidden state. Repeated calls are identical and the
    /// input sizes are free to differ.
    #[test]
    fn one_predictor_translates_many_condensed_sets() {
        let (g, x) = clustered_link_instance(16);
        let h = aggregate_neighbors(&g, &x, Aggregator::Max);
        let reps = build_convolved(&x, &h);
        let (predictor, _) = pretrain_link_predictor(&g, &reps, &quick_lp_config(8)).unwrap();

        let pools = vec![(0u32..12).collect::<Vec<_>>(), (12u32..24).collect()];
        let sets: [(&[usize], &[u32]); 2] = [
            (&[0, 13], &[0, 1]),
            (&[0, 1, 2, 12, 13, 14, 15, 16], &[0, 0, 0, 1, 1, 1, 1, 1]),
        ];
        for (ids, y_cond) in sets {
            let x_cond = x.select_rows(ids);
            let anchors = find_anchors(&x_cond, y_cond, &x, &pools, 2).unwrap();
            let once = translate(&x_cond, &anchors, &x, &predictor, 0.6).unwrap();
            let twice = translate(&x_cond, &anchors, &x, &predictor, 0.6).unwrap();
            assert_eq!(once, twice, "translation must be a pure function");
            assert_eq!(once.num_nodes(), ids.len());
        }
    }

    /// Moving one condensed node's features by ‖Δ‖ = ε moves every score
    /// that node participates in by at most L·ε/4 and no other score at
    /// all. The chain: the pseudo-neighbor half of a representation reads
    /// only fixed real rows, so the stacked pair input shifts by exactly
    /// ‖Δ‖; the ReLU scoring network is ∏‖W_l‖₂-Lipschitz; symmetrization
    /// averages two equally bounded logits; the logistic squash contributes
    /// the final 1/4.
    #[test]
    fn score_perturbation_bounded_by_network_lipschitz_constant() {
        /// Largest singular value by power iteration on WᵀW (converges from
        /// below; 200 rounds on these small matrices reach machine
        /// precision).
        fn spectral_norm(w: &Matrix) -> f64 {
            let (r, c) = w.shape();
            let mut v = vec![1.0f64; c];
            let mut sigma = 0.0;
            for _ in 0..200 {
                let mut u = vec![0.0; r];
                for (i, ui) in u.iter_mut().enumerate() {
                    *ui = w.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
                }
                sigma = u.iter().map(|x| x * x).sum::<f64>().sqrt();
                if sigma == 0.0 {
                    return 0.0;
                }
                let mut next = vec![0.0; c];
                for (i, &ui) in u.iter().enumerate() {
                    for (j, nj) in next.iter_mut().enumerate() {
                        *nj += w.row(i)[j] * ui;
                    }
                }
                let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
                for (vj, nj) in v.iter_mut().zip(&next) {
                    *vj = nj / norm;
                }
            }
            sigma
        }

        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let d = 5usize;
        let n_cond = 4usize;
        let real_rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let x_real = Matrix::from_rows(&real_rows);
        let anchors = AnchorSet::new(
            (0..n_cond as u32).map(|i| vec![2 * i, 2 * i + 1]).collect(),
        )
        .unwrap();
        let cond_rows: Vec<Vec<f64>> = (0..n_cond)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let x_cond = Matrix::from_rows(&cond_rows);
        let predictor = LinkPredictor {
            mlp: init_mlp(&[4 * d, 16, 1], 9),
            aggregator: Aggregator::Max,
            neighbor_aware: true,
        };
        let lip: f64 = predictor.mlp.weights.iter().map(spectral_norm).product();
        assert!(lip.is_finite() && lip > 0.0);

        let pseudo = pseudo_neighbor_features(&anchors, &x_real, predictor.aggregator);
        let reps = build_convolved(&x_cond, &pseudo);
        let pairs: Vec<(u32, u32)> = (0..n_cond as u32)
            .flat_map(|i| (i + 1..n_cond as u32).map(move |j| (i, j)))
            .collect();
        let base = score_pairs(&predictor, &reps, &pairs);

        for _ in 0..8 {
            for eps in [1e-3, 0.05, 0.5] {
                let mut delta: Vec<f64> =
                    (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm: f64 = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
                for v in &mut delta {
                    *v *= eps / norm;
                }
                let mut x2 = x_cond.clone();
                for (slot, dv) in x2.row_mut(0).iter_mut().zip(&delta) {
                    *slot += dv;
                }
                let reps2 = build_convolved(&x2, &pseudo);
                let moved = score_pairs(&predictor, &reps2, &pairs);
                for ((&(i, j), &a), &b) in pairs.iter().zip(&base).zip(&moved) {
                    if i == 0 || j == 0 {
                        let bound = lip * eps / 4.0 + 1e-12;
                        assert!(
                            (a - b).abs() <= bound,
                            "pair ({i},{j}): |Δscore| {} > {bound}",
                            (a - b).abs()
                        );
                    } else {
                        assert_eq!(a, b, "untouched pair ({i},{j}) moved");
                    }
                }
            }
        }
    }
}
