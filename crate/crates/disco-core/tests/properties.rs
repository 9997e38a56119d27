//! Randomized invariants over the public API.
//!
//! Each property pins a contract the rest of the pipeline leans on: exact
//! persistence round-trips, the spectral bound of normalized propagation,
//! subgraph induction versus a brute-force edge filter, metric invariances,
//! budget arithmetic, selector well-formedness, and the symmetry and
//! smoothness guarantees of pair scoring.

use std::collections::BTreeMap;

use proptest::prelude::*;

use disco_core::coreset::{
    allocate_budget, group_by_class, herding_select, kcenter_select, random_select,
};
use disco_core::data::{load_edges, load_features_bin, save_edges, save_features_bin};
use disco_core::evaluate::homophily;
use disco_core::graph::{induced_subgraph, normalize_adjacency};
use disco_core::neural::{init_mlp, sigmoid, softmax};
use disco_core::translate::{score_pairs, Aggregator, LinkPredictor};
use disco_core::{LabelVector, Matrix, SparseGraph};

/// Random undirected graph: up to `max_n` nodes, quantized positive weights
/// (exactly representable in f32 so exactness assertions are meaningful).
fn arb_graph(max_n: u32) -> impl Strategy<Value = SparseGraph> {
    (2..=max_n).prop_flat_map(|n| {
        let endpoint = (0..n, 0..n).prop_filter_map("self loop", |(a, b)| {
            (a != b).then(|| if a < b { (a, b) } else { (b, a) })
        });
        let weight = (1u32..=16).prop_map(|q| q as f64 / 16.0);
        proptest::collection::btree_map(endpoint, weight, 0..64usize).prop_map(
            move |edges: BTreeMap<(u32, u32), f64>| {
                let list: Vec<(u32, u32, f64)> =
                    edges.into_iter().map(|((u, v), w)| (u, v, w)).collect();
                SparseGraph::from_edges(n as usize, &list).expect("canonical edge list")
            },
        )
    })
}

/// Random label vector over `n` nodes with every class in `0..c` present.
fn arb_labels(n: usize, c: usize) -> impl Strategy<Value = LabelVector> {
    proptest::collection::vec(0..c as u32, n).prop_map(move |mut l| {
        for (i, slot) in l.iter_mut().take(c).enumerate() {
            *slot = i as u32; // guarantee every class occupied
        }
        LabelVector::new(l, c).unwrap()
    })
}

proptest! {
    /// Text round-trip of the edge format is exact.
    #[test]
    fn graph_edges_roundtrip_exactly(g in arb_graph(40)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.edges");
        save_edges(&path, &g).unwrap();
        let back = load_edges(&path, g.num_nodes()).unwrap();
        prop_assert_eq!(back, g);
    }

    /// Binary round-trip of the feature format is exact for f32 values.
    #[test]
    fn features_bin_roundtrip_exactly(
        rows in 1usize..12,
        cols in 1usize..9,
        fill in proptest::collection::vec(-512i32..=512, 12 * 8),
    ) {
        let mut x = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                // Quarter-integers are exactly representable in f32.
                x.row_mut(i)[j] = fill[i * cols + j] as f64 / 4.0;
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.bin");
        save_features_bin(&path, &x).unwrap();
        let back = load_features_bin(&path).unwrap();
        prop_assert_eq!(back, x);
    }

    /// The symmetric normalized operator D̃^{-1/2}(A+I)D̃^{-1/2} never
    /// expands: its spectral radius stays within 1 + 1e-9 (power iteration).
    #[test]
    fn normalized_adjacency_spectral_radius_at_most_one(g in arb_graph(50)) {
        let op = normalize_adjacency(&g);
        let n = g.num_nodes();
        let mut x = Matrix::zeros(n, 1);
        for i in 0..n {
            x.row_mut(i)[0] = 1.0 + (i % 7) as f64; // positive, non-uniform
        }
        let mut radius = 0.0;
        for _ in 0..150 {
            let y = op.apply(&x);
            let nx: f64 = (0..n).map(|i| x.row(i)[0].powi(2)).sum::<f64>().sqrt();
            let ny: f64 = (0..n).map(|i| y.row(i)[0].powi(2)).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 {
                break; // converged into the null space; radius estimate stands
            }
            radius = ny / nx;
            x = y;
            for i in 0..n {
                x.row_mut(i)[0] /= ny; // renormalize to avoid under/overflow
            }
        }
        prop_assert!(radius <= 1.0 + 1e-9, "spectral radius estimate {radius}");
    }

    /// Induction keeps exactly the edges whose endpoints are both selected —
    /// checked against a brute-force filter over all original edges.
    #[test]
    fn induced_subgraph_matches_bruteforce_filter(
        g in arb_graph(60),
        picks in proptest::collection::vec(any::<bool>(), 60),
    ) {
        let ids: Vec<u32> = (0..g.num_nodes() as u32)
            .filter(|&u| picks[u as usize])
            .collect();
        prop_assume!(!ids.is_empty());
        let (sub, remap) = induced_subgraph(&g, &ids).unwrap();

        let expect: Vec<(u32, u32, f64)> = g
            .edges()
            .filter(|(u, v, _)| picks[*u as usize] && picks[*v as usize])
            .collect();
        prop_assert_eq!(sub.num_edges(), expect.len());
        for (u, v, w) in expect {
            let su = ids.iter().position(|&x| x == u).unwrap() as u32;
            let sv = ids.iter().position(|&x| x == v).unwrap() as u32;
            prop_assert_eq!(sub.edge_weight(su, sv), Some(w));
            prop_assert_eq!(remap[su as usize], u);
            prop_assert_eq!(remap[sv as usize], v);
        }
    }

    /// Homophily only depends on weight *ratios*: scaling every edge weight
    /// uniformly leaves it unchanged.
    #[test]
    fn homophily_is_scale_invariant(g in arb_graph(40), c in 0..4usize) {
        prop_assume!(g.num_edges() > 0);
        let labels = LabelVector::new(
            (0..g.num_nodes() as u32).map(|i| i % 3).collect(),
            3,
        )
        .unwrap();
        let scale = [0.25, 0.5, 2.0, 16.0][c];
        let scaled_edges: Vec<(u32, u32, f64)> =
            g.edges().map(|(u, v, w)| (u, v, w * scale)).collect();
        let scaled = SparseGraph::from_edges(g.num_nodes(), &scaled_edges).unwrap();
        let a = homophily(&g, &labels).unwrap();
        let b = homophily(&scaled, &labels).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{a} vs {b} at scale {scale}");
    }

    /// Budget allocation: totals clamp to [classes, n], every class gets at
    /// least one slot, and — whenever those constraints are satisfiable at
    /// all — no class falls below its proportional share - 1.
    #[test]
    fn budget_allocation_sums_and_dominates_shares(
        labels in arb_labels(24, 4),
        r_q in 1u32..=100,
    ) {
        let r = r_q as f64 / 100.0;
        let y = labels.as_slice();
        let budget = allocate_budget(y, 4, r).unwrap();
        let n = y.len();
        let expect_total = ((r * n as f64).round() as usize).max(4).min(n);
        prop_assert_eq!(budget.total(), expect_total);

        let counts = labels.class_counts();
        let share = |c: usize| expect_total as f64 * counts[c] as f64 / n as f64;
        // One huge class plus several singletons can make "≥ 1 per class"
        // and "≥ share - 1" jointly unsatisfiable; dominance is only owed
        // when a valid allocation exists.
        let floor_sum: usize = (0..4)
            .map(|c| (share(c) - 1.0 - 1e-9).ceil().max(1.0) as usize)
            .sum();
        let feasible = floor_sum <= expect_total;

        for c in 0..4 {
            prop_assert!(budget.class(c) >= 1);
            prop_assert!(budget.class(c) <= counts[c]);
            if feasible {
                prop_assert!(
                    budget.class(c) as f64 >= share(c) - 1.0 - 1e-9,
                    "class {c}: {} below share {} - 1",
                    budget.class(c),
                    share(c)
                );
            }
        }
    }

    /// Every selector returns distinct, in-pool ids matching the per-class
    /// budget exactly.
    #[test]
    fn selectors_return_wellformed_ids(
        labels in arb_labels(30, 3),
        r_q in 10u32..=100,
        seed in any::<u64>(),
    ) {
        let r = r_q as f64 / 100.0;
        let ids_all: Vec<u32> = (0..30).collect();
        let pools = group_by_class(&ids_all, &labels);
        let budget = allocate_budget(labels.as_slice(), 3, r).unwrap();
        let mut x = Matrix::zeros(30, 2);
        for i in 0..30 {
            x.row_mut(i)[0] = (i as f64 * 0.7).sin();
            x.row_mut(i)[1] = labels.get(i) as f64;
        }
        for ids in [
            random_select(&pools, &budget, seed).unwrap(),
            herding_select(&x, &pools, &budget).unwrap(),
            kcenter_select(&x, &pools, &budget, seed).unwrap(),
        ] {
            prop_assert_eq!(ids.len(), budget.total());
            let mut sorted = ids.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), ids.len(), "duplicate ids");
            for c in 0..3 {
                let picked = ids
                    .iter()
                    .filter(|&&i| labels.get(i as usize) == c as u32)
                    .count();
                prop_assert_eq!(picked, budget.class(c));
                for &i in &ids {
                    prop_assert!(i < 30);
                }
            }
        }
    }

    /// Pair scores are exactly symmetric in the pair order.
    #[test]
    fn pair_scores_are_bit_exact_symmetric(
        seed in any::<u64>(),
        n in 2usize..8,
        d in 1usize..6,
    ) {
        let predictor = LinkPredictor {
            mlp: init_mlp(&[2 * d, 8, 1], seed),
            aggregator: Aggregator::Max,
            neighbor_aware: false,
        };
        let mut reps = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                reps.row_mut(i)[j] = ((i * 31 + j * 17) as f64 * 0.37).sin();
            }
        }
        let mut pairs = Vec::new();
        let mut flipped = Vec::new();
        for i in 0..n as u32 {
            for j in 0..n as u32 {
                if i != j {
                    pairs.push((i, j));
                    flipped.push((j, i));
                }
            }
        }
        let a = score_pairs(&predictor, &reps, &pairs);
        let b = score_pairs(&predictor, &reps, &flipped);
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!(x, y, "score(i,j) != score(j,i) bitwise");
            prop_assert!(*x > 0.0 && *x < 1.0);
        }
    }

    /// The logistic function is 1/4-Lipschitz everywhere.
    #[test]
    fn sigmoid_is_quarter_lipschitz(x in -40.0f64..40.0, y in -40.0f64..40.0) {
        let lhs = (sigmoid(x) - sigmoid(y)).abs();
        prop_assert!(lhs <= (x - y).abs() / 4.0 + 1e-12, "|Δσ|={lhs}");
    }

    /// Softmax rows are probability vectors even for extreme logits.
    #[test]
    fn softmax_rows_sum_to_one(
        vals in proptest::collection::vec(-600.0f64..600.0, 3 * 4),
    ) {
        let logits = Matrix::from_rows(&[
            vals[0..4].to_vec(),
            vals[4..8].to_vec(),
            vals[8..12].to_vec(),
        ]);
        let p = softmax(&logits);
        for i in 0..3 {
            let s: f64 = p.row(i).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-6, "row {i} sums to {s}");
            prop_assert!(p.row(i).iter().all(|&v| v >= 0.0));
        }
    }
}
