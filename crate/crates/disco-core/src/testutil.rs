//! Small synthetic fixtures shared by unit tests across modules.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DataSplit, Dataset, LabelVector, Role};
use crate::graph::SparseGraph;
use crate::matrix::Matrix;

/// A small homophilous blob dataset: `classes` Gaussian-ish feature blobs,
/// a ring inside each class plus sparse cross-class edges, and a
/// per-class train/val/test split. Node ids are class-major.
pub fn blob_dataset(per_class: usize, classes: usize, dim: usize, seed: u64) -> Dataset {
    assert!(dim >= classes);
    assert!(per_class >= 4);
    let n = per_class * classes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut roles = Vec::with_capacity(n);
    for c in 0..classes {
        for k in 0..per_class {
            let mut row = vec![0.0f64; dim];
            for (j, item) in row.iter_mut().enumerate() {
                let center = if j == c { 3.0 } else { 0.0 };
                *item = center + rng.gen_range(-0.6..0.6);
            }
            rows.push(row);
            labels.push(c as u32);
            // ~30% train / 20% val / rest test, at least one of each.
            let role = if k * 10 < per_class * 3 {
                Role::Train
            } else if k * 10 < per_class * 5 {
                Role::Val
            } else {
                Role::Test
            };
            roles.push(role);
        }
    }

    let mut edges: Vec<(u32, u32, f64)> = Vec::new();
    for c in 0..classes {
        let base = (c * per_class) as u32;
        for k in 0..per_class as u32 {
            let u = base + k;
            let v = base + (k + 1) % per_class as u32;
            if u != v {
                edges.push((u.min(v), u.max(v), 1.0));
            }
            // occasional cross-class edge
            if rng.gen::<f64>() < 0.15 {
                let w = rng.gen_range(0..n as u32);
                if w != u && (w / per_class as u32) != c as u32 {
                    edges.push((u.min(w), u.max(w), 1.0));
                }
            }
        }
    }
    edges.sort_unstable_by(|a, b| (a.0, a.1).partial_cmp(&(b.0, b.1)).unwrap());
    edges.dedup_by(|a, b| a.0 == b.0 && a.1 == b.1);

    let ds = Dataset {
        graph: SparseGraph::from_edges(n, &edges).unwrap(),
        features: Matrix::from_rows(&rows),
        labels: LabelVector::new(labels, classes).unwrap(),
        split: DataSplit::new(roles),
    };
    ds.validate().unwrap();
    ds
}
