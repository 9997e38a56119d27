//! Coreset baselines: pick real training nodes per class under a budget.
//!
//! These are the comparison points for condensation — selection-based
//! reduction keeps real rows, condensation synthesizes new ones. Three
//! selectors share a class-proportional budget:
//!
//! - random: uniform without replacement;
//! - herding: Welling's kernel herding in feature space;
//! - k-center: greedy farthest-point traversal (the classic 2-approximation
//!   to the optimal covering radius).
//!
//! All selectors return node ids class-major (all class-0 picks, then
//! class-1, ...) with ids ascending within each class.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabelVector;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-class selection budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassBudget {
    counts: Vec<usize>,
}

impl ClassBudget {
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn class(&self, c: usize) -> usize {
        self.counts[c]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }
}

/// Split a total budget of `round(r * n_train)` nodes across classes
/// proportionally to class frequency, by largest remainder.
///
/// Guarantees: totals match exactly, every class gets at least one slot
/// (stealing from the most over-represented class if proportionality rounds
/// it to zero), and no class exceeds its available training nodes. Remainder
/// ties go to the lower class id. Whenever the constraints are satisfiable,
/// every class also keeps at least its exact proportional share minus one.
pub fn allocate_budget(train_labels: &[u32], num_classes: usize, r: f64) -> Result<ClassBudget> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::Invalid(format!(
            "reduction rate must be in (0, 1], got {r}"
        )));
    }
    if train_labels.is_empty() {
        return Err(Error::Invalid("no training labels".into()));
    }
    let mut class_n = vec![0usize; num_classes];
    for &l in train_labels {
        if l as usize >= num_classes {
            return Err(Error::Invalid(format!(
                "label {l} out of range for {num_classes} classes"
            )));
        }
        class_n[l as usize] += 1;
    }
    if let Some(empty) = class_n.iter().position(|&n| n == 0) {
        return Err(Error::Invalid(format!(
            "class {empty} has no training nodes"
        )));
    }

    let n_train = train_labels.len();
    let total = ((r * n_train as f64).round() as usize)
        .max(num_classes)
        .min(n_train);

    // Largest remainder on exact quotas.
    let mut counts = vec![0usize; num_classes];
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(num_classes);
    let mut assigned = 0usize;
    for c in 0..num_classes {
        let quota = total as f64 * class_n[c] as f64 / n_train as f64;
        counts[c] = quota.floor() as usize;
        assigned += counts[c];
        remainders.push((quota - quota.floor(), c));
    }
    // Sort by remainder descending, class id ascending on ties.
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut k = total - assigned;
    for &(_, c) in remainders.iter().cycle() {
        if k == 0 {
            break;
        }
        if counts[c] < class_n[c] {
            counts[c] += 1;
            k -= 1;
        }
    }

    // Every class must survive into the condensed graph. Steal from the
    // class with the largest surplus over its exact share so the repair
    // never drags a donor below share - 1 while another donor had slack.
    for c in 0..num_classes {
        if counts[c] == 0 {
            let surplus = |d: usize| {
                counts[d] as f64 - total as f64 * class_n[d] as f64 / n_train as f64
            };
            let donor = (0..num_classes)
                .filter(|&d| counts[d] > 1)
                .max_by(|&a, &b| {
                    surplus(a)
                        .partial_cmp(&surplus(b))
                        .unwrap()
                        .then(b.cmp(&a)) // ties to the lower class id
                })
                .ok_or_else(|| {
                    Error::Invalid("budget too small to cover every class".into())
                })?;
            counts[donor] -= 1;
            counts[c] = 1;
        }
    }
    for c in 0..num_classes {
        debug_assert!(counts[c] >= 1 && counts[c] <= class_n[c]);
    }
    Ok(ClassBudget { counts })
}

/// Group node ids by their class: `result[c]` holds the ids of `ids` whose
/// label is `c`, preserving input order.
pub fn group_by_class(ids: &[u32], labels: &LabelVector) -> Vec<Vec<u32>> {
    let mut groups = vec![Vec::new(); labels.num_classes()];
    for &i in ids {
        groups[labels.get(i as usize) as usize].push(i);
    }
    groups
}

fn check_pool(ids_by_class: &[Vec<u32>], budget: &ClassBudget) -> Result<()> {
    if ids_by_class.len() != budget.num_classes() {
        return Err(Error::Invalid(format!(
            "{} class pools for a {}-class budget",
            ids_by_class.len(),
            budget.num_classes()
        )));
    }
    for (c, pool) in ids_by_class.iter().enumerate() {
        if pool.len() < budget.class(c) {
            return Err(Error::Invalid(format!(
                "class {c} has {} candidates for a budget of {}",
                pool.len(),
                budget.class(c)
            )));
        }
    }
    Ok(())
}

/// Uniform selection without replacement within each class.
pub fn random_select(
    ids_by_class: &[Vec<u32>],
    budget: &ClassBudget,
    seed: u64,
) -> Result<Vec<u32>> {
    check_pool(ids_by_class, budget)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(budget.total());
    for (c, pool) in ids_by_class.iter().enumerate() {
        let mut pool: Vec<u32> = pool.clone();
        pool.shuffle(&mut rng);
        let mut picked: Vec<u32> = pool[..budget.class(c)].to_vec();
        picked.sort_unstable();
        out.extend(picked);
    }
    Ok(out)
}

/// Kernel herding per class: starting from the class mean μ, repeatedly pick
/// the unselected node maximizing ⟨w, x⟩ (ties to the lower id) and update
/// `w ← w + μ - x`. Greedily tracks the class mean with real rows.
pub fn herding_select(
    x: &Matrix,
    ids_by_class: &[Vec<u32>],
    budget: &ClassBudget,
) -> Result<Vec<u32>> {
    check_pool(ids_by_class, budget)?;
    let d = x.cols();
    let mut out = Vec::with_capacity(budget.total());
    for (c, pool) in ids_by_class.iter().enumerate() {
        let mut mu = vec![0.0f64; d];
        for &i in pool {
            for (m, &v) in mu.iter_mut().zip(x.row(i as usize)) {
                *m += v;
            }
        }
        for m in mu.iter_mut() {
            *m /= pool.len() as f64;
        }

        let mut w = mu.clone();
        let mut selected = vec![false; pool.len()];
        let mut picked = Vec::with_capacity(budget.class(c));
        for _ in 0..budget.class(c) {
            let mut best: Option<(f64, usize)> = None;
            for (k, &id) in pool.iter().enumerate() {
                if selected[k] {
                    continue;
                }
                let row = x.row(id as usize);
                let score: f64 = w.iter().zip(row).map(|(&a, &b)| a * b).sum();
                let better = match best {
                    None => true,
                    // Strict improvement only: on ties the earlier (lower id
                    // within the ascending pool) candidate wins.
                    Some((bs, _)) => score > bs,
                };
                if better {
                    best = Some((score, k));
                }
            }
            let (_, k) = best.expect("pool exhausted before budget");
            selected[k] = true;
            picked.push(pool[k]);
            let row = x.row(pool[k] as usize);
            for ((wv, &m), &xv) in w.iter_mut().zip(&mu).zip(row) {
                *wv += m - xv;
            }
        }
        picked.sort_unstable();
        out.extend(picked);
    }
    Ok(out)
}

/// Greedy k-center per class: seed with the node nearest the class mean,
/// then repeatedly add the node farthest from the current set (ties to the
/// lower id). The classic farthest-point traversal, whose covering radius is
/// at most twice the optimum.
///
/// The `seed` parameter exists for interface parity with the other
/// selectors; this variant is fully deterministic and does not use it.
pub fn kcenter_select(
    x: &Matrix,
    ids_by_class: &[Vec<u32>],
    budget: &ClassBudget,
    _seed: u64,
) -> Result<Vec<u32>> {
    check_pool(ids_by_class, budget)?;
    let d = x.cols();
    let mut out = Vec::with_capacity(budget.total());
    for (c, pool) in ids_by_class.iter().enumerate() {
        let mut mu = vec![0.0f64; d];
        for &i in pool {
            for (m, &v) in mu.iter_mut().zip(x.row(i as usize)) {
                *m += v;
            }
        }
        for m in mu.iter_mut() {
            *m /= pool.len() as f64;
        }

        // Seed: nearest to the class mean, ties to lower id (pool ascends).
        let mut first = 0usize;
        let mut best = f64::INFINITY;
        for (k, &id) in pool.iter().enumerate() {
            let row = x.row(id as usize);
            let dist: f64 = row
                .iter()
                .zip(&mu)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum();
            if dist < best {
                best = dist;
                first = k;
            }
        }

        let mut picked = vec![pool[first]];
        // min squared distance from each pool point to the selected set
        let mut min_d2: Vec<f64> = pool
            .iter()
            .map(|&id| x.row_dist2(id as usize, x, pool[first] as usize))
            .collect();
        while picked.len() < budget.class(c) {
            let mut far = 0usize;
            let mut far_d2 = f64::NEG_INFINITY;
            for (k, &d2) in min_d2.iter().enumerate() {
                if d2 > far_d2 {
                    far_d2 = d2;
                    far = k;
                }
            }
            picked.push(pool[far]);
            for (k, &id) in pool.iter().enumerate() {
                let d2 = x.row_dist2(id as usize, x, pool[far] as usize);
                if d2 < min_d2[k] {
                    min_d2[k] = d2;
                }
            }
        }
        picked.sort_unstable();
        out.extend(picked);
    }
    Ok(out)
}
