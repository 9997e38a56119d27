//! Dataset types and on-disk formats.
//!
//! A dataset directory holds four files:
//!
//! - `graph.edges` — text; one undirected edge per line as `u v` or `u v w`
//!   (weight defaults to 1). `#` starts a comment; blank lines are ignored.
//! - `features.bin` — binary; magic `DCFM`, then row count and column count
//!   as little-endian u32, then row-major little-endian f32 values. If it is
//!   absent, `features.csv` (one comma-separated row per line) is read
//!   instead.
//! - `labels.txt` — one class id per node per line.
//! - `split.txt` — one of `train` / `val` / `test` / `none` per node per line.
//!
//! Condensed graph directories reuse the same layout plus a `meta.txt`
//! sidecar (`key=value` lines: `reduction_rate`, `delta`, `seed`,
//! `source_nodes`). The condensation stage also emits `anchors.txt` (per
//! line: a condensed node id, then the real node ids anchoring it) so the
//! edge-translation stage can run from disk. All arithmetic in this crate is
//! f64; `features.bin` stores f32, and the conversion happens here at the
//! boundary.

pub mod synth;

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::condense::AnchorSet;
use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::matrix::Matrix;

/// Node class labels, values in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVector {
    labels: Vec<u32>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<u32>, num_classes: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Invalid("num_classes must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::Invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(LabelVector {
            labels,
            num_classes,
        })
    }

    /// Infer the class count as `max label + 1`.
    pub fn from_labels(labels: Vec<u32>) -> Result<Self> {
        let c = labels.iter().max().map_or(0, |&m| m as usize + 1).max(1);
        LabelVector::new(labels, c)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize) -> u32 {
        self.labels[i]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.labels
    }

    /// How many nodes carry each class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Role of a node in the transductive protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Val,
    Test,
    None,
}

impl Role {
    fn parse(s: &str) -> Option<Role> {
        match s {
            "train" => Some(Role::Train),
            "val" => Some(Role::Val),
            "test" => Some(Role::Test),
            "none" => Some(Role::None),
            _ => None,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Val => "val",
            Role::Test => "test",
            Role::None => "none",
        }
    }
}

/// Per-node train/val/test assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    roles: Vec<Role>,
}

impl DataSplit {
    pub fn new(roles: Vec<Role>) -> Self {
        DataSplit { roles }
    }

    /// All nodes marked `train` (for condensed graphs).
    pub fn all_train(n: usize) -> Self {
        DataSplit {
            roles: vec![Role::Train; n],
        }
    }

    pub fn len(&self) -> usize {
        self.roles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roles.is_empty()
    }

    pub fn role(&self, i: usize) -> Role {
        self.roles[i]
    }

    pub fn indices(&self, role: Role) -> Vec<u32> {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, &r)| r == role)
            .map(|(i, _)| i as u32)
            .collect()
    }

    pub fn train_indices(&self) -> Vec<u32> {
        self.indices(Role::Train)
    }

    pub fn val_indices(&self) -> Vec<u32> {
        self.indices(Role::Val)
    }

    pub fn test_indices(&self) -> Vec<u32> {
        self.indices(Role::Test)
    }
}

/// A full attributed dataset: graph, node features, labels, split.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: SparseGraph,
    pub features: Matrix,
    pub labels: LabelVector,
    pub split: DataSplit,
}

impl Dataset {
    /// Check the cross-component invariants: matching lengths and every class
    /// present among the training nodes.
    pub fn validate(&self) -> Result<()> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n || self.labels.len() != n || self.split.len() != n {
            return Err(Error::Invalid(format!(
                "component sizes disagree: graph {n}, features {}, labels {}, split {}",
                self.features.rows(),
                self.labels.len(),
                self.split.len()
            )));
        }
        let mut seen = vec![false; self.labels.num_classes()];
        for &i in &self.split.train_indices() {
            seen[self.labels.get(i as usize) as usize] = true;
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::Invalid(format!(
                "class {missing} has no training nodes"
            )));
        }
        Ok(())
    }
}

/// A condensed graph: synthetic nodes with features, labels, and a weighted
/// topology produced by edge translation.
#[derive(Debug, Clone)]
pub struct CondensedGraph {
    pub graph: SparseGraph,
    pub features: Matrix,
    pub labels: LabelVector,
}

/// Provenance sidecar written next to a condensed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedMeta {
    pub reduction_rate: f64,
    pub delta: f64,
    pub seed: u64,
    pub source_nodes: usize,
}

// ---------------------------------------------------------------------------
// Text-file plumbing
// ---------------------------------------------------------------------------

/// Content lines of a text file with 1-based line numbers; blank lines and
/// `#` comments removed, inline comments stripped.
fn content_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let line = line.trim();
        if !line.is_empty() {
            out.push((i + 1, line.to_string()));
        }
    }
    Ok(out)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Individual formats
// ---------------------------------------------------------------------------

/// Read `graph.edges`. `num_nodes` comes from the feature matrix, which is
/// the authority on node count (isolated trailing nodes would otherwise be
/// unrepresentable).
pub fn load_edges(path: &Path, num_nodes: usize) -> Result<SparseGraph> {
    let mut edges = Vec::new();
    for (line_no, line) in content_lines(path)? {
        let mut it = line.split_whitespace();
        let u = it.next();
        let v = it.next();
        let w = it.next();
        if it.next().is_some() {
            return Err(Error::format(path, line_no, "expected 'u v' or 'u v w'"));
        }
        let (u, v) = match (u, v) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(Error::format(path, line_no, "expected 'u v' or 'u v w'")),
        };
        let u: u32 = u
            .parse()
            .map_err(|_| Error::format(path, line_no, format!("bad node id '{u}'")))?;
        let v: u32 = v
            .parse()
            .map_err(|_| Error::format(path, line_no, format!("bad node id '{v}'")))?;
        let w: f64 = match w {
            Some(w) => w
                .parse()
                .map_err(|_| Error::format(path, line_no, format!("bad weight '{w}'")))?,
            None => 1.0,
        };
        edges.push((u, v, w));
    }
    let g = SparseGraph::from_edges(num_nodes, &edges).map_err(|e| match e {
        Error::Invalid(msg) => Error::format(path, 0, msg),
        other => other,
    })?;
    Ok(g)
}

pub fn save_edges(path: &Path, g: &SparseGraph) -> Result<()> {
    let mut out = String::new();
    for (u, v, w) in g.edges() {
        // f64 Display prints the shortest string that parses back exactly,
        // so weights round-trip bit-for-bit through the text format.
        writeln!(out, "{u} {v} {w}").unwrap();
    }
    write_file(path, out.as_bytes())
}

const FEATURES_MAGIC: &[u8; 4] = b"DCFM";

/// Read `features.bin` (f32 storage widened to f64).
pub fn load_features_bin(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != FEATURES_MAGIC {
        return Err(Error::format(path, 0, "not a feature matrix file (bad magic)"));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expect = 12 + rows * cols * 4;
    if bytes.len() != expect {
        return Err(Error::format(
            path,
            0,
            format!("expected {expect} bytes for {rows}x{cols}, found {}", bytes.len()),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for ch in bytes[12..].chunks_exact(4) {
        let v = f32::from_le_bytes(ch.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(path, 0, "non-finite feature value"));
        }
        data.push(v as f64);
    }
    Matrix::from_vec(rows, cols, data)
}

/// Write `features.bin`, narrowing to f32 (round-to-nearest).
pub fn save_features_bin(path: &Path, x: &Matrix) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Numeric("feature matrix has non-finite values".into()));
    }
    let mut bytes = Vec::with_capacity(12 + x.as_slice().len() * 4);
    bytes.extend_from_slice(FEATURES_MAGIC);
    bytes.extend_from_slice(&(x.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(x.cols() as u32).to_le_bytes());
    for &v in x.as_slice() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_file(path, &bytes)
}

/// Read `features.csv`: one comma-separated row per line.
pub fn load_features_csv(path: &Path) -> Result<Matrix> {
    let lines = content_lines(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(lines.len());
    let mut cols = None;
    for (line_no, line) in lines {
        let row: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::format(path, line_no, "bad feature value"))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, line_no, "non-finite feature value"));
        }
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::format(
                    path,
                    line_no,
                    format!("row has {} values, expected {c}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn load_labels(path: &Path) -> Result<Vec<u32>> {
    let mut labels = Vec::new();
    for (line_no, line) in content_lines(path)? {
        let l: u32 = line
            .parse()
            .map_err(|_| Error::format(path, line_no, format!("bad label '{line}'")))?;
        labels.push(l);
    }
    Ok(labels)
}

pub fn save_labels(path: &Path, labels: &LabelVector) -> Result<()> {
    let mut out = String::new();
    for &l in labels.as_slice() {
        writeln!(out, "{l}").unwrap();
    }
    write_file(path, out.as_bytes())
}

pub fn load_split(path: &Path) -> Result<DataSplit> {
    let mut roles = Vec::new();
    for (line_no, line) in content_lines(path)? {
        let role = Role::parse(&line).ok_or_else(|| {
            Error::format(
                path,
                line_no,
                format!("bad role '{line}' (expected train/val/test/none)"),
            )
        })?;
        roles.push(role);
    }
    Ok(DataSplit::new(roles))
}

pub fn save_split(path: &Path, split: &DataSplit) -> Result<()> {
    let mut out = String::new();
    for i in 0..split.len() {
        writeln!(out, "{}", split.role(i).as_str()).unwrap();
    }
    write_file(path, out.as_bytes())
}

/// Write `anchors.txt`: one line per condensed node — its id, then the real
/// training node ids anchoring it.
pub fn save_anchors(path: &Path, anchors: &AnchorSet) -> Result<()> {
    let mut out = String::new();
    for (i, ids) in anchors.iter().enumerate() {
        write!(out, "{i}").unwrap();
        for &id in ids {
            write!(out, " {id}").unwrap();
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Read `anchors.txt`. Lines must be sorted by node id, covering `0..n`
/// exactly once, each followed by at least one anchor id.
pub fn load_anchors(path: &Path) -> Result<AnchorSet> {
    let mut rows: Vec<Vec<u32>> = Vec::new();
    for (line_no, line) in content_lines(path)? {
        let mut it = line.split_whitespace().map(|tok| {
            tok.parse::<u32>()
                .map_err(|_| Error::format(path, line_no, format!("bad id '{tok}'")))
        });
        let node = it.next().transpose()?.ok_or_else(|| {
            Error::format(path, line_no, "expected 'node anchor [anchor ...]'")
        })?;
        if node as usize != rows.len() {
            return Err(Error::format(
                path,
                line_no,
                format!("expected node {} here, found {node}", rows.len()),
            ));
        }
        let ids = it.collect::<Result<Vec<u32>>>()?;
        if ids.is_empty() {
            return Err(Error::format(path, line_no, "node has no anchors"));
        }
        rows.push(ids);
    }
    AnchorSet::new(rows)
}

fn load_meta(path: &Path) -> Result<CondensedMeta> {
    let mut reduction_rate = None;
    let mut delta = None;
    let mut seed = None;
    let mut source_nodes = None;
    for (line_no, line) in content_lines(path)? {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, line_no, "expected key=value"))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| Error::format(path, line_no, format!("bad {what} '{value}'"));
        match key {
            "reduction_rate" => {
                reduction_rate = Some(value.parse::<f64>().map_err(|_| bad("reduction_rate"))?)
            }
            "delta" => delta = Some(value.parse::<f64>().map_err(|_| bad("delta"))?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed"))?),
            "source_nodes" => {
                source_nodes = Some(value.parse::<usize>().map_err(|_| bad("source_nodes"))?)
            }
            other => {
                return Err(Error::format(path, line_no, format!("unknown key '{other}'")))
            }
        }
    }
    let missing = |what: &str| Error::format(path, 0, format!("missing key '{what}'"));
    Ok(CondensedMeta {
        reduction_rate: reduction_rate.ok_or_else(|| missing("reduction_rate"))?,
        delta: delta.ok_or_else(|| missing("delta"))?,
        seed: seed.ok_or_else(|| missing("seed"))?,
        source_nodes: source_nodes.ok_or_else(|| missing("source_nodes"))?,
    })
}

fn save_meta(path: &Path, meta: &CondensedMeta) -> Result<()> {
    let out = format!(
        "reduction_rate={}\ndelta={}\nseed={}\nsource_nodes={}\n",
        meta.reduction_rate, meta.delta, meta.seed, meta.source_nodes
    );
    write_file(path, out.as_bytes())
}

// ---------------------------------------------------------------------------
// Directory-level load/save
// ---------------------------------------------------------------------------

fn load_parts(dir: &Path) -> Result<(SparseGraph, Matrix, LabelVector, DataSplit)> {
    let bin = dir.join("features.bin");
    let features = if bin.exists() {
        load_features_bin(&bin)?
    } else {
        load_features_csv(&dir.join("features.csv"))?
    };
    let n = features.rows();

    let graph = load_edges(&dir.join("graph.edges"), n)?;

    let labels_path = dir.join("labels.txt");
    let raw_labels = load_labels(&labels_path)?;
    if raw_labels.len() != n {
        return Err(Error::format(
            &labels_path,
            0,
            format!("{} labels for {n} nodes", raw_labels.len()),
        ));
    }
    let labels = LabelVector::from_labels(raw_labels)?;

    let split_path = dir.join("split.txt");
    let split = load_split(&split_path)?;
    if split.len() != n {
        return Err(Error::format(
            &split_path,
            0,
            format!("{} roles for {n} nodes", split.len()),
        ));
    }
    Ok((graph, features, labels, split))
}

/// Load a dataset directory and validate its cross-component invariants.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let (graph, features, labels, split) = load_parts(dir)?;
    let ds = Dataset {
        graph,
        features,
        labels,
        split,
    };
    ds.validate()?;
    Ok(ds)
}

/// Write a full dataset directory (used by the generator and by `prepare`).
pub fn save_dataset(dir: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_edges(&dir.join("graph.edges"), &ds.graph)?;
    save_features_bin(&dir.join("features.bin"), &ds.features)?;
    save_labels(&dir.join("labels.txt"), &ds.labels)?;
    save_split(&dir.join("split.txt"), &ds.split)?;
    Ok(())
}

/// Write a condensed graph directory: the dataset files (split all-`train`)
/// plus the `meta.txt` provenance sidecar.
pub fn save_condensed(
    dir: impl AsRef<Path>,
    cond: &CondensedGraph,
    meta: &CondensedMeta,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_edges(&dir.join("graph.edges"), &cond.graph)?;
    save_features_bin(&dir.join("features.bin"), &cond.features)?;
    save_labels(&dir.join("labels.txt"), &cond.labels)?;
    save_split(&dir.join("split.txt"), &DataSplit::all_train(cond.labels.len()))?;
    save_meta(&dir.join("meta.txt"), meta)?;
    Ok(())
}

/// Load a condensed graph directory. Validates that every edge weight lies in
/// `[delta, 1]` for the `delta` recorded in `meta.txt`.
pub fn load_condensed(dir: impl AsRef<Path>) -> Result<(CondensedGraph, CondensedMeta)> {
    let dir = dir.as_ref();
    let (graph, features, labels, _split) = load_parts(dir)?;
    let meta = load_meta(&dir.join("meta.txt"))?;
    for (u, v, w) in graph.edges() {
        if w < meta.delta || w > 1.0 {
            return Err(Error::Invalid(format!(
                "condensed edge ({u}, {v}) weight {w} outside [{}, 1]",
                meta.delta
            )));
        }
    }
    Ok((
        CondensedGraph {
            graph,
            features,
            labels,
        },
        meta,
    ))
}

/// Normalize each feature row to sum to 1. Rows that sum to zero are kept
/// unchanged (all-zero bag-of-words rows stay zero).
pub fn row_normalize_features(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let sum: f64 = row.iter().sum();
        if sum != 0.0 {
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
