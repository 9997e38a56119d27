//! Pipeline stages over a run directory.
//!
//! Every stage reads and writes inside `--out`, then records a completion
//! marker holding content hashes of its configuration, inputs, and outputs.
//! A rerun whose marker still matches is skipped (`--force` overrides), so a
//! pipeline can resume after the expensive stages — classifier pretraining,
//! condensation, link-predictor pretraining — without repeating them, and
//! one pretrained predictor is reused across reduction rates.
//!
//! Directory layout:
//!
//! ```text
//! <out>/
//!   dataset/            prepared original dataset
//!   classifier.dcmp     frozen node classifier      + clf_metrics.txt
//!   condensed/          features/labels/anchors, then graph + meta
//!   condense_log.tsv    per-epoch loss terms
//!   predictor.dcmp      link predictor              + lp_metrics.txt
//!   report.txt          evaluation report           + eval_log.tsv
//!   baseline-<method>/  selected.txt + induced condensed dataset
//!   metrics.txt         structural metric block
//!   markers/            stage completion markers
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use disco_core::condense::{condense_with_classifier, pretrain_classifier, CondenseResult};
use disco_core::coreset::{
    allocate_budget, group_by_class, herding_select, kcenter_select, random_select,
};
use disco_core::data::{
    load_anchors, load_condensed, load_dataset, load_features_bin, load_labels, save_anchors,
    save_condensed, save_dataset, synth, CondensedMeta, DataSplit,
};
use disco_core::evaluate::{condensed_metrics, link_metrics, train_and_test, train_on_original};
use disco_core::graph::induced_subgraph;
use disco_core::neural::{load_mlp, save_mlp};
use disco_core::translate::{
    aggregate_neighbors, build_convolved, pretrain_link_predictor, translate, LinkPredictor,
};
use disco_core::{CondensedGraph, Dataset, Error, LabelVector, Result};

use crate::config::RunConfig;

/// Shared stage context: the resolved configuration plus the `--force` flag.
pub struct Ctx {
    pub cfg: RunConfig,
    pub force: bool,
}

impl Ctx {
    pub fn new(cfg: RunConfig, force: bool) -> Self {
        Ctx { cfg, force }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }
}

/// Tag an error with the stage that raised it.
pub fn in_stage<T>(stage: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Invalid(msg) => Error::Invalid(format!("stage {stage}: {msg}")),
        Error::Numeric(msg) => Error::Numeric(format!("stage {stage}: {msg}")),
        other => Error::Invalid(format!("stage {stage}: {other}")),
    })
}

// ---------------------------------------------------------------------------
// Completion markers
// ---------------------------------------------------------------------------

/// FNV-1a 64-bit content hash: tiny, stable, good enough to detect edits.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn hash_file(path: &Path) -> Result<u64> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    Ok(fnv1a64(&bytes))
}

/// Marker text for a finished stage: a hash of the stage-relevant config and
/// one line per tracked file. Any mismatch on rerun re-runs the stage.
fn marker_text(config_desc: &str, files: &[(String, u64)]) -> String {
    let mut out = format!("config={:#018x}\n", fnv1a64(config_desc.as_bytes()));
    for (rel, hash) in files {
        writeln!(out, "file={rel}:{hash:#018x}").unwrap();
    }
    out
}

struct StageGuard<'a> {
    ctx: &'a Ctx,
    stage: String,
    config_desc: String,
    /// Tracked files, run-dir-relative. Inputs are hashed up front; outputs
    /// after the stage body runs.
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl<'a> StageGuard<'a> {
    fn new(ctx: &'a Ctx, stage: impl Into<String>, config_desc: String) -> Self {
        StageGuard {
            ctx,
            stage: stage.into(),
            config_desc,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn marker_path(&self) -> PathBuf {
        self.ctx.path(&format!("markers/{}.done", self.stage))
    }

    fn tracked(&self) -> Result<Vec<(String, u64)>> {
        let mut files = Vec::new();
        for rel in self.inputs.iter().chain(&self.outputs) {
            files.push((rel.clone(), hash_file(&self.ctx.path(rel))?));
        }
        Ok(files)
    }

    /// True when the recorded marker matches the current config hash and
    /// every tracked file is unchanged on disk.
    fn up_to_date(&self) -> bool {
        if self.ctx.force {
            return false;
        }
        let Ok(recorded) = fs::read_to_string(self.marker_path()) else {
            return false;
        };
        match self.tracked() {
            Ok(files) => recorded == marker_text(&self.config_desc, &files),
            Err(_) => false, // a tracked file is missing: rerun
        }
    }

    fn write_marker(&self) -> Result<()> {
        let dir = self.ctx.path("markers");
        fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir,
            source: e,
        })?;
        let text = marker_text(&self.config_desc, &self.tracked()?);
        fs::write(self.marker_path(), text).map_err(|e| Error::Io {
            path: self.marker_path(),
            source: e,
        })
    }
}

/// Run one stage body under its guard: skip when up to date, otherwise run
/// and record the marker. The body only runs after every input exists.
fn run_stage<F>(guard: &mut StageGuard, body: F) -> Result<bool>
where
    F: FnOnce() -> Result<()>,
{
    if guard.up_to_date() {
        println!("stage {}: up to date, skipping (--force to re-run)", guard.stage);
        return Ok(false);
    }
    for rel in &guard.inputs {
        let p = guard.ctx.path(rel);
        if !p.exists() {
            return Err(Error::Invalid(format!(
                "stage {}: missing input {}",
                guard.stage,
                p.display()
            )));
        }
    }
    in_stage(&guard.stage, body())?;
    in_stage(&guard.stage, guard.write_marker())?;
    Ok(true)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

const DATASET_FILES: [&str; 4] = [
    "dataset/graph.edges",
    "dataset/features.bin",
    "dataset/labels.txt",
    "dataset/split.txt",
];

fn load_prepared(ctx: &Ctx) -> Result<Dataset> {
    let dir = ctx.path("dataset");
    if !dir.join("features.bin").exists() {
        return Err(Error::Invalid(format!(
            "no prepared dataset at {} (run prepare first)",
            dir.display()
        )));
    }
    load_dataset(&dir)
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

/// Stage a dataset into `<out>/dataset`: either validate and copy an
/// existing directory or generate the named synthetic preset, optionally
/// row-normalizing features.
pub fn prepare(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let desc = format!(
        "dataset={:?} synth={} synth_seed={} row_normalize={}",
        cfg.dataset, cfg.synth, cfg.synth_seed, cfg.row_normalize
    );
    let mut guard = StageGuard::new(ctx, "prepare", desc);
    guard.outputs = DATASET_FILES.iter().map(|s| s.to_string()).collect();
    run_stage(&mut guard, || {
        let mut ds = match &cfg.dataset {
            Some(src) => load_dataset(src)?,
            None => {
                let synth_cfg = match cfg.synth.as_str() {
                    "small" => synth::SynthConfig::small(cfg.synth_seed),
                    _ => synth::SynthConfig::citation_benchmark(cfg.synth_seed),
                };
                synth::generate(&synth_cfg)?
            }
        };
        if cfg.row_normalize {
            ds.features = disco_core::data::row_normalize_features(&ds.features);
        }
        save_dataset(ctx.path("dataset"), &ds)?;
        println!(
            "stage prepare: dataset ready ({} nodes, {} edges, {} classes)",
            ds.graph.num_nodes(),
            ds.graph.num_edges(),
            ds.labels.num_classes()
        );
        Ok(())
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// pretrain-clf
// ---------------------------------------------------------------------------

/// Train the frozen node classifier on the prepared training rows and save
/// its checkpoint plus the reached training accuracy.
pub fn pretrain_clf(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let desc = format!("{:?} seed={}", cfg.condense.classifier, cfg.seed);
    let mut guard = StageGuard::new(ctx, "pretrain-clf", desc);
    guard.inputs = DATASET_FILES.iter().map(|s| s.to_string()).collect();
    guard.outputs = vec!["classifier.dcmp".into(), "clf_metrics.txt".into()];
    run_stage(&mut guard, || {
        let ds = load_prepared(ctx)?;
        let train_idx = ds.split.train_indices();
        let rows: Vec<usize> = train_idx.iter().map(|&i| i as usize).collect();
        let x_train = ds.features.select_rows(&rows);
        let y_train: Vec<u32> = train_idx.iter().map(|&i| ds.labels.get(i as usize)).collect();
        let (clf, acc) = pretrain_classifier(
            &x_train,
            &y_train,
            ds.labels.num_classes(),
            &cfg.condense.classifier,
            cfg.seed,
        )?;
        save_mlp(ctx.path("classifier.dcmp"), &clf)?;
        write_text(&ctx.path("clf_metrics.txt"), &format!("train_acc={acc}\n"))?;
        println!("stage pretrain-clf: train_acc={acc:.4} ({} params)", clf.num_params());
        Ok(())
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// condense
// ---------------------------------------------------------------------------

/// Distill condensed features and labels through the frozen classifier.
/// Writes the graph-free condensed directory (features, labels, all-train
/// split, anchors) and the per-epoch loss log.
pub fn condense(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let desc = format!("{:?}", cfg.condense);
    let mut guard = StageGuard::new(ctx, "condense", desc);
    guard.inputs = DATASET_FILES.iter().map(|s| s.to_string()).collect();
    guard.inputs.push("classifier.dcmp".into());
    guard.outputs = vec![
        "condensed/features.bin".into(),
        "condensed/labels.txt".into(),
        "condensed/split.txt".into(),
        "condensed/anchors.txt".into(),
        "condense_log.tsv".into(),
    ];
    run_stage(&mut guard, || {
        let ds = load_prepared(ctx)?;
        let clf = load_mlp(ctx.path("classifier.dcmp"))?;
        let clf_acc = read_clf_acc(&ctx.path("clf_metrics.txt")).unwrap_or(f64::NAN);
        let result = condense_with_classifier(&ds, clf, clf_acc, &cfg.condense)?;
        save_condensed_features(ctx, &result)?;

        let mut log = String::from("# epoch\tL_cls\tL_alg\tL_anc\ttotal\n");
        for e in &result.log {
            writeln!(
                log,
                "{}\t{}\t{}\t{}\t{}",
                e.epoch, e.classification, e.alignment, e.anchor, e.total
            )
            .unwrap();
        }
        write_text(&ctx.path("condense_log.tsv"), &log)?;

        let best = result
            .log
            .iter()
            .min_by(|a, b| a.total.partial_cmp(&b.total).unwrap())
            .expect("condense log is never empty");
        println!(
            "stage condense: {} nodes, best total loss {:.4} at epoch {}",
            result.features.rows(),
            best.total,
            best.epoch
        );
        Ok(())
    })?;
    Ok(())
}

/// The condensed directory minus the graph: features, labels, an all-train
/// split, and the anchor lists. `translate` completes it.
fn save_condensed_features(ctx: &Ctx, result: &CondenseResult) -> Result<()> {
    let dir = ctx.path("condensed");
    fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    disco_core::data::save_features_bin(&dir.join("features.bin"), &result.features)?;
    disco_core::data::save_labels(&dir.join("labels.txt"), &result.labels)?;
    disco_core::data::save_split(
        &dir.join("split.txt"),
        &DataSplit::all_train(result.labels.len()),
    )?;
    save_anchors(&dir.join("anchors.txt"), &result.anchors)
}

fn read_clf_acc(path: &Path) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    text.lines()
        .find_map(|l| l.strip_prefix("train_acc="))
        .and_then(|v| v.parse().ok())
}

// ---------------------------------------------------------------------------
// pretrain-lp
// ---------------------------------------------------------------------------

/// Train the link predictor on the original graph's convolved node pairs and
/// save its checkpoint plus held-out edge metrics.
pub fn pretrain_lp(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let desc = format!("{:?}", cfg.translate);
    let mut guard = StageGuard::new(ctx, "pretrain-lp", desc);
    guard.inputs = DATASET_FILES.iter().map(|s| s.to_string()).collect();
    guard.outputs = vec!["predictor.dcmp".into(), "lp_metrics.txt".into()];
    run_stage(&mut guard, || {
        let ds = load_prepared(ctx)?;
        let reps = if cfg.translate.neighbor_aware {
            let h = aggregate_neighbors(&ds.graph, &ds.features, cfg.translate.aggregator);
            build_convolved(&ds.features, &h)
        } else {
            ds.features.clone()
        };
        let (predictor, held) = pretrain_link_predictor(&ds.graph, &reps, &cfg.translate)?;
        save_mlp(ctx.path("predictor.dcmp"), &predictor.mlp)?;
        let m = link_metrics(&held.scores, &held.targets, 0.5)?;
        let line = format!("acc={} prec={} rec={}\n", m.accuracy, m.precision, m.recall);
        write_text(&ctx.path("lp_metrics.txt"), &line)?;
        println!(
            "stage pretrain-lp: acc={:.4} prec={:.4} rec={:.4} (auc {:.4})",
            m.accuracy, m.precision, m.recall, m.auc
        );
        Ok(())
    })?;
    Ok(())
}

/// Rebuild the predictor from its checkpoint plus the config's recipe. The
/// checkpoint stores only MLP weights; aggregator and awareness must match
/// the pretraining config (the pipeline markers enforce this, and a width
/// mismatch is caught at scoring time).
fn load_predictor(ctx: &Ctx) -> Result<LinkPredictor> {
    let path = ctx.path("predictor.dcmp");
    if !path.exists() {
        return Err(Error::Invalid(format!(
            "no predictor checkpoint at {} (run pretrain-lp first)",
            path.display()
        )));
    }
    Ok(LinkPredictor {
        mlp: load_mlp(path)?,
        aggregator: ctx.cfg.translate.aggregator,
        neighbor_aware: ctx.cfg.translate.neighbor_aware,
    })
}

// ---------------------------------------------------------------------------
// translate
// ---------------------------------------------------------------------------

/// Score condensed node pairs through the pretrained link predictor and keep
/// pairs at or above `delta`, completing `<out>/condensed` into a loadable
/// condensed dataset directory.
pub fn translate_stage(ctx: &Ctx) -> Result<()> {
    let cfg = &ctx.cfg;
    let desc = format!(
        "delta={} aggregator={:?} neighbor_aware={} rate={} seed={}",
        cfg.translate.delta,
        cfg.translate.aggregator,
        cfg.translate.neighbor_aware,
        cfg.condense.reduction_rate,
        cfg.seed
    );
    let mut guard = StageGuard::new(ctx, "translate", desc);
    guard.inputs = vec![
        "dataset/features.bin".into(),
        "condensed/features.bin".into(),
        "condensed/labels.txt".into(),
        "condensed/anchors.txt".into(),
        "predictor.dcmp".into(),
    ];
    guard.outputs = vec!["condensed/graph.edges".into(), "condensed/meta.txt".into()];
    run_stage(&mut guard, || {
        let x_real = load_features_bin(&ctx.path("dataset/features.bin"))?;
        let x_cond = load_features_bin(&ctx.path("condensed/features.bin"))?;
        let labels = LabelVector::from_labels(load_labels(&ctx.path("condensed/labels.txt"))?)?;
        let anchors = load_anchors(&ctx.path("condensed/anchors.txt"))?;
        let predictor = load_predictor(ctx)?;
        let graph = translate(&x_cond, &anchors, &x_real, &predictor, cfg.translate.delta)?;
        let edges = graph.num_edges();
        let cond = CondensedGraph {
            graph,
            features: x_cond,
            labels,
        };
        let meta = CondensedMeta {
            reduction_rate: cfg.condense.reduction_rate,
            delta: cfg.translate.delta,
            seed: cfg.seed,
            source_nodes: x_real.rows(),
        };
        save_condensed(ctx.path("condensed"), &cond, &meta)?;
        // Read back through the validating loader: edge weights in [delta, 1].
        load_condensed(ctx.path("condensed"))?;
        println!(
            "stage translate: {} nodes, {} edges at delta {}",
            cond.features.rows(),
            edges,
            cfg.translate.delta
        );
        Ok(())
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Train the evaluation model on a condensed directory (default
/// `<out>/condensed`), select on the original validation set, test on the
/// original test set; or with `original`, train directly on the prepared
/// dataset as the upper-bound reference. Writes `report.txt` + `eval_log.tsv`.
pub fn evaluate(ctx: &Ctx, target: Option<&Path>, original: bool) -> Result<()> {
    let cfg = &ctx.cfg;
    let target_rel = match (original, target) {
        (true, _) => None,
        (false, t) => Some(rel_target(ctx, t.unwrap_or(&ctx.path("condensed")))),
    };
    let desc = format!("{:?} target={target_rel:?} original={original}", cfg.gnn);
    let mut guard = StageGuard::new(ctx, "evaluate", desc);
    guard.inputs = DATASET_FILES.iter().map(|s| s.to_string()).collect();
    if let Some(rel) = &target_rel {
        for f in ["graph.edges", "features.bin", "labels.txt", "meta.txt"] {
            guard.inputs.push(format!("{rel}/{f}"));
        }
    }
    guard.outputs = vec!["report.txt".into(), "eval_log.tsv".into()];
    run_stage(&mut guard, || {
        let ds = load_prepared(ctx)?;
        let (report, header, metric_block) = if original {
            let report = train_on_original(&ds, &cfg.gnn)?;
            (report, "target=original\n".to_string(), String::new())
        } else {
            let rel = target_rel.as_ref().unwrap();
            let (cond, meta) = load_condensed(ctx.path(rel))?;
            let report = train_and_test(&cond, &ds, &cfg.gnn)?;
            let header = format!(
                "target={rel}\nreduction_rate={}\ndelta={}\n",
                meta.reduction_rate, meta.delta
            );
            let m = report.metrics.as_ref().expect("condensed runs carry metrics");
            let block = format!(
                "nodes={}\nedges={}\nhomophily={}\nsilhouette={}\ndavies_bouldin={}\ncalinski_harabasz={}\n",
                m.nodes,
                m.edges,
                m.homophily.unwrap_or(f64::NAN),
                m.silhouette,
                m.davies_bouldin,
                m.calinski_harabasz
            );
            (report, header, block)
        };

        let arch = format!("{:?}", cfg.gnn.arch).to_lowercase();
        let report_text = format!(
            "stage=evaluate\narch={arch}\nseed={}\n{header}{metric_block}best_val_acc={}\nbest_epoch={}\ntest_acc={}\n",
            cfg.seed, report.best_val_acc, report.best_epoch, report.test_acc
        );
        write_text(&ctx.path("report.txt"), &report_text)?;

        let mut log = String::from("# epoch\ttrain_loss\tval_acc\ttest_acc\n");
        for e in &report.log {
            writeln!(log, "{}\t{}\t{}\t{}", e.epoch, e.train_loss, e.val_acc, e.test_acc).unwrap();
        }
        write_text(&ctx.path("eval_log.tsv"), &log)?;

        println!(
            "stage evaluate: {arch} test_acc={:.4} (best val {:.4} at epoch {})",
            report.test_acc, report.best_val_acc, report.best_epoch
        );
        Ok(())
    })?;
    Ok(())
}

/// Express an evaluation/metrics target as a run-dir-relative path so the
/// marker file lists portable names.
fn rel_target(ctx: &Ctx, target: &Path) -> String {
    target
        .strip_prefix(&ctx.cfg.out)
        .unwrap_or(target)
        .to_string_lossy()
        .into_owned()
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BaselineMethod {
    Random,
    Herding,
    Kcenter,
}

impl BaselineMethod {
    fn name(self) -> &'static str {
        match self {
            BaselineMethod::Random => "random",
            BaselineMethod::Herding => "herding",
            BaselineMethod::Kcenter => "kcenter",
        }
    }
}

/// Coreset baseline at the configured reduction rate: select real training
/// nodes, then write their ids and the induced condensed dataset directory
/// under `baseline-<method>/`.
pub fn baseline(ctx: &Ctx, method: BaselineMethod) -> Result<()> {
    let cfg = &ctx.cfg;
    let dir_rel = format!("baseline-{}", method.name());
    let desc = format!(
        "method={} rate={} seed={}",
        method.name(),
        cfg.condense.reduction_rate,
        cfg.seed
    );
    let mut guard = StageGuard::new(ctx, dir_rel.clone(), desc);
    guard.inputs = DATASET_FILES.iter().map(|s| s.to_string()).collect();
    guard.outputs = vec![
        format!("{dir_rel}/selected.txt"),
        format!("{dir_rel}/graph.edges"),
        format!("{dir_rel}/features.bin"),
        format!("{dir_rel}/labels.txt"),
        format!("{dir_rel}/split.txt"),
        format!("{dir_rel}/meta.txt"),
    ];
    run_stage(&mut guard, || {
        let ds = load_prepared(ctx)?;
        let train_idx = ds.split.train_indices();
        let y_train: Vec<u32> = train_idx.iter().map(|&i| ds.labels.get(i as usize)).collect();
        let budget = allocate_budget(
            &y_train,
            ds.labels.num_classes(),
            cfg.condense.reduction_rate,
        )?;
        let pools = group_by_class(&train_idx, &ds.labels);
        let ids = match method {
            BaselineMethod::Random => random_select(&pools, &budget, cfg.seed)?,
            BaselineMethod::Herding => herding_select(&ds.features, &pools, &budget)?,
            BaselineMethod::Kcenter => kcenter_select(&ds.features, &pools, &budget, cfg.seed)?,
        };

        let rows: Vec<usize> = ids.iter().map(|&i| i as usize).collect();
        let (graph, _) = induced_subgraph(&ds.graph, &ids)?;
        let cond = CondensedGraph {
            graph,
            features: ds.features.select_rows(&rows),
            labels: LabelVector::new(
                ids.iter().map(|&i| ds.labels.get(i as usize)).collect(),
                ds.labels.num_classes(),
            )?,
        };
        let meta = CondensedMeta {
            reduction_rate: cfg.condense.reduction_rate,
            // Induced real edges carry unit weights; no score threshold was
            // applied, so record the vacuous bound.
            delta: 0.0,
            seed: cfg.seed,
            source_nodes: ds.graph.num_nodes(),
        };
        let dir = ctx.path(&dir_rel);
        save_condensed(&dir, &cond, &meta)?;
        let mut selected = String::new();
        for id in &ids {
            writeln!(selected, "{id}").unwrap();
        }
        write_text(&dir.join("selected.txt"), &selected)?;
        println!(
            "stage baseline-{}: picked {} nodes, {} induced edges",
            method.name(),
            ids.len(),
            cond.graph.num_edges()
        );
        Ok(())
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

/// Structural quality metrics of a condensed directory (default
/// `<out>/condensed`): node/edge counts, homophily, and clustering indices.
pub fn metrics(ctx: &Ctx, target: Option<&Path>) -> Result<()> {
    let rel = rel_target(ctx, target.unwrap_or(&ctx.path("condensed")));
    let desc = format!("target={rel}");
    let mut guard = StageGuard::new(ctx, "metrics", desc);
    for f in ["graph.edges", "features.bin", "labels.txt", "meta.txt"] {
        guard.inputs.push(format!("{rel}/{f}"));
    }
    guard.outputs = vec!["metrics.txt".into()];
    run_stage(&mut guard, || {
        let (cond, _) = load_condensed(ctx.path(&rel))?;
        let m = condensed_metrics(&cond)?;
        let text = format!(
            "target={rel}\nnodes={}\nedges={}\nhomophily={}\nsilhouette={}\ndavies_bouldin={}\ncalinski_harabasz={}\n",
            m.nodes,
            m.edges,
            m.homophily.unwrap_or(f64::NAN),
            m.silhouette,
            m.davies_bouldin,
            m.calinski_harabasz
        );
        write_text(&ctx.path("metrics.txt"), &text)?;
        print!("stage metrics:\n{text}");
        Ok(())
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// export-embeddings
// ---------------------------------------------------------------------------

/// Dump a directory's features and labels as one TSV row per node (feature
/// values, then the label) for external plotting. Works on the graph-free
/// condensed directory too.
pub fn export_embeddings(ctx: &Ctx, target: Option<&Path>) -> Result<()> {
    let rel = rel_target(ctx, target.unwrap_or(&ctx.path("condensed")));
    let desc = format!("target={rel}");
    let mut guard = StageGuard::new(ctx, "export-embeddings", desc);
    guard.inputs = vec![format!("{rel}/features.bin"), format!("{rel}/labels.txt")];
    guard.outputs = vec!["embeddings.tsv".into()];
    run_stage(&mut guard, || {
        let x = load_features_bin(&ctx.path(&format!("{rel}/features.bin")))?;
        let labels = load_labels(&ctx.path(&format!("{rel}/labels.txt")))?;
        if labels.len() != x.rows() {
            return Err(Error::Invalid(format!(
                "{} labels for {} feature rows",
                labels.len(),
                x.rows()
            )));
        }
        let mut out = String::new();
        for i in 0..x.rows() {
            for v in x.row(i) {
                write!(out, "{v}\t").unwrap();
            }
            writeln!(out, "{}", labels[i]).unwrap();
        }
        write_text(&ctx.path("embeddings.tsv"), &out)?;
        println!("stage export-embeddings: {} rows x {} columns", x.rows(), x.cols() + 1);
        Ok(())
    })?;
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

/// Every stage in dependency order; previously completed stages are skipped
/// through their markers, so a rerun resumes where it stopped.
pub fn pipeline(ctx: &Ctx) -> Result<()> {
    prepare(ctx)?;
    pretrain_clf(ctx)?;
    condense(ctx)?;
    pretrain_lp(ctx)?;
    translate_stage(ctx)?;
    evaluate(ctx, None, false)?;
    for method in [
        BaselineMethod::Random,
        BaselineMethod::Herding,
        BaselineMethod::Kcenter,
    ] {
        baseline(ctx, method)?;
    }
    metrics(ctx, None)?;
    Ok(())
}
