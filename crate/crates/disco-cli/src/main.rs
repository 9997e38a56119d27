//! `disco` — disentangled graph condensation pipeline.
//!
//! Stages run inside a run directory (`--out`) and resume through completion
//! markers; see [`stages`] for the layout. Configuration resolves as
//! flag > `--config` file > default, documented under `--help`.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage or file errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use disco_core::{Error, Result};

mod config;
mod stages;

use config::RunConfig;
use stages::{BaselineMethod, Ctx};

#[derive(Parser, Debug)]
#[command(
    name = "disco",
    version,
    about = "Condense a node-classification graph into a small synthetic one",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(flatten)]
    global: GlobalFlags,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct GlobalFlags {
    /// Base RNG seed for every stage
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Bitwise-deterministic mode (forces one thread)
    #[arg(long, global = true)]
    strict: bool,
    /// key=value config file; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run directory stages read from and write into
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Re-run stages whose completion markers still match
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Stage a dataset into the run directory (copy + validate, or generate
    /// the synthetic preset)
    Prepare(PrepareFlags),
    /// Train the frozen node classifier and save its checkpoint
    PretrainClf,
    /// Distill condensed features/labels through the frozen classifier
    Condense(CondenseFlags),
    /// Train the link predictor on the original graph
    PretrainLp(LpFlags),
    /// Score condensed pairs and complete the condensed dataset directory
    Translate(TranslateFlags),
    /// Train a model on condensed data, select on the original validation
    /// set, test on the original test set
    Evaluate(EvaluateFlags),
    /// Coreset selection baseline: ids + induced condensed dataset
    Baseline(BaselineFlags),
    /// Structural metrics of a condensed directory
    Metrics(TargetFlags),
    /// Every stage in order, resuming from completion markers
    Pipeline(PipelineFlags),
    /// Dump features + labels of a condensed directory as TSV
    ExportEmbeddings(TargetFlags),
}

#[derive(Args, Debug, Default)]
struct PrepareFlags {
    /// Source dataset directory to copy and validate
    #[arg(long, value_name = "DIR")]
    dataset: Option<PathBuf>,
    /// Synthetic preset when no dataset is given (citation, small)
    #[arg(long, value_name = "NAME")]
    synth: Option<String>,
    /// Generator seed, independent of --seed
    #[arg(long, value_name = "N")]
    synth_seed: Option<u64>,
    /// Normalize each feature row to sum 1 (true/false)
    #[arg(long, value_name = "BOOL")]
    row_normalize: Option<bool>,
}

#[derive(Args, Debug, Default)]
struct CondenseFlags {
    /// Fraction of the training set to condense into, in (0, 1]
    #[arg(long, value_name = "R")]
    rate: Option<f64>,
    /// Centroid alignment weight
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,
    /// Anchor proximity weight
    #[arg(long, value_name = "B")]
    beta: Option<f64>,
    /// Anchors per condensed node
    #[arg(long, value_name = "M")]
    anchors: Option<usize>,
    /// Feature optimization epochs
    #[arg(long, value_name = "N")]
    epochs: Option<usize>,
    /// Adam learning rate for the condensed features
    #[arg(long, value_name = "LR")]
    lr: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct LpFlags {
    /// Link predictor training steps
    #[arg(long, value_name = "N")]
    steps: Option<usize>,
    /// Neighbor aggregator (max, mean, sum)
    #[arg(long, value_name = "AGG")]
    aggregator: Option<String>,
    /// Negatives sampled per positive edge
    #[arg(long, value_name = "K")]
    negative_ratio: Option<usize>,
    /// Score convolved pairs instead of raw feature pairs (true/false)
    #[arg(long, value_name = "BOOL")]
    neighbor_aware: Option<bool>,
}

#[derive(Args, Debug, Default)]
struct TranslateFlags {
    /// Edge score threshold in (0, 1)
    #[arg(long, value_name = "D")]
    delta: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct EvaluateFlags {
    /// Evaluation model (gcn, sgc, mlp)
    #[arg(long, value_name = "ARCH")]
    arch: Option<String>,
    /// Condensed directory to evaluate (default <out>/condensed)
    #[arg(long, value_name = "DIR")]
    target: Option<PathBuf>,
    /// Train on the prepared original dataset instead (upper-bound reference)
    #[arg(long, conflicts_with = "target")]
    original: bool,
}

#[derive(Args, Debug)]
struct BaselineFlags {
    /// Selection method
    #[arg(value_enum)]
    method: BaselineMethod,
    /// Fraction of the training set to keep, in (0, 1]
    #[arg(long, value_name = "R")]
    rate: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct TargetFlags {
    /// Condensed directory to read (default <out>/condensed)
    #[arg(long, value_name = "DIR")]
    target: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct PipelineFlags {
    #[command(flatten)]
    prepare: PrepareFlags,
    #[command(flatten)]
    condense: CondenseFlags,
    #[command(flatten)]
    lp: LpFlags,
    #[command(flatten)]
    translate: TranslateFlags,
    /// Evaluation model (gcn, sgc, mlp)
    #[arg(long, value_name = "ARCH")]
    arch: Option<String>,
}

fn main() -> ExitCode {
    // Inject the config-key table into `--help`; clap's derive attributes
    // only take literals, and the table is generated from the live defaults.
    let matches = Cli::command()
        .after_long_help(config::config_keys_help())
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(), // usage errors exit 2 via clap
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Numeric(msg)) => {
            eprintln!("error: numerical failure: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Apply an optional flag value through the config key table so files and
/// flags share one parser and one set of range checks.
fn apply_flag<T: ToString>(
    cfg: &mut RunConfig,
    key: &str,
    value: &Option<T>,
) -> Result<()> {
    if let Some(v) = value {
        cfg.apply(key, &v.to_string())
            .map_err(|msg| Error::Invalid(format!("--{}: {msg}", key.replace('_', "-"))))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.global.config {
        cfg.load_file(path)?;
    }

    apply_flag(&mut cfg, "seed", &cli.global.seed)?;
    apply_flag(&mut cfg, "threads", &cli.global.threads)?;
    if cli.global.strict {
        cfg.strict = true;
    }
    if let Some(out) = &cli.global.out {
        cfg.out = out.clone();
    }

    // Subcommand flags override the file too.
    match &cli.cmd {
        Cmd::Prepare(f) => apply_prepare_flags(&mut cfg, f)?,
        Cmd::Condense(f) => apply_condense_flags(&mut cfg, f)?,
        Cmd::PretrainLp(f) => apply_lp_flags(&mut cfg, f)?,
        Cmd::Translate(f) => apply_flag(&mut cfg, "delta", &f.delta)?,
        Cmd::Evaluate(f) => apply_flag(&mut cfg, "gnn_arch", &f.arch)?,
        Cmd::Baseline(f) => apply_flag(&mut cfg, "reduction_rate", &f.rate)?,
        Cmd::Pipeline(f) => {
            apply_prepare_flags(&mut cfg, &f.prepare)?;
            apply_condense_flags(&mut cfg, &f.condense)?;
            apply_lp_flags(&mut cfg, &f.lp)?;
            apply_flag(&mut cfg, "delta", &f.translate.delta)?;
            apply_flag(&mut cfg, "gnn_arch", &f.arch)?;
        }
        Cmd::PretrainClf | Cmd::Metrics(_) | Cmd::ExportEmbeddings(_) => {}
    }
    cfg.finish();

    disco_core::configure_threads(cfg.threads);
    let ctx = Ctx::new(cfg, cli.global.force);

    match cli.cmd {
        Cmd::Prepare(_) => stages::prepare(&ctx),
        Cmd::PretrainClf => stages::pretrain_clf(&ctx),
        Cmd::Condense(_) => stages::condense(&ctx),
        Cmd::PretrainLp(_) => stages::pretrain_lp(&ctx),
        Cmd::Translate(_) => stages::translate_stage(&ctx),
        Cmd::Evaluate(f) => stages::evaluate(&ctx, f.target.as_deref(), f.original),
        Cmd::Baseline(f) => stages::baseline(&ctx, f.method),
        Cmd::Metrics(f) => stages::metrics(&ctx, f.target.as_deref()),
        Cmd::Pipeline(_) => stages::pipeline(&ctx),
        Cmd::ExportEmbeddings(f) => stages::export_embeddings(&ctx, f.target.as_deref()),
    }
}

fn apply_prepare_flags(cfg: &mut RunConfig, f: &PrepareFlags) -> Result<()> {
    if let Some(dir) = &f.dataset {
        cfg.dataset = Some(dir.clone());
    }
    apply_flag(cfg, "synth", &f.synth)?;
    apply_flag(cfg, "synth_seed", &f.synth_seed)?;
    apply_flag(cfg, "row_normalize", &f.row_normalize)
}

fn apply_condense_flags(cfg: &mut RunConfig, f: &CondenseFlags) -> Result<()> {
    apply_flag(cfg, "reduction_rate", &f.rate)?;
    apply_flag(cfg, "alpha", &f.alpha)?;
    apply_flag(cfg, "beta", &f.beta)?;
    apply_flag(cfg, "anchors_m", &f.anchors)?;
    apply_flag(cfg, "condense_epochs", &f.epochs)?;
    apply_flag(cfg, "condense_lr", &f.lr)
}

fn apply_lp_flags(cfg: &mut RunConfig, f: &LpFlags) -> Result<()> {
    apply_flag(cfg, "lp_steps", &f.steps)?;
    apply_flag(cfg, "aggregator", &f.aggregator)?;
    apply_flag(cfg, "negative_ratio", &f.negative_ratio)?;
    apply_flag(cfg, "neighbor_aware", &f.neighbor_aware)
}
