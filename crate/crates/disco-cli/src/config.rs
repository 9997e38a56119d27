//! Run configuration: defaults, `key=value` config files, flag precedence.
//!
//! One flat key space drives every stage. Values resolve as
//! flag > config file > built-in default; unknown or ill-typed file keys are
//! rejected with their line number. [`RunConfig::apply`] is the single entry
//! point for both files and flags, so a value is validated the same way no
//! matter where it came from.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use disco_core::condense::CondenseConfig;
use disco_core::evaluate::GnnConfig;
use disco_core::translate::TranslateConfig;
use disco_core::{Error, Result};

/// Everything a run needs. The stage sub-configs are the library types; the
/// global `seed` is copied into each of them by [`RunConfig::finish`].
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Source dataset directory staged by `prepare`. When unset, `prepare`
    /// generates the synthetic preset named by `synth` instead.
    pub dataset: Option<PathBuf>,
    /// Synthetic preset (`citation` or `small`) used when `dataset` is unset.
    pub synth: String,
    /// Seed for the synthetic generator. Kept separate from the model seed
    /// so sweeps over `seed` retrain on one fixed benchmark instance.
    pub synth_seed: u64,
    /// Row-normalize features during `prepare` (each nonzero row sums to 1).
    /// On by default: bag-of-words citation features are conventionally
    /// row-stochastic, and the pipeline defaults are calibrated to that
    /// scale.
    pub row_normalize: bool,
    /// Run directory every stage reads from and writes into.
    pub out: PathBuf,
    /// Base RNG seed for all stages.
    pub seed: u64,
    /// Worker threads for intra-stage parallelism (0 = all cores).
    pub threads: usize,
    /// Bitwise-deterministic mode; forces a single thread.
    pub strict: bool,
    pub condense: CondenseConfig,
    pub translate: TranslateConfig,
    pub gnn: GnnConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            synth: "citation".into(),
            synth_seed: 0,
            row_normalize: true,
            out: PathBuf::from("run"),
            seed: 0,
            threads: 0,
            strict: false,
            condense: CondenseConfig::default(),
            translate: TranslateConfig::default(),
            gnn: GnnConfig::default(),
        }
    }
}

impl RunConfig {
    /// Set one key. Returns a bare message (no location); callers attach the
    /// file/line or flag name.
    pub fn apply(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(kind: &str, v: &str) -> std::result::Result<T, String> {
            v.parse::<T>().map_err(|_| format!("expected {kind}, got '{v}'"))
        }
        fn flag(v: &str) -> std::result::Result<bool, String> {
            match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(format!("expected true or false, got '{v}'")),
            }
        }
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "synth" => {
                if value != "citation" && value != "small" {
                    return Err(format!("unknown preset '{value}' (citation, small)"));
                }
                self.synth = value.into();
            }
            "synth_seed" => self.synth_seed = num("an integer", value)?,
            "row_normalize" => self.row_normalize = flag(value)?,
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = num("an integer", value)?,
            "threads" => self.threads = num("an integer", value)?,
            "strict" => self.strict = flag(value)?,

            "reduction_rate" => self.condense.reduction_rate = num("a number", value)?,
            "alpha" => self.condense.alpha = num("a number", value)?,
            "beta" => self.condense.beta = num("a number", value)?,
            "anchors_m" => self.condense.anchors_m = num("an integer", value)?,
            "condense_epochs" => self.condense.epochs = num("an integer", value)?,
            "condense_lr" => self.condense.lr_features = num("a number", value)?,
            "anchor_refresh_every" => {
                self.condense.anchor_refresh_every = num("an integer", value)?
            }

            "clf_layers" => self.condense.classifier.layers = num("an integer", value)?,
            "clf_hidden" => self.condense.classifier.hidden = num("an integer", value)?,
            "clf_dropout" => self.condense.classifier.dropout = num("a number", value)?,
            "clf_lr" => self.condense.classifier.lr = num("a number", value)?,
            "clf_weight_decay" => {
                self.condense.classifier.weight_decay = num("a number", value)?
            }
            "clf_epochs" => self.condense.classifier.epochs = num("an integer", value)?,

            "lp_layers" => self.translate.layers = num("an integer", value)?,
            "lp_hidden" => self.translate.hidden = num("an integer", value)?,
            "lp_dropout" => self.translate.dropout = num("a number", value)?,
            "lp_lr" => self.translate.lr = num("a number", value)?,
            "lp_weight_decay" => self.translate.weight_decay = num("a number", value)?,
            "lp_steps" => self.translate.steps = num("an integer", value)?,
            "lp_batch_positives" => self.translate.batch_positives = num("an integer", value)?,
            "negative_ratio" => self.translate.negative_ratio = num("an integer", value)?,
            "lp_holdout_frac" => self.translate.holdout_frac = num("a number", value)?,
            "aggregator" => self.translate.aggregator = value.parse().map_err(err_msg)?,
            "neighbor_aware" => self.translate.neighbor_aware = flag(value)?,
            "delta" => {
                let d: f64 = num("a number", value)?;
                if !(d > 0.0 && d < 1.0) {
                    return Err("delta out of (0,1)".into());
                }
                self.translate.delta = d;
            }

            "gnn_arch" => self.gnn.arch = value.parse().map_err(err_msg)?,
            "gnn_layers" => self.gnn.layers = num("an integer", value)?,
            "gnn_hidden" => self.gnn.hidden = num("an integer", value)?,
            "gnn_dropout" => self.gnn.dropout = num("a number", value)?,
            "gnn_lr" => self.gnn.lr = num("a number", value)?,
            "gnn_weight_decay" => self.gnn.weight_decay = num("a number", value)?,
            "gnn_epochs" => self.gnn.epochs = num("an integer", value)?,
            "gnn_eval_every" => self.gnn.eval_every = num("an integer", value)?,
            "sgc_k" => self.gnn.sgc_k = num("an integer", value)?,

            other => return Err(format!("unknown key '{other}'")),
        }
        Ok(())
    }

    /// Read a `key=value` config file into this config. Blank lines and `#`
    /// comments are ignored; errors carry the offending line number.
    pub fn load_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Format {
                path: path.into(),
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            self.apply(key.trim(), value.trim())
                .map_err(|msg| Error::Format {
                    path: path.into(),
                    line: i + 1,
                    msg,
                })?;
        }
        Ok(())
    }

    /// Final fix-ups after all sources are merged: the global seed flows
    /// into every stage config and strict mode pins the thread count.
    pub fn finish(&mut self) {
        if self.strict {
            self.threads = 1;
        }
        self.condense.seed = self.seed;
        self.translate.seed = self.seed;
        self.gnn.seed = self.seed;
    }
}

fn err_msg(e: Error) -> String {
    e.to_string()
}

/// `--help` epilogue: every config-file key with its default, generated from
/// [`RunConfig::default`] so the documentation cannot drift.
pub fn config_keys_help() -> String {
    let d = RunConfig::default();
    let rows: &[(&str, String, &str)] = &[
        ("dataset", "(unset)".into(), "source dataset dir for prepare"),
        ("synth", d.synth.clone(), "synthetic preset when dataset is unset"),
        ("synth_seed", d.synth_seed.to_string(), "generator seed (fixed across model seeds)"),
        ("row_normalize", d.row_normalize.to_string(), "normalize feature rows to sum 1 in prepare"),
        ("out", d.out.display().to_string(), "run directory"),
        ("seed", d.seed.to_string(), "base RNG seed for every stage"),
        ("threads", d.threads.to_string(), "worker threads (0 = all cores)"),
        ("strict", d.strict.to_string(), "bitwise-deterministic mode (1 thread)"),
        ("reduction_rate", d.condense.reduction_rate.to_string(), "fraction of the training set to keep"),
        ("alpha", d.condense.alpha.to_string(), "centroid alignment weight"),
        ("beta", d.condense.beta.to_string(), "anchor proximity weight"),
        ("anchors_m", d.condense.anchors_m.to_string(), "anchors per condensed node"),
        ("condense_epochs", d.condense.epochs.to_string(), "feature optimization epochs"),
        ("condense_lr", d.condense.lr_features.to_string(), "Adam lr for condensed features"),
        ("anchor_refresh_every", d.condense.anchor_refresh_every.to_string(), "epochs between anchor refreshes"),
        ("clf_layers", d.condense.classifier.layers.to_string(), "classifier MLP layers"),
        ("clf_hidden", d.condense.classifier.hidden.to_string(), "classifier hidden width"),
        ("clf_dropout", d.condense.classifier.dropout.to_string(), "classifier dropout"),
        ("clf_lr", d.condense.classifier.lr.to_string(), "classifier Adam lr"),
        ("clf_weight_decay", d.condense.classifier.weight_decay.to_string(), "classifier weight decay"),
        ("clf_epochs", d.condense.classifier.epochs.to_string(), "classifier training epochs"),
        ("lp_layers", d.translate.layers.to_string(), "link predictor MLP layers"),
        ("lp_hidden", d.translate.hidden.to_string(), "link predictor hidden width"),
        ("lp_dropout", d.translate.dropout.to_string(), "link predictor dropout"),
        ("lp_lr", d.translate.lr.to_string(), "link predictor Adam lr"),
        ("lp_weight_decay", d.translate.weight_decay.to_string(), "link predictor weight decay"),
        ("lp_steps", d.translate.steps.to_string(), "link predictor training steps"),
        ("lp_batch_positives", d.translate.batch_positives.to_string(), "positive edges per step"),
        ("negative_ratio", d.translate.negative_ratio.to_string(), "negatives sampled per positive"),
        ("lp_holdout_frac", d.translate.holdout_frac.to_string(), "held-out fraction of edges"),
        ("aggregator", format!("{:?}", d.translate.aggregator).to_lowercase(), "neighbor aggregator (max, mean, sum)"),
        ("neighbor_aware", d.translate.neighbor_aware.to_string(), "score convolved pairs instead of raw pairs"),
        ("delta", d.translate.delta.to_string(), "edge score threshold in (0,1)"),
        ("gnn_arch", format!("{:?}", d.gnn.arch).to_lowercase(), "evaluation model (gcn, sgc, mlp)"),
        ("gnn_layers", d.gnn.layers.to_string(), "evaluation model layers"),
        ("gnn_hidden", d.gnn.hidden.to_string(), "evaluation hidden width"),
        ("gnn_dropout", d.gnn.dropout.to_string(), "evaluation dropout"),
        ("gnn_lr", d.gnn.lr.to_string(), "evaluation Adam lr"),
        ("gnn_weight_decay", d.gnn.weight_decay.to_string(), "evaluation weight decay"),
        ("gnn_epochs", d.gnn.epochs.to_string(), "evaluation training epochs"),
        ("gnn_eval_every", d.gnn.eval_every.to_string(), "epochs between validation checks"),
        ("sgc_k", d.gnn.sgc_k.to_string(), "SGC propagation steps"),
    ];
    let mut out = String::from(
        "Config file keys (one key=value per line; flags override the file):\n",
    );
    for (key, default, help) in rows {
        writeln!(out, "  {key:<22} {help} [default: {default}]").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_keeps_library_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# nothing but comments\n\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.load_file(&path).unwrap();
        assert_eq!(cfg.condense.alpha, 50.0);
        assert_eq!(cfg.condense.beta, 1.0);
        assert_eq!(cfg.condense.anchors_m, 1);
        assert_eq!(cfg.translate.delta, 0.95);
        assert_eq!(cfg.translate.negative_ratio, 3);
        assert_eq!(
            format!("{:?}", cfg.translate.aggregator).to_lowercase(),
            "max"
        );
    }

    #[test]
    fn flag_overrides_file_value() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "alpha=100\n").unwrap();
        let mut cfg = RunConfig::default();
        cfg.load_file(&path).unwrap();
        assert_eq!(cfg.condense.alpha, 100.0);
        cfg.apply("alpha", "50").unwrap(); // the flag lands after the file
        assert_eq!(cfg.condense.alpha, 50.0);
    }

    #[test]
    fn unknown_and_ill_typed_keys_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "alpha=50\nwibble=1\n").unwrap();
        let mut cfg = RunConfig::default();
        let err = cfg.load_file(&path).unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("unknown key 'wibble'"), "{err}");

        fs::write(&path, "\n\nalpha=lots\n").unwrap();
        let err = cfg.load_file(&path).unwrap_err().to_string();
        assert!(err.contains("line 3") && err.contains("'lots'"), "{err}");
    }

    #[test]
    fn delta_range_is_checked_at_parse_time() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "delta=1.5\n").unwrap();
        let mut cfg = RunConfig::default();
        let err = cfg.load_file(&path).unwrap_err().to_string();
        assert!(err.contains("delta out of (0,1)"), "{err}");
    }

    #[test]
    fn strict_mode_pins_one_thread_and_seed_flows_to_stages() {
        let mut cfg = RunConfig::default();
        cfg.apply("strict", "true").unwrap();
        cfg.apply("seed", "42").unwrap();
        cfg.apply("threads", "8").unwrap();
        cfg.finish();
        assert_eq!(cfg.threads, 1);
        assert_eq!(cfg.condense.seed, 42);
        assert_eq!(cfg.translate.seed, 42);
        assert_eq!(cfg.gnn.seed, 42);
    }

    #[test]
    fn help_text_names_every_accepted_key() {
        // Every key listed in the help must be accepted by `apply`, so the
        // documentation and the parser cannot drift apart.
        let help = config_keys_help();
        let mut cfg = RunConfig::default();
        let mut seen = 0;
        for line in help.lines().skip(1) {
            let key = line.split_whitespace().next().unwrap();
            let probe = ["citation", "true", "max", "gcn", "0.5", "3", "run"]
                .iter()
                .find(|v| cfg.apply(key, v).is_ok());
            assert!(probe.is_some(), "help names key '{key}' the parser rejects");
            seen += 1;
        }
        assert!(seen >= 40, "expected the full key table, saw {seen}");
    }
}
