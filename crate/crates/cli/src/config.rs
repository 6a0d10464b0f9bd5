//! Experiment configuration: a flat `[section]` / `key = value` text format
//! chosen so resolved configs diff cleanly inside run manifests. Every key can
//! be overridden from the command line with `--set section.key=value`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use cldfa_core::corpus::{CipherKind, SyntheticBilingualSpec, TopicShift};
use cldfa_core::distill::{AdversarialConfig, RampSchedule, TrainConfig};
use cldfa_core::kcnn::ModelConfig;
use cldfa_core::nn::{OptAlgorithm, OptimizerConfig};

use crate::error::{CliError, Result};

/// Keys the resolver understands; anything else in a config file is an error.
const KNOWN_KEYS: &[&str] = &[
    "run.seed",
    "run.out",
    "synth.enabled",
    "synth.vocab_size",
    "synth.num_classes",
    "synth.signal_tokens_per_class",
    "synth.signal_prob",
    "synth.doc_len_min",
    "synth.doc_len_max",
    "synth.n_labeled",
    "synth.n_unlabeled_src",
    "synth.n_parallel",
    "synth.n_test",
    "synth.n_labeled_tgt",
    "synth.num_topics",
    "synth.shift_labeled",
    "synth.shift_parallel",
    "synth.shift_test",
    "synth.cipher",
    "synth.cipher_seed",
    "data.l_src",
    "data.u_parl",
    "data.t_tgt",
    "data.u_tgt",
    "data.embeddings_src",
    "data.embeddings_tgt",
    "model.embedding_dim",
    "model.window_sizes",
    "model.filters_per_window",
    "model.max_len",
    "model.min_count",
    "model.max_vocab",
    "step1.epochs",
    "step1.batch_size",
    "step1.optimizer",
    "step1.lr",
    "step1.momentum",
    "step1.clip_norm",
    "step1.adapt",
    "step1.alpha",
    "step1.disc_hidden",
    "step1.ramp",
    "step1.dropout",
    "step1.patience",
    "step1.val_fraction",
    "step2.epochs",
    "step2.batch_size",
    "step2.optimizer",
    "step2.lr",
    "step2.momentum",
    "step2.clip_norm",
    "step2.adapt",
    "step2.alpha",
    "step2.disc_hidden",
    "step2.ramp",
    "step2.dropout",
    "step2.patience",
    "step2.val_fraction",
    "step2.temperature",
    "step2.temperatures",
    "step2.rescale_t2",
    "finetune.labels",
    "finetune.budget",
    "finetune.epochs",
    "finetune.batch_size",
    "finetune.lr",
    "eval.checkpoint",
    "eval.data",
    "project.checkpoint",
    "project.split_a",
    "project.split_a_kind",
    "project.split_b",
    "project.split_b_kind",
];

/// Parsed but untyped configuration: `section.key` → value string.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, origin: &str) -> Result<RawConfig> {
        let mut values = BTreeMap::new();
        let mut section = String::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    CliError::Config(format!("{origin}:{}: unterminated section header", idx + 1))
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{origin}:{}: expected `key = value`", idx + 1))
            })?;
            let key = key.trim();
            if key.is_empty() || section.is_empty() {
                return Err(CliError::Config(format!(
                    "{origin}:{}: key outside a [section]",
                    idx + 1
                )));
            }
            values.insert(format!("{section}.{key}"), value.trim().to_string());
        }
        Ok(RawConfig { values })
    }

    pub fn from_file(path: &Path) -> Result<RawConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        RawConfig::parse(&text, &path.display().to_string())
    }

    /// Applies one `section.key=value` command-line override.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set expects section.key=value, got {assignment:?}"))
        })?;
        let key = key.trim();
        if !key.contains('.') {
            return Err(CliError::Config(format!(
                "--set key {key:?} must be section.key"
            )));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.values.keys().any(|k| k.starts_with(&prefix))
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        CliError::Config(format!(
            "key {key} has invalid value {value:?} (expected {})",
            std::any::type_name::<T>()
        ))
    })
}

fn get_or<T: std::str::FromStr>(raw: &RawConfig, key: &str, default: T) -> Result<T> {
    match raw.get(key) {
        Some(v) => parse_as(key, v),
        None => Ok(default),
    }
}

fn get_bool(raw: &RawConfig, key: &str, default: bool) -> Result<bool> {
    match raw.get(key) {
        None => Ok(default),
        Some("true") | Some("on") | Some("yes") | Some("1") => Ok(true),
        Some("false") | Some("off") | Some("no") | Some("0") => Ok(false),
        Some(v) => Err(CliError::Config(format!(
            "key {key} has invalid boolean {v:?}"
        ))),
    }
}

fn get_list<T: std::str::FromStr>(raw: &RawConfig, key: &str) -> Result<Option<Vec<T>>> {
    match raw.get(key) {
        None => Ok(None),
        Some("") | Some("none") => Ok(None),
        Some(v) => v
            .split(',')
            .map(|item| parse_as(key, item.trim()))
            .collect::<Result<Vec<T>>>()
            .map(Some),
    }
}

/// Where the corpus comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Synthetic(SyntheticBilingualSpec),
    Files(DataPaths),
}

#[derive(Debug, Clone)]
pub struct DataPaths {
    pub l_src: PathBuf,
    pub u_parl: PathBuf,
    pub t_tgt: Option<PathBuf>,
    pub u_tgt: Option<PathBuf>,
    pub embeddings_src: Option<PathBuf>,
    pub embeddings_tgt: Option<PathBuf>,
}

/// Split kinds understood by the projection command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    /// `label<TAB>text` rows.
    Labeled,
    /// One document per line.
    Lines,
    /// Source column of a parallel TSV.
    ParallelSrc,
    /// Target column of a parallel TSV.
    ParallelTgt,
}

impl SplitKind {
    fn parse(key: &str, value: &str) -> Result<SplitKind> {
        match value {
            "labeled" => Ok(SplitKind::Labeled),
            "lines" => Ok(SplitKind::Lines),
            "parallel_src" => Ok(SplitKind::ParallelSrc),
            "parallel_tgt" => Ok(SplitKind::ParallelTgt),
            other => Err(CliError::Config(format!(
                "key {key}: unknown split kind {other:?} \
                 (expected labeled | lines | parallel_src | parallel_tgt)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectKeys {
    pub checkpoint: String,
    pub split_a: String,
    pub split_a_kind: SplitKind,
    pub split_b: String,
    pub split_b_kind: SplitKind,
}

#[derive(Debug, Clone)]
pub struct EvalKeys {
    /// Comma-separated checkpoint list; more than one forms an ensemble.
    pub checkpoints: Vec<String>,
    pub data: String,
}

#[derive(Debug, Clone)]
pub struct FinetuneKeys {
    pub labels: String,
    pub budget: Option<usize>,
    pub train: TrainConfig,
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub source: DataSource,
    pub model: ModelConfig,
    pub min_count: usize,
    pub max_vocab: usize,
    pub step1: TrainConfig,
    pub step2: TrainConfig,
    /// Temperature set for ensembling; a single temperature lives in
    /// `step2.temperature`.
    pub temperatures: Option<Vec<f64>>,
    pub finetune: FinetuneKeys,
    pub eval: EvalKeys,
    pub project: ProjectKeys,
    /// Resolved snapshot, echoed into the run manifest.
    pub raw: BTreeMap<String, String>,
}

fn step_train_config(raw: &RawConfig, section: &str, seed: u64) -> Result<TrainConfig> {
    let key = |k: &str| format!("{section}.{k}");
    let algorithm = match raw.get(&key("optimizer")).unwrap_or("adam") {
        "adam" => OptAlgorithm::Adam,
        "sgd" | "sgd_momentum" => OptAlgorithm::SgdMomentum,
        other => {
            return Err(CliError::Config(format!(
                "{section}.optimizer: unknown algorithm {other:?}"
            )))
        }
    };
    let defaults = OptimizerConfig::default();
    let optimizer = OptimizerConfig {
        algorithm,
        learning_rate: get_or(raw, &key("lr"), defaults.learning_rate)?,
        momentum: get_or(raw, &key("momentum"), defaults.momentum)?,
        clip_norm: get_or(raw, &key("clip_norm"), defaults.clip_norm)?,
        ..defaults
    };
    let adversarial = if get_bool(raw, &key("adapt"), false)? {
        Some(AdversarialConfig {
            alpha: get_or(raw, &key("alpha"), 0.2)?,
            hidden_dim: get_or(raw, &key("disc_hidden"), 100)?,
            ramp: match raw.get(&key("ramp")).unwrap_or("constant") {
                "constant" => RampSchedule::Constant,
                "sigmoid" => RampSchedule::Sigmoid,
                other => {
                    return Err(CliError::Config(format!(
                        "{section}.ramp: unknown schedule {other:?}"
                    )))
                }
            },
        })
    } else {
        None
    };
    let patience = match raw.get(&key("patience")) {
        None | Some("") | Some("none") => None,
        Some(v) => Some(parse_as::<usize>(&key("patience"), v)?),
    };
    Ok(TrainConfig {
        temperature: get_or(raw, &key("temperature"), 5.0)?,
        epochs: get_or(raw, &key("epochs"), 10)?,
        batch_size: get_or(raw, &key("batch_size"), 32)?,
        optimizer,
        adversarial,
        seed,
        patience,
        val_fraction: get_or(raw, &key("val_fraction"), 0.0)?,
        dropout: get_or(raw, &key("dropout"), 0.0)?,
        rescale_t2: get_bool(raw, &key("rescale_t2"), false)?,
    })
}

fn synth_spec(raw: &RawConfig) -> Result<SyntheticBilingualSpec> {
    let defaults = SyntheticBilingualSpec::default();
    let num_topics = get_or(raw, "synth.num_topics", defaults.num_topics)?;
    let shift_labeled = get_list::<f64>(raw, "synth.shift_labeled")?;
    let shift_parallel = get_list::<f64>(raw, "synth.shift_parallel")?;
    let shift_test = get_list::<f64>(raw, "synth.shift_test")?;
    let shift = match (&shift_labeled, &shift_parallel, &shift_test) {
        (None, None, None) => None,
        _ => {
            let uniform = vec![1.0; num_topics];
            Some(TopicShift {
                labeled: shift_labeled.unwrap_or_else(|| uniform.clone()),
                parallel: shift_parallel.unwrap_or_else(|| uniform.clone()),
                test: shift_test.unwrap_or(uniform),
            })
        }
    };
    let cipher = match raw.get("synth.cipher").unwrap_or("permutation") {
        "permutation" => CipherKind::Permutation,
        "identity" => CipherKind::Identity,
        other => {
            return Err(CliError::Config(format!(
                "synth.cipher: unknown kind {other:?}"
            )))
        }
    };
    let max_len = get_or(raw, "model.max_len", 64usize)?;
    Ok(SyntheticBilingualSpec {
        vocab_size: get_or(raw, "synth.vocab_size", defaults.vocab_size)?,
        num_classes: get_or(raw, "synth.num_classes", defaults.num_classes)?,
        signal_tokens_per_class: get_or(
            raw,
            "synth.signal_tokens_per_class",
            defaults.signal_tokens_per_class,
        )?,
        signal_prob: get_or(raw, "synth.signal_prob", defaults.signal_prob)?,
        doc_len: (
            get_or(raw, "synth.doc_len_min", defaults.doc_len.0)?,
            get_or(raw, "synth.doc_len_max", defaults.doc_len.1)?,
        ),
        n_labeled: get_or(raw, "synth.n_labeled", defaults.n_labeled)?,
        n_unlabeled_src: get_or(raw, "synth.n_unlabeled_src", defaults.n_unlabeled_src)?,
        n_parallel: get_or(raw, "synth.n_parallel", defaults.n_parallel)?,
        n_test: get_or(raw, "synth.n_test", defaults.n_test)?,
        n_labeled_tgt: get_or(raw, "synth.n_labeled_tgt", defaults.n_labeled_tgt)?,
        num_topics,
        shift,
        cipher,
        cipher_seed: get_or(raw, "synth.cipher_seed", defaults.cipher_seed)?,
        max_len,
    })
}

impl ExperimentConfig {
    pub fn resolve(raw: &RawConfig) -> Result<ExperimentConfig> {
        for key in raw.values.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown config key {key:?}")));
            }
        }

        let seed: u64 = get_or(raw, "run.seed", 42)?;
        let out = PathBuf::from(raw.get("run.out").unwrap_or("cldfa_out"));

        let synth_present = raw.has_section("synth");
        let data_present = raw.has_section("data");
        let source = match (synth_present, data_present) {
            (true, false) => DataSource::Synthetic(synth_spec(raw)?),
            (false, true) => {
                let need = |k: &str| -> Result<PathBuf> {
                    raw.get(k)
                        .map(PathBuf::from)
                        .ok_or_else(|| CliError::Config(format!("missing required key {k}")))
                };
                DataSource::Files(DataPaths {
                    l_src: need("data.l_src")?,
                    u_parl: need("data.u_parl")?,
                    t_tgt: raw.get("data.t_tgt").map(PathBuf::from),
                    u_tgt: raw.get("data.u_tgt").map(PathBuf::from),
                    embeddings_src: raw.get("data.embeddings_src").map(PathBuf::from),
                    embeddings_tgt: raw.get("data.embeddings_tgt").map(PathBuf::from),
                })
            }
            (true, true) => {
                return Err(CliError::Config(
                    "exactly one of [synth] and [data] may be present, found both".into(),
                ))
            }
            (false, false) => {
                return Err(CliError::Config(
                    "exactly one of [synth] and [data] must be present, found neither".into(),
                ))
            }
        };

        let model = ModelConfig {
            embedding_dim: get_or(raw, "model.embedding_dim", 32)?,
            window_sizes: get_list(raw, "model.window_sizes")?.unwrap_or_else(|| vec![3, 4, 5]),
            filters_per_window: get_or(raw, "model.filters_per_window", 100)?,
            max_len: get_or(raw, "model.max_len", 64)?,
            num_classes: match &source {
                DataSource::Synthetic(spec) => spec.num_classes,
                DataSource::Files(_) => 2,
            },
        };
        model.validate().map_err(CliError::Core)?;

        let step1 = TrainConfig {
            temperature: 1.0,
            ..step_train_config(raw, "step1", seed)?
        };
        let step2 = step_train_config(raw, "step2", seed)?;
        let temperatures = get_list::<f64>(raw, "step2.temperatures")?;
        if let Some(ts) = &temperatures {
            for &t in ts {
                if !(t > 0.0) {
                    return Err(CliError::Config(format!(
                        "step2.temperatures: temperature {t} must be positive"
                    )));
                }
            }
        }
        if !(step2.temperature > 0.0) {
            return Err(CliError::Config(
                "step2.temperature must be positive".into(),
            ));
        }

        let finetune = FinetuneKeys {
            labels: raw
                .get("finetune.labels")
                .unwrap_or("labeled_tgt.tsv")
                .to_string(),
            budget: match raw.get("finetune.budget") {
                None | Some("") | Some("none") => None,
                Some(v) => Some(parse_as::<usize>("finetune.budget", v)?),
            },
            train: TrainConfig {
                temperature: 1.0,
                epochs: get_or(raw, "finetune.epochs", 5)?,
                batch_size: get_or(raw, "finetune.batch_size", 32)?,
                optimizer: OptimizerConfig {
                    learning_rate: get_or(
                        raw,
                        "finetune.lr",
                        OptimizerConfig::default().learning_rate,
                    )?,
                    ..OptimizerConfig::default()
                },
                adversarial: None,
                seed,
                patience: None,
                val_fraction: 0.0,
                dropout: 0.0,
                rescale_t2: false,
            },
        };

        let eval = EvalKeys {
            checkpoints: raw
                .get("eval.checkpoint")
                .unwrap_or("theta_tgt.json")
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            data: raw.get("eval.data").unwrap_or("t_tgt.tsv").to_string(),
        };

        let project = ProjectKeys {
            checkpoint: raw
                .get("project.checkpoint")
                .unwrap_or("theta_src.json")
                .to_string(),
            split_a: raw.get("project.split_a").unwrap_or("l_src.tsv").to_string(),
            split_a_kind: SplitKind::parse(
                "project.split_a_kind",
                raw.get("project.split_a_kind").unwrap_or("labeled"),
            )?,
            split_b: raw
                .get("project.split_b")
                .unwrap_or("u_parl.tsv")
                .to_string(),
            split_b_kind: SplitKind::parse(
                "project.split_b_kind",
                raw.get("project.split_b_kind").unwrap_or("parallel_src"),
            )?,
        };

        Ok(ExperimentConfig {
            seed,
            out,
            source,
            model,
            min_count: get_or(raw, "model.min_count", 1)?,
            max_vocab: get_or(raw, "model.max_vocab", 50_000)?,
            step1,
            step2,
            temperatures,
            finetune,
            eval,
            project,
            raw: raw.values.clone(),
        })
    }

    /// Resolves a path relative to the run's output directory unless it is
    /// absolute.
    pub fn out_path(&self, name: &str) -> PathBuf {
        let p = Path::new(name);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.out.join(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_comments_and_overrides() {
        let text = "# demo\n[run]\nseed = 7\nout = somewhere\n\n[synth]\nvocab_size = 123\n";
        let mut raw = RawConfig::parse(text, "test").unwrap();
        raw.set("synth.n_labeled=99").unwrap();
        let cfg = ExperimentConfig::resolve(&raw).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.out, PathBuf::from("somewhere"));
        match &cfg.source {
            DataSource::Synthetic(spec) => {
                assert_eq!(spec.vocab_size, 123);
                assert_eq!(spec.n_labeled, 99);
            }
            _ => panic!("expected synthetic source"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let raw = RawConfig::parse("[synth]\nvocap_size = 1\n", "t").unwrap();
        let err = ExperimentConfig::resolve(&raw).unwrap_err();
        assert!(err.to_string().contains("vocap_size"), "{err}");
        assert_eq!(err.exit_code(), 1);

        let raw = RawConfig::parse("[synth]\nvocab_size = many\n", "t").unwrap();
        assert!(ExperimentConfig::resolve(&raw).is_err());

        let raw = RawConfig::parse("key = 1\n", "t");
        assert!(raw.is_err(), "key outside section must fail");
    }

    #[test]
    fn requires_exactly_one_source() {
        let raw = RawConfig::parse("[run]\nseed = 1\n", "t").unwrap();
        let err = ExperimentConfig::resolve(&raw).unwrap_err();
        assert!(err.to_string().contains("neither"), "{err}");

        let both = "[synth]\nvocab_size = 10\n[data]\nl_src = a.tsv\nu_parl = b.tsv\n";
        let raw = RawConfig::parse(both, "t").unwrap();
        let err = ExperimentConfig::resolve(&raw).unwrap_err();
        assert!(err.to_string().contains("both"), "{err}");
    }

    #[test]
    fn step_sections_control_adversarial_setup() {
        let text = "[synth]\nvocab_size = 60\nsignal_tokens_per_class = 5\n\
                    [step1]\nadapt = true\nalpha = 0.5\nramp = sigmoid\n\
                    [step2]\ntemperature = 3\ntemperatures = 1,3,5,10\n";
        let raw = RawConfig::parse(text, "t").unwrap();
        let cfg = ExperimentConfig::resolve(&raw).unwrap();
        let adv = cfg.step1.adversarial.as_ref().unwrap();
        assert_eq!(adv.alpha, 0.5);
        assert_eq!(adv.ramp, RampSchedule::Sigmoid);
        assert_eq!(cfg.step1.temperature, 1.0);
        assert_eq!(cfg.step2.temperature, 3.0);
        assert_eq!(cfg.temperatures, Some(vec![1.0, 3.0, 5.0, 10.0]));
        assert!(cfg.step2.adversarial.is_none());
    }
}
