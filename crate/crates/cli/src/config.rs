//! Experiment configuration: one JSON document drives one experiment.

use std::path::{Path, PathBuf};

use covpref::codec::{Vocab, MAX_WMAX};
use covpref::curation::{CurationConfig, TeacherSpec};
use covpref::eval::EvalSettings;
use covpref::trainer::{TrainConfig, TrainMode};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// The configuration shipped with the tool and used by `demo` when no
/// `--config` is given.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    /// Directory of `.hdl` files; the bundled corpus when absent.
    pub corpus_dir: Option<PathBuf>,
    pub report_dir: PathBuf,
    /// Dataset file; `<report_dir>/dataset.jsonl` when absent.
    pub dataset: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            corpus_dir: None,
            report_dir: PathBuf::from("report"),
            dataset: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VocabConfig {
    pub wmax: u32,
    pub t_max: usize,
    pub k: usize,
}

impl Default for VocabConfig {
    fn default() -> Self {
        Self {
            wmax: 4,
            t_max: 8,
            k: 2,
        }
    }
}

impl VocabConfig {
    pub fn vocab(&self) -> Vocab {
        Vocab { wmax: self.wmax }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub vocab: VocabConfig,
    pub curation: CurationConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

fn field_error(prefix: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config {prefix}: {e}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// The shipped default, or the file at `path`.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            Some(p) => Self::load(p),
            None => Self::from_json(DEFAULT_CONFIG),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = &self.vocab;
        if !(1..=MAX_WMAX).contains(&v.wmax) {
            return Err(field_error(
                "vocab.wmax",
                format!("must be in 1..={MAX_WMAX}"),
            ));
        }
        if v.t_max == 0 {
            return Err(field_error("vocab.t_max", "must be at least 1"));
        }
        if v.k == 0 {
            return Err(field_error("vocab.k", "must be at least 1"));
        }
        self.curation
            .validate()
            .map_err(|e| field_error("curation", e))?;
        self.train.validate().map_err(|e| field_error("train", e))?;
        self.eval.validate().map_err(|e| field_error("eval", e))?;
        if let Some(dir) = &self.paths.corpus_dir {
            if !dir.is_dir() {
                return Err(field_error(
                    "paths.corpus_dir",
                    format!("`{}` is not a directory", dir.display()),
                ));
            }
        }
        if let TeacherSpec::Checkpoint(p) = &self.curation.teacher {
            if !p.is_file() {
                return Err(field_error(
                    "curation.teacher",
                    format!("checkpoint `{}` not found", p.display()),
                ));
            }
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.paths
            .dataset
            .clone()
            .unwrap_or_else(|| self.paths.report_dir.join("dataset.jsonl"))
    }

    pub fn checkpoint_path(&self, mode: TrainMode) -> PathBuf {
        self.paths
            .report_dir
            .join(format!("policy_{}.json", mode.as_str()))
    }

    pub fn history_path(&self, mode: TrainMode) -> PathBuf {
        self.paths
            .report_dir
            .join(format!("history_{}.json", mode.as_str()))
    }

    /// Sets every seed in the experiment.
    pub fn set_seed(&mut self, seed: u64) {
        self.curation.seed = seed;
        self.train.seed = seed;
        self.eval.seed = seed;
    }
}
