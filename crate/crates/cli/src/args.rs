use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use covpref::curation::TeacherSpec;
use covpref::trainer::{GapVariant, RefSource, TrainMode};
use serde::de::DeserializeOwned;

use crate::config::ExperimentConfig;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "covpref",
    version,
    about = "Coverage-weighted preference training for stimulus generators"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and lint a design; exit 0 iff clean.
    Lint { file: PathBuf },
    /// Run one simulation and print the coverage report as JSON.
    Simulate {
        /// Design file, or the name of a bundled design.
        design: PathBuf,
        /// Value tokens (`1,0,3`) or named cycles (`a=1,b=0;a=0,b=1`).
        #[arg(long)]
        stim: String,
        #[arg(long, default_value_t = 4)]
        wmax: u32,
        #[arg(long, default_value_t = 8)]
        t_max: usize,
        /// Include a per-cycle signal trace.
        #[arg(long)]
        trace: bool,
    },
    /// Build the preference dataset.
    Curate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pairs_per_dut: Option<usize>,
        /// `uniform`, `novelty`, or a checkpoint path.
        #[arg(long)]
        teacher: Option<String>,
        #[arg(long)]
        tau1: Option<f64>,
        #[arg(long)]
        tau2: Option<f64>,
    },
    /// Train one policy on the dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        /// Start from this checkpoint instead of the untrained policy.
        #[arg(long)]
        init: Option<PathBuf>,
        /// Checkpoint output; `<report_dir>/policy_<mode>.json` by default.
        #[arg(long)]
        out: Option<PathBuf>,
        /// History output; `<report_dir>/history_<mode>.json` by default.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Evaluate a checkpoint (or the untrained policy) on the corpus.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        tau: Option<f64>,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train SFT, DPO and CD-DPO and compare them with the untrained policy.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Curate, train every mode and ablate, writing all artifacts.
    Demo {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON); the shipped default when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub corpus_dir: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    /// `sft`, `dpo` or `cddpo`.
    #[arg(long, value_parser = snake_case::<TrainMode>)]
    pub mode: Option<TrainMode>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// `identity_clamp` or `dataset_minmax`.
    #[arg(long, value_parser = snake_case::<GapVariant>)]
    pub f_variant: Option<GapVariant>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// `initial_policy` or `post_sft_policy`.
    #[arg(long, value_parser = snake_case::<RefSource>)]
    pub ref_source: Option<RefSource>,
}

fn snake_case<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl Common {
    /// Loads the config and applies the flag overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = ExperimentConfig::load_or_default(self.config.as_deref())?;
        set(&mut config.paths.report_dir, self.report_dir.clone());
        if self.dataset.is_some() {
            config.paths.dataset = self.dataset.clone();
        }
        if self.corpus_dir.is_some() {
            config.paths.corpus_dir = self.corpus_dir.clone();
        }
        if let Some(seed) = self.seed {
            config.set_seed(seed);
        }
        Ok(config)
    }
}

impl TrainFlags {
    pub fn apply(&self, config: &mut ExperimentConfig) {
        let t = &mut config.train;
        set(&mut t.mode, self.mode);
        set(&mut t.beta, self.beta);
        set(&mut t.f_variant, self.f_variant);
        set(&mut t.learning_rate, self.learning_rate);
        set(&mut t.epochs, self.epochs);
        set(&mut t.batch_size, self.batch_size);
        set(&mut t.ref_source, self.ref_source);
    }
}

pub fn parse_teacher(s: &str) -> TeacherSpec {
    match s {
        "uniform" => TeacherSpec::Uniform,
        "novelty" => TeacherSpec::Novelty,
        path => TeacherSpec::Checkpoint(PathBuf::from(path)),
    }
}
