use std::path::{Path, PathBuf};

use covpref::codec::{validate_and_decode, Token, TokenSeq, Vocab};
use covpref::corpus::{self, Design};
use covpref::curation::{self, CurationStats};
use covpref::eval::{self, AblationTable, EvalReport};
use covpref::hdl::{lint, parse};
use covpref::policy::{StepModel, TabularPolicy};
use covpref::sim::{Simulator, Stimulus};
use covpref::trainer::{self, PreferencePair, TrainHistory};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    std::fs::write(path, contents).map_err(CliError::io(path))
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    write(path, &to_json(value))
}

/// Parses a design file; if `arg` is not a file but names a bundled design,
/// that design is used.
pub fn load_design(arg: &Path) -> Result<Design, CliError> {
    if !arg.exists() {
        if let Some((_, src)) = corpus::BUNDLED.iter().find(|(n, _)| Path::new(n) == arg) {
            return Design::parse(src).map_err(CliError::domain);
        }
    }
    let source = read(arg)?;
    Design::parse(&source).map_err(|e| CliError::Domain(format!("{}:{e}", arg.display())))
}

/// Loads every `.hdl` file in `dir`, ordered by file name.
pub fn load_corpus_dir(dir: &Path) -> Result<Vec<Design>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "hdl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Usage(format!("{}: no .hdl files", dir.display())));
    }
    files.iter().map(|f| load_design(f)).collect()
}

pub fn load_corpus(config: &ExperimentConfig) -> Result<Vec<Design>, CliError> {
    match &config.paths.corpus_dir {
        Some(dir) => load_corpus_dir(dir),
        None => Ok(corpus::bundled()),
    }
}

fn load_policy(path: &Path, config: &ExperimentConfig) -> Result<TabularPolicy, CliError> {
    let policy = TabularPolicy::from_json(&read(path)?)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    let v = &config.vocab;
    if policy.vocab() != v.vocab() || policy.k() != v.k || policy.t_max() != v.t_max {
        return Err(CliError::Domain(format!(
            "{}: checkpoint vocabulary/context/length do not match the config",
            path.display()
        )));
    }
    Ok(policy)
}

fn initial_policy(config: &ExperimentConfig) -> TabularPolicy {
    TabularPolicy::new(config.vocab.vocab(), config.vocab.k, config.vocab.t_max)
}

/// `lint`: the returned lines are the issues, empty when clean.
pub fn lint_file(path: &Path) -> Result<Vec<String>, CliError> {
    let source = read(path)?;
    let model = parse(&source).map_err(|e| CliError::Domain(format!("{}:{e}", path.display())))?;
    Ok(lint(&model)
        .iter()
        .map(|i| format!("{}:{}", path.display(), i))
        .collect())
}

/// Parses `--stim`: either value tokens (`1,0,3`) or named cycles
/// (`a=1,b=0;a=0,b=1`).
pub fn parse_stimulus(
    design: &Design,
    vocab: &Vocab,
    t_max: usize,
    text: &str,
) -> Result<Stimulus, CliError> {
    let text = text.trim();
    if text.contains('=') {
        let cycles = text
            .split(';')
            .map(|cycle| {
                cycle
                    .split(',')
                    .filter(|a| !a.trim().is_empty())
                    .map(|a| {
                        let (name, value) = a.split_once('=').ok_or_else(|| {
                            CliError::Usage(format!("expected name=value, got `{a}`"))
                        })?;
                        let value = parse_u64(value.trim())?;
                        Ok((name.trim().to_string(), value))
                    })
                    .collect::<Result<Vec<_>, CliError>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Stimulus::from_named(&design.model, &cycles).map_err(CliError::domain)
    } else {
        let values = text
            .split(',')
            .filter(|t| !t.trim().is_empty())
            .map(|t| {
                t.trim()
                    .parse::<Token>()
                    .map_err(|_| CliError::Usage(format!("bad token `{t}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let seq = TokenSeq::from_values(vocab, &values);
        validate_and_decode(&design.model, vocab, &seq, t_max)
            .map_err(|e| CliError::Domain(format!("codec error: {e}")))
    }
}

fn parse_u64(s: &str) -> Result<u64, CliError> {
    let parsed = match s.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|_| CliError::Usage(format!("bad value `{s}`")))
}

#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    #[serde(flatten)]
    pub report: covpref::sim::CoverageReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<String>>,
}

pub fn simulate(
    design: &Design,
    vocab: &Vocab,
    t_max: usize,
    stim: &str,
    trace: bool,
) -> Result<String, CliError> {
    let stimulus = parse_stimulus(design, vocab, t_max, stim)?;
    let sim = Simulator::new(&design.model).map_err(CliError::domain)?;
    let (report, lines) = sim.run_traced(&stimulus).map_err(CliError::domain)?;
    Ok(to_json(&SimulateOutput {
        report,
        trace: trace.then_some(lines),
    }))
}

pub fn curate(config: &ExperimentConfig) -> Result<CurationStats, CliError> {
    let corpus = load_corpus(config)?;
    let v = &config.vocab;
    let out = config.dataset_path();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    let output = curation::curate(&corpus, &config.curation, v.vocab(), v.k, v.t_max, &out)?;
    write_json(
        &config.paths.report_dir.join("curation_stats.json"),
        &output.stats,
    )?;
    Ok(output.stats)
}

fn load_pairs(path: &Path) -> Result<Vec<PreferencePair>, CliError> {
    if !path.is_file() {
        return Err(CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
        });
    }
    let records = curation::read_jsonl(path)?;
    Ok(records.iter().map(|r| r.to_preference_pair()).collect())
}

/// `train`: trains `config.train.mode` from the initial (or given) policy and
/// writes the checkpoint and history.
pub fn train(
    config: &ExperimentConfig,
    init: Option<&Path>,
    out: Option<&Path>,
    history: Option<&Path>,
) -> Result<TrainHistory, CliError> {
    let pairs = load_pairs(&config.dataset_path())?;
    let start = match init {
        Some(p) => load_policy(p, config)?,
        None => initial_policy(config),
    };
    let outcome = trainer::train(&pairs, &config.train, &start)?;
    let mode = config.train.mode;
    let ckpt = out.map_or_else(|| config.checkpoint_path(mode), Path::to_path_buf);
    let hist = history.map_or_else(|| config.history_path(mode), Path::to_path_buf);
    write(&ckpt, &outcome.policy.to_json()?)?;
    write_json(&hist, &outcome.history)?;
    Ok(outcome.history)
}

/// `eval`: scores a checkpoint (or the untrained policy) on the corpus.
pub fn evaluate(
    config: &ExperimentConfig,
    checkpoint: Option<&Path>,
) -> Result<Vec<EvalReport>, CliError> {
    let corpus = load_corpus(config)?;
    let policy = match checkpoint {
        Some(p) => load_policy(p, config)?,
        None => initial_policy(config),
    };
    corpus
        .iter()
        .map(|d| eval::eval_policy(&policy, d, &config.eval).map_err(CliError::from))
        .collect()
}

/// `ablate`: trains all three modes on the dataset, evaluates them with the
/// untrained policy, and writes checkpoints, histories and the table.
pub fn ablate(config: &ExperimentConfig) -> Result<AblationTable, CliError> {
    let corpus = load_corpus(config)?;
    let pairs = load_pairs(&config.dataset_path())?;
    let result = eval::ablate(
        &corpus,
        &pairs,
        &config.train,
        &initial_policy(config),
        &config.eval,
    )?;
    for (mode, outcome) in &result.trained {
        write(&config.checkpoint_path(*mode), &outcome.policy.to_json()?)?;
        write_json(&config.history_path(*mode), &outcome.history)?;
    }
    let dir = &config.paths.report_dir;
    write(&dir.join("ablation.csv"), &result.table.to_csv())?;
    write(&dir.join("ablation.json"), &(result.table.to_json() + "\n"))?;
    Ok(result.table)
}

/// Files `demo` writes under the report directory.
pub const DEMO_ARTIFACTS: &[&str] = &[
    "config.json",
    "dataset.jsonl",
    "curation_stats.json",
    "policy_sft.json",
    "policy_dpo.json",
    "policy_cddpo.json",
    "history_sft.json",
    "history_dpo.json",
    "history_cddpo.json",
    "ablation.csv",
    "ablation.json",
];

#[derive(Debug)]
pub struct DemoOutput {
    pub stats: CurationStats,
    pub table: AblationTable,
}

/// `demo`: curate, then ablate, with every artifact in the report directory.
pub fn demo(config: &ExperimentConfig) -> Result<DemoOutput, CliError> {
    let mut config = config.clone();
    config.paths.dataset = Some(config.paths.report_dir.join("dataset.jsonl"));
    write_json(&config.paths.report_dir.join("config.json"), &config)?;
    let stats = curate(&config)?;
    let table = ablate(&config)?;
    Ok(DemoOutput { stats, table })
}

/// One line per design comparing the four policies on average coverage.
pub fn summarize(table: &AblationTable) -> String {
    let mut out = String::from("dut         policy   mean@N  best@N\n");
    for dut in table.duts() {
        for policy in eval::POLICIES {
            if let Some(r) = table.get(policy, dut) {
                let m = r.metrics.average;
                out.push_str(&format!(
                    "{dut:<11} {policy:<8} {:.4}  {:.4}\n",
                    m.mean, m.best
                ));
            }
        }
    }
    out
}
