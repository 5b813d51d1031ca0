//! Preference dataset construction.
//!
//! For every design and pair index, two candidates are sampled from a teacher
//! at two different temperatures. Each is decoded (the stand-in for a
//! compile/lint check), valid candidates are simulated once, and the one with
//! the higher averaged coverage becomes `chosen`. An invalid candidate scores
//! 0. Pairs where both candidates are invalid, or where scores tie, are
//! dropped.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{validate_and_decode, Token, TokenSeq, Vocab};
use crate::corpus::Design;
use crate::hdl::LintIssue;
use crate::policy::{sample_sequence, PolicyError, StepModel, TabularPolicy};
use crate::rng;
use crate::sim::{CoverageCounts, SimError, Simulator};
use crate::trainer::PreferencePair;

pub const DATASET_VERSION: &str = "pairanet_mini/1";

#[derive(Debug, thiserror::Error)]
pub enum CurationError {
    #[error("designs with lint issues: {}", .0.iter().map(|(n, i)| format!("{n} ({} issues)", i.len())).collect::<Vec<_>>().join(", "))]
    LintIssues(Vec<(String, Vec<LintIssue>)>),
    #[error("invalid curation config field `{field}`: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },
    #[error("dataset line {line}: {message}")]
    BadRecord { line: usize, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Candidate generator used for curation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherSpec {
    Uniform,
    Novelty,
    Checkpoint(PathBuf),
}

impl TeacherSpec {
    pub fn label(&self) -> &'static str {
        match self {
            TeacherSpec::Uniform => "uniform",
            TeacherSpec::Novelty => "novelty",
            TeacherSpec::Checkpoint(_) => "checkpoint",
        }
    }

    pub fn build(&self, vocab: Vocab, k: usize, t_max: usize) -> Result<Teacher, CurationError> {
        Ok(match self {
            TeacherSpec::Uniform => Teacher::Tabular(TabularPolicy::new(vocab, k, t_max)),
            TeacherSpec::Novelty => Teacher::Novelty(NoveltyTeacher { vocab, t_max }),
            TeacherSpec::Checkpoint(path) => Teacher::Tabular(TabularPolicy::load(path)?),
        })
    }
}

/// Zero logits, minus [`NoveltyTeacher::REPEAT_PENALTY`] on every value token
/// already emitted and minus [`NoveltyTeacher::EARLY_EOS_PENALTY`] on EOS
/// until two value tokens are out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoveltyTeacher {
    pub vocab: Vocab,
    pub t_max: usize,
}

impl NoveltyTeacher {
    pub const REPEAT_PENALTY: f64 = 2.0;
    pub const EARLY_EOS_PENALTY: f64 = 1.0;
}

impl StepModel for NoveltyTeacher {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn t_max(&self) -> usize {
        self.t_max
    }

    fn step_logits(&self, _dut: &str, prefix: &[Token]) -> Cow<'_, [f64]> {
        let mut logits = vec![0.0; self.vocab.size()];
        let mut emitted = 0;
        for &t in prefix.iter().skip(1) {
            if self.vocab.is_value(t) {
                logits[t as usize] = -Self::REPEAT_PENALTY;
                emitted += 1;
            }
        }
        if emitted < 2 {
            logits[self.vocab.eos() as usize] = -Self::EARLY_EOS_PENALTY;
        }
        Cow::Owned(logits)
    }
}

#[derive(Debug, Clone)]
pub enum Teacher {
    Tabular(TabularPolicy),
    Novelty(NoveltyTeacher),
}

impl StepModel for Teacher {
    fn vocab(&self) -> Vocab {
        match self {
            Teacher::Tabular(p) => p.vocab(),
            Teacher::Novelty(n) => n.vocab(),
        }
    }

    fn t_max(&self) -> usize {
        match self {
            Teacher::Tabular(p) => p.t_max(),
            Teacher::Novelty(n) => n.t_max(),
        }
    }

    fn step_logits(&self, dut: &str, prefix: &[Token]) -> Cow<'_, [f64]> {
        match self {
            Teacher::Tabular(p) => p.step_logits(dut, prefix),
            Teacher::Novelty(n) => n.step_logits(dut, prefix),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurationConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub pairs_per_dut: usize,
    pub teacher: TeacherSpec,
    pub seed: u64,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            tau1: 0.7,
            tau2: 1.2,
            pairs_per_dut: 200,
            teacher: TeacherSpec::Novelty,
            seed: 42,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<(), CurationError> {
        let bad = |field, message: &str| {
            Err(CurationError::InvalidConfig {
                field,
                message: message.to_string(),
            })
        };
        for (field, tau) in [("tau1", self.tau1), ("tau2", self.tau2)] {
            if !(tau > 0.0 && tau.is_finite()) {
                return bad(field, "temperature must be positive");
            }
        }
        if self.tau1 == self.tau2 {
            return bad("tau2", "must differ from tau1");
        }
        if self.pairs_per_dut == 0 {
            return bad("pairs_per_dut", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    BothInvalid,
    Tie,
}

/// One scored candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tokens: TokenSeq,
    pub temperature: f64,
    /// `None` when the sequence does not decode for the design.
    pub coverage: Option<CoverageCounts>,
}

impl Candidate {
    pub fn score(&self) -> f64 {
        self.coverage.map_or(0.0, |c| c.average())
    }

    fn cmp_score(&self, other: &Candidate) -> Ordering {
        let zero = CoverageCounts::default();
        self.coverage
            .as_ref()
            .unwrap_or(&zero)
            .cmp_average(other.coverage.as_ref().unwrap_or(&zero))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub chosen: Candidate,
    pub rejected: Candidate,
}

/// A design prepared for repeated scoring.
#[derive(Debug, Clone)]
pub struct PreparedDesign<'a> {
    pub design: &'a Design,
    pub sim: Simulator,
}

impl<'a> PreparedDesign<'a> {
    pub fn new(design: &'a Design) -> Result<Self, SimError> {
        Ok(Self {
            design,
            sim: Simulator::new(&design.model)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairAttempt {
    pub outcome: Result<LabeledPair, DropReason>,
    /// Simulator invocations spent on this attempt.
    pub simulations: usize,
}

/// Generates, checks, scores and labels one candidate pair.
pub fn make_pair<M: StepModel + ?Sized>(
    design: &PreparedDesign<'_>,
    teacher: &M,
    tau1: f64,
    tau2: f64,
    rng: &mut impl Rng,
) -> Result<PairAttempt, CurationError> {
    let dut = design.design.name();
    let vocab = teacher.vocab();
    let t_max = teacher.t_max();
    let mut simulations = 0;
    let mut candidate = |tau: f64| -> Result<Candidate, CurationError> {
        let tokens = sample_sequence(teacher, dut, tau, rng)?;
        let coverage = match validate_and_decode(&design.design.model, &vocab, &tokens, t_max) {
            Ok(stim) => {
                simulations += 1;
                Some(design.sim.run(&stim)?.counts())
            }
            Err(_) => None,
        };
        Ok(Candidate {
            tokens,
            temperature: tau,
            coverage,
        })
    };
    let a = candidate(tau1)?;
    let b = candidate(tau2)?;
    Ok(PairAttempt {
        outcome: label(a, b),
        simulations,
    })
}

/// Orders two scored candidates; the higher average coverage is chosen.
pub fn label(a: Candidate, b: Candidate) -> Result<LabeledPair, DropReason> {
    if a.coverage.is_none() && b.coverage.is_none() {
        return Err(DropReason::BothInvalid);
    }
    match a.cmp_score(&b) {
        Ordering::Equal => Err(DropReason::Tie),
        Ordering::Greater => Ok(LabeledPair {
            chosen: a,
            rejected: b,
        }),
        Ordering::Less => Ok(LabeledPair {
            chosen: b,
            rejected: a,
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub temp_chosen: f64,
    pub temp_rejected: f64,
    /// Seed of the random stream that generated this pair.
    pub seed: u64,
    pub teacher: String,
}

/// One dataset line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub version: String,
    pub id: String,
    pub dut: String,
    pub prompt: String,
    pub chosen: TokenSeq,
    pub rejected: TokenSeq,
    pub chosen_score: f64,
    pub rejected_score: f64,
    pub chosen_cov: CoverageCounts,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected_cov: Option<CoverageCounts>,
    pub meta: RecordMeta,
}

impl PairRecord {
    pub fn to_preference_pair(&self) -> PreferencePair {
        PreferencePair {
            dut_id: self.dut.clone(),
            prompt: self.prompt.clone(),
            chosen: self.chosen.clone(),
            rejected: self.rejected.clone(),
            s_p: self.chosen_score,
            s_np: self.rejected_score,
        }
    }
}

/// Histogram bins over the score gap, each 0.1 wide; the last one is closed.
pub const GAP_BINS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationStats {
    pub attempts: usize,
    pub kept: usize,
    pub dropped_both_invalid: usize,
    pub dropped_tie: usize,
    pub invalid_candidates: usize,
    pub simulations: usize,
    pub gap_histogram: [usize; GAP_BINS],
}

impl CurationStats {
    fn record(&mut self, attempt: &PairAttempt) {
        self.attempts += 1;
        self.simulations += attempt.simulations;
        self.invalid_candidates += 2 - attempt.simulations;
        match &attempt.outcome {
            Ok(pair) => {
                self.kept += 1;
                let gap = pair.chosen.score() - pair.rejected.score();
                let bin = ((gap * GAP_BINS as f64) as usize).min(GAP_BINS - 1);
                self.gap_histogram[bin] += 1;
            }
            Err(DropReason::BothInvalid) => self.dropped_both_invalid += 1,
            Err(DropReason::Tie) => self.dropped_tie += 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurationOutput {
    pub records: Vec<PairRecord>,
    pub stats: CurationStats,
}

/// Builds the dataset in memory. Records are ordered by `(design, pair index)`
/// and each pair draws from its own stream, so output does not depend on
/// scheduling.
pub fn curate_records<M: StepModel + Sync + ?Sized>(
    corpus: &[Design],
    config: &CurationConfig,
    teacher: &M,
    teacher_label: &str,
) -> Result<CurationOutput, CurationError> {
    config.validate()?;
    let offenders: Vec<(String, Vec<LintIssue>)> = corpus
        .iter()
        .map(|d| (d.name().to_string(), crate::hdl::lint(&d.model)))
        .filter(|(_, issues)| !issues.is_empty())
        .collect();
    if !offenders.is_empty() {
        return Err(CurationError::LintIssues(offenders));
    }
    let prepared = corpus
        .iter()
        .map(PreparedDesign::new)
        .collect::<Result<Vec<_>, _>>()?;

    let n = config.pairs_per_dut;
    let attempts = crate::par::map_range(corpus.len() * n, |task| {
        let (d, i) = (task / n, task % n);
        let seed = rng::derive_seed(config.seed, &[d as u64, i as u64]);
        let mut stream = rng::stream(seed, &[]);
        make_pair(&prepared[d], teacher, config.tau1, config.tau2, &mut stream)
            .map(|attempt| (d, i, seed, attempt))
    });

    let mut stats = CurationStats::default();
    let mut records = Vec::new();
    for attempt in attempts {
        let (d, i, seed, attempt) = attempt?;
        stats.record(&attempt);
        if let Ok(pair) = attempt.outcome {
            let design = &corpus[d];
            records.push(PairRecord {
                version: DATASET_VERSION.to_string(),
                id: format!("{}-{:05}", design.name(), i),
                dut: design.name().to_string(),
                prompt: design.source.clone(),
                chosen_score: pair.chosen.score(),
                rejected_score: pair.rejected.score(),
                chosen_cov: pair
                    .chosen
                    .coverage
                    .expect("chosen candidate is always valid"),
                rejected_cov: pair.rejected.coverage,
                meta: RecordMeta {
                    temp_chosen: pair.chosen.temperature,
                    temp_rejected: pair.rejected.temperature,
                    seed,
                    teacher: teacher_label.to_string(),
                },
                chosen: pair.chosen.tokens,
                rejected: pair.rejected.tokens,
            });
        }
    }
    Ok(CurationOutput { records, stats })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CurationError + '_ {
    move |source| CurationError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes records as JSON Lines.
pub fn to_jsonl(records: &[PairRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(path: &Path, records: &[PairRecord]) -> Result<(), CurationError> {
    let mut file = std::fs::File::create(path).map_err(io_err(path))?;
    file.write_all(to_jsonl(records).as_bytes())
        .map_err(io_err(path))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<PairRecord>, CurationError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PairRecord =
            serde_json::from_str(&line).map_err(|e| CurationError::BadRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
        if record.version != DATASET_VERSION {
            return Err(CurationError::BadRecord {
                line: i + 1,
                message: format!("unsupported version `{}`", record.version),
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Builds the teacher from `config`, curates, and writes the dataset to `out`.
pub fn curate(
    corpus: &[Design],
    config: &CurationConfig,
    vocab: Vocab,
    k: usize,
    t_max: usize,
    out: &Path,
) -> Result<CurationOutput, CurationError> {
    let teacher = config.teacher.build(vocab, k, t_max)?;
    let output = curate_records(corpus, config, &teacher, config.teacher.label())?;
    write_jsonl(out, &output.records)?;
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{self, Design};
    use crate::sim::Counter;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn candidate(valid_score: Option<(usize, usize)>) -> Candidate {
        Candidate {
            tokens: TokenSeq(vec![16, 0, 17]),
            temperature: 1.0,
            coverage: valid_score.map(|(c, t)| CoverageCounts {
                statement: Counter::new(c, t),
                ..CoverageCounts::default()
            }),
        }
    }

    #[test]
    fn higher_score_is_chosen() {
        let a = candidate(Some((7, 10)));
        let b = candidate(Some((4, 10)));
        let pair = label(a.clone(), b.clone()).unwrap();
        assert_eq!((pair.chosen, pair.rejected), (a.clone(), b.clone()));
        let pair = label(b.clone(), a.clone()).unwrap();
        assert_eq!((pair.chosen, pair.rejected), (a, b));
    }

    #[test]
    fn invalid_candidate_is_rejected_with_zero() {
        let a = candidate(None);
        let b = candidate(Some((55, 100)));
        let pair = label(a, b.clone()).unwrap();
        assert_eq!(pair.chosen, b);
        assert_eq!(pair.rejected.score(), 0.0);
        assert!(pair.rejected.coverage.is_none());
    }

    #[test]
    fn drop_rules() {
        assert_eq!(
            label(candidate(None), candidate(None)),
            Err(DropReason::BothInvalid)
        );
        assert_eq!(
            label(candidate(Some((1, 2))), candidate(Some((2, 4)))),
            Err(DropReason::Tie)
        );
    }

    #[test]
    fn novelty_penalties() {
        let t = NoveltyTeacher {
            vocab: Vocab::default(),
            t_max: 8,
        };
        let l = t.step_logits("d", &[16]);
        assert_eq!(l[17], -1.0);
        assert!(l[..16].iter().all(|&x| x == 0.0));
        let l = t.step_logits("d", &[16, 3, 5]);
        assert_eq!((l[3], l[5], l[17], l[4]), (-2.0, -2.0, 0.0, 0.0));
    }

    #[test]
    fn make_pair_counts_simulations() {
        let design = Design::parse(corpus::ALU2).unwrap();
        let prepared = PreparedDesign::new(&design).unwrap();
        let teacher = TabularPolicy::new(Vocab::default(), 2, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let attempt = make_pair(&prepared, &teacher, 0.7, 1.2, &mut rng).unwrap();
            let valid = match &attempt.outcome {
                Ok(p) => {
                    usize::from(p.chosen.coverage.is_some())
                        + usize::from(p.rejected.coverage.is_some())
                }
                Err(DropReason::BothInvalid) => 0,
                Err(DropReason::Tie) => attempt.simulations,
            };
            assert_eq!(attempt.simulations, valid);
        }
    }

    #[test]
    fn config_validation() {
        let cfg = CurationConfig {
            tau2: 0.7,
            ..CurationConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(CurationError::InvalidConfig { field: "tau2", .. })
        ));
    }

    #[test]
    fn lint_dirty_corpus_names_offender() {
        let bad = Design::parse("module bad (input a[1], output y[1]); endmodule").unwrap();
        let teacher = TabularPolicy::new(Vocab::default(), 2, 8);
        let err =
            curate_records(&[bad], &CurationConfig::default(), &teacher, "uniform").unwrap_err();
        assert!(err.to_string().contains("bad"));
    }

    #[test]
    fn teacher_spec_serde() {
        let spec: TeacherSpec = serde_json::from_str(r#"{"checkpoint":"p.json"}"#).unwrap();
        assert_eq!(spec, TeacherSpec::Checkpoint("p.json".into()));
        let spec: TeacherSpec = serde_json::from_str(r#""novelty""#).unwrap();
        assert_eq!(spec, TeacherSpec::Novelty);
    }
}
