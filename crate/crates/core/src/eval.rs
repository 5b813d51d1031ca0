//! Policy scoring over repeated generations and the four-way ablation.
//!
//! Each policy draws `n` sequences per design. A generation that fails to
//! decode counts as zero coverage rather than being resampled. Per metric the
//! report carries `mean` (the mean over generations) and `best` (the maximum).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::codec::validate_and_decode;
use crate::codec::TokenSeq;
use crate::corpus::Design;
use crate::policy::{sample_sequence, PolicyError, StepModel, TabularPolicy};
use crate::rng;
use crate::sim::{CoverageReport, SimError, Simulator};
use crate::trainer::{train, PreferencePair, TrainConfig, TrainError, TrainMode, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid evaluation config field `{field}`: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("training {mode}: {source}")]
    Train {
        mode: &'static str,
        source: TrainError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub n: usize,
    pub tau: f64,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n: 20,
            tau: 1.0,
            seed: 42,
        }
    }
}

impl EvalSettings {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.n == 0 {
            return Err(EvalError::InvalidConfig {
                field: "n",
                message: "must be at least 1".into(),
            });
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(EvalError::InvalidConfig {
                field: "tau",
                message: "temperature must be positive".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    pub valid: bool,
    pub tokens: TokenSeq,
    pub coverage: CoverageReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub best: f64,
}

impl Summary {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        let (mut sum, mut best, mut count) = (0.0, 0.0f64, 0usize);
        for v in values {
            sum += v;
            best = best.max(v);
            count += 1;
        }
        Self {
            mean: if count == 0 { 0.0 } else { sum / count as f64 },
            best,
        }
    }
}

pub const METRICS: [&str; 4] = ["statement", "branch", "functional", "average"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummaries {
    pub statement: Summary,
    pub branch: Summary,
    pub functional: Summary,
    pub average: Summary,
}

impl MetricSummaries {
    /// Summaries in [`METRICS`] order.
    pub fn in_order(&self) -> [Summary; 4] {
        [self.statement, self.branch, self.functional, self.average]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dut: String,
    pub n: usize,
    pub tau: f64,
    pub seed: u64,
    pub generations: Vec<Generation>,
    pub metrics: MetricSummaries,
}

impl EvalReport {
    /// Aggregates generations into per-metric mean and best.
    pub fn from_generations(
        dut: &str,
        settings: &EvalSettings,
        generations: Vec<Generation>,
    ) -> Self {
        let over =
            |f: fn(&CoverageReport) -> f64| Summary::of(generations.iter().map(|g| f(&g.coverage)));
        let metrics = MetricSummaries {
            statement: over(|c| c.statement.fraction()),
            branch: over(|c| c.branch.fraction()),
            functional: over(|c| c.functional.fraction()),
            average: over(|c| c.average),
        };
        Self {
            dut: dut.to_string(),
            n: settings.n,
            tau: settings.tau,
            seed: settings.seed,
            generations,
            metrics,
        }
    }

    pub fn valid_fraction(&self) -> f64 {
        self.generations.iter().filter(|g| g.valid).count() as f64
            / self.generations.len().max(1) as f64
    }
}

/// Draws `settings.n` generations for one design. Generation `i` uses the
/// stream derived from `(seed, i)`, so every policy sees the same randomness.
pub fn eval_policy<M: StepModel + Sync + ?Sized>(
    policy: &M,
    design: &Design,
    settings: &EvalSettings,
) -> Result<EvalReport, EvalError> {
    settings.validate()?;
    let sim = Simulator::new(&design.model)?;
    let vocab = policy.vocab();
    let t_max = policy.t_max();
    let dut = design.name();
    let generations = crate::par::map_range(settings.n, |i| -> Result<Generation, EvalError> {
        let mut stream = rng::stream(settings.seed, &[i as u64]);
        let tokens = sample_sequence(policy, dut, settings.tau, &mut stream)?;
        Ok(
            match validate_and_decode(&design.model, &vocab, &tokens, t_max) {
                Ok(stim) => Generation {
                    valid: true,
                    coverage: sim.run(&stim)?,
                    tokens,
                },
                Err(_) => Generation {
                    valid: false,
                    coverage: CoverageReport::zero(&design.model),
                    tokens,
                },
            },
        )
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalReport::from_generations(dut, settings, generations))
}

pub const POLICIES: [&str; 4] = ["vanilla", "sft", "dpo", "cddpo"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub policy: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub settings: EvalSettings,
    pub train: TrainConfig,
    pub dataset_pairs: usize,
    /// Ordered by policy, then by design.
    pub entries: Vec<AblationEntry>,
}

impl AblationTable {
    pub fn get(&self, policy: &str, dut: &str) -> Option<&EvalReport> {
        self.entries
            .iter()
            .find(|e| e.policy == policy && e.report.dut == dut)
            .map(|e| &e.report)
    }

    pub fn duts(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for e in &self.entries {
            if !out.contains(&e.report.dut.as_str()) {
                out.push(&e.report.dut);
            }
        }
        out
    }

    /// CSV with columns `policy,dut,metric,stat,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("policy,dut,metric,stat,value\n");
        for e in &self.entries {
            for (metric, summary) in METRICS.iter().zip(e.report.metrics.in_order()) {
                for (stat, value) in [("mean", summary.mean), ("best", summary.best)] {
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        e.policy, e.report.dut, metric, stat, value
                    )
                    .expect("writing to a string");
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub table: AblationTable,
    /// Trained SFT, DPO and CD-DPO outcomes, in that order.
    pub trained: Vec<(TrainMode, TrainOutcome)>,
}

fn eval_all<M: StepModel + Sync + ?Sized>(
    name: &str,
    policy: &M,
    corpus: &[Design],
    settings: &EvalSettings,
    entries: &mut Vec<AblationEntry>,
) -> Result<(), EvalError> {
    for design in corpus {
        entries.push(AblationEntry {
            policy: name.to_string(),
            report: eval_policy(policy, design, settings)?,
        });
    }
    Ok(())
}

/// Trains SFT, DPO and CD-DPO from `init` on the same pairs with the same
/// seed, then evaluates those and the untrained `init` identically.
pub fn ablate(
    corpus: &[Design],
    pairs: &[PreferencePair],
    base: &TrainConfig,
    init: &TabularPolicy,
    settings: &EvalSettings,
) -> Result<Ablation, EvalError> {
    settings.validate()?;
    let mut entries = Vec::with_capacity(4 * corpus.len());
    eval_all(POLICIES[0], init, corpus, settings, &mut entries)?;
    let mut trained = Vec::new();
    for mode in TrainMode::ALL {
        let config = TrainConfig {
            mode,
            ..base.clone()
        };
        let outcome = train(pairs, &config, init).map_err(|source| EvalError::Train {
            mode: mode.as_str(),
            source,
        })?;
        eval_all(
            mode.as_str(),
            &outcome.policy,
            corpus,
            settings,
            &mut entries,
        )?;
        trained.push((mode, outcome));
    }
    Ok(Ablation {
        table: AblationTable {
            settings: *settings,
            train: base.clone(),
            dataset_pairs: pairs.len(),
            entries,
        },
        trained,
    })
}
