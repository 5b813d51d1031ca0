//! Preference objectives and the optimization loop.
//!
//! The implicit reward of a sequence is `r(y) = log π(y) - log π_ref(y)`.
//! Standard DPO minimizes `-ln σ(β (r_w - r_l))`. The coverage-driven
//! variant replaces `β` per pair with `β* = β · f(s_p - s_np)`, so pairs with
//! a wide coverage gap pull harder. SFT maximizes the likelihood of chosen
//! sequences only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::TokenSeq;
use crate::policy::{PolicyError, ReferencePolicy, SparseGrad, TabularPolicy};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("batch is empty")]
    EmptyBatch,
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig {
        field: &'static str,
        message: String,
    },
    #[error("pair {index}: {message}")]
    InvalidPair { index: usize, message: String },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFinite { epoch: usize, batch: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// One `(prompt, chosen, rejected)` triple with the averaged coverage scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub dut_id: String,
    pub prompt: String,
    pub chosen: TokenSeq,
    pub rejected: TokenSeq,
    pub s_p: f64,
    pub s_np: f64,
}

impl PreferencePair {
    pub fn gap(&self) -> f64 {
        self.s_p - self.s_np
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Sft,
    Dpo,
    Cddpo,
}

impl TrainMode {
    pub const ALL: [TrainMode; 3] = [TrainMode::Sft, TrainMode::Dpo, TrainMode::Cddpo];

    pub fn as_str(self) -> &'static str {
        match self {
            TrainMode::Sft => "sft",
            TrainMode::Dpo => "dpo",
            TrainMode::Cddpo => "cddpo",
        }
    }
}

/// How the score gap `s_p - s_np` is mapped into `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapVariant {
    /// `f(d) = clamp(d, 0, 1)`.
    #[default]
    IdentityClamp,
    /// `f(d) = (d - d_min) / (d_max - d_min)` over the training set's gaps.
    DatasetMinmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefSource {
    #[default]
    InitialPolicy,
    PostSftPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub beta: f64,
    pub f_variant: GapVariant,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub ref_source: RefSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Cddpo,
            beta: 0.2,
            f_variant: GapVariant::IdentityClamp,
            learning_rate: 0.5,
            epochs: 30,
            batch_size: 16,
            seed: 42,
            ref_source: RefSource::InitialPolicy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field, message: &str| {
            Err(TrainError::InvalidConfig {
                field,
                message: message.to_string(),
            })
        };
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta", "must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        Ok(())
    }
}

/// `f` resolved against a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GapScale {
    IdentityClamp,
    MinMax { min: f64, max: f64 },
}

impl GapScale {
    pub fn fit(variant: GapVariant, pairs: &[PreferencePair]) -> Self {
        match variant {
            GapVariant::IdentityClamp => GapScale::IdentityClamp,
            GapVariant::DatasetMinmax => {
                let (min, max) = pairs
                    .iter()
                    .map(PreferencePair::gap)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                        (lo.min(d), hi.max(d))
                    });
                GapScale::MinMax { min, max }
            }
        }
    }

    pub fn apply(&self, gap: f64) -> f64 {
        match *self {
            GapScale::IdentityClamp => gap.clamp(0.0, 1.0),
            GapScale::MinMax { min, max } => {
                if max > min {
                    ((gap - min) / (max - min)).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub r_w: f64,
    pub r_l: f64,
    pub beta_star: f64,
    pub loss: f64,
    pub margin: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln σ(x)`, stable for large `|x|`.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log π_θ(y) - log π_ref(y)`.
pub fn implicit_reward(
    policy: &TabularPolicy,
    reference: &ReferencePolicy,
    dut: &str,
    seq: &TokenSeq,
) -> Result<f64, PolicyError> {
    Ok(policy.log_prob(dut, seq)?.total - reference.log_prob(dut, seq)?.total)
}

fn breakdown(r_w: f64, r_l: f64, beta_star: f64) -> LossBreakdown {
    let margin = beta_star * (r_w - r_l);
    LossBreakdown {
        r_w,
        r_l,
        beta_star,
        loss: neg_log_sigmoid(margin),
        margin,
    }
}

/// Preference loss with an explicit per-pair coefficient.
pub fn preference_loss(
    policy: &TabularPolicy,
    reference: &ReferencePolicy,
    pair: &PreferencePair,
    beta_star: f64,
) -> Result<LossBreakdown, PolicyError> {
    let r_w = implicit_reward(policy, reference, &pair.dut_id, &pair.chosen)?;
    let r_l = implicit_reward(policy, reference, &pair.dut_id, &pair.rejected)?;
    Ok(breakdown(r_w, r_l, beta_star))
}

pub fn dpo_loss(
    policy: &TabularPolicy,
    reference: &ReferencePolicy,
    pair: &PreferencePair,
    beta: f64,
) -> Result<LossBreakdown, PolicyError> {
    preference_loss(policy, reference, pair, beta)
}

pub fn cddpo_loss(
    policy: &TabularPolicy,
    reference: &ReferencePolicy,
    pair: &PreferencePair,
    beta: f64,
    scale: &GapScale,
) -> Result<LossBreakdown, PolicyError> {
    preference_loss(policy, reference, pair, beta * scale.apply(pair.gap()))
}

/// Loss gradient `-β* σ(β*(r_l - r_w)) (∇log π(y_w) - ∇log π(y_l))`.
pub fn pair_gradient(
    policy: &TabularPolicy,
    reference: &ReferencePolicy,
    pair: &PreferencePair,
    beta_star: f64,
) -> Result<SparseGrad, PolicyError> {
    let lb = preference_loss(policy, reference, pair, beta_star)?;
    gradient_from(policy, pair, &lb)
}

fn gradient_from(
    policy: &TabularPolicy,
    pair: &PreferencePair,
    lb: &LossBreakdown,
) -> Result<SparseGrad, PolicyError> {
    let weight = lb.beta_star * sigmoid(lb.beta_star * (lb.r_l - lb.r_w));
    let mut grad = SparseGrad::default();
    if weight == 0.0 {
        return Ok(grad);
    }
    grad.add_scaled(&policy.grad_log_prob(&pair.dut_id, &pair.chosen)?, -weight);
    grad.add_scaled(&policy.grad_log_prob(&pair.dut_id, &pair.rejected)?, weight);
    Ok(grad)
}

/// Mean negative log-likelihood of the chosen sequences.
pub fn sft_loss(policy: &TabularPolicy, batch: &[PreferencePair]) -> Result<f64, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut total = 0.0;
    for pair in batch {
        total -= policy.log_prob(&pair.dut_id, &pair.chosen)?.total;
    }
    Ok(total / batch.len() as f64)
}

pub fn sft_gradient(
    policy: &TabularPolicy,
    batch: &[PreferencePair],
) -> Result<SparseGrad, TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let mut grad = SparseGrad::default();
    let scale = -1.0 / batch.len() as f64;
    for pair in batch {
        grad.add_scaled(&policy.grad_log_prob(&pair.dut_id, &pair.chosen)?, scale);
    }
    Ok(grad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// L2 norm of the net parameter change over the epoch.
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub config: TrainConfig,
    pub epochs: Vec<EpochStats>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: TabularPolicy,
    pub history: TrainHistory,
}

fn check_pairs(dataset: &[PreferencePair], mode: TrainMode) -> Result<(), TrainError> {
    for (index, pair) in dataset.iter().enumerate() {
        let invalid = |message: String| Err(TrainError::InvalidPair { index, message });
        if mode != TrainMode::Sft
            && pair.s_p.partial_cmp(&pair.s_np) != Some(std::cmp::Ordering::Greater)
        {
            return invalid(format!("s_p {} must exceed s_np {}", pair.s_p, pair.s_np));
        }
        if !(0.0..=1.0).contains(&pair.s_p) || !(0.0..=1.0).contains(&pair.s_np) {
            return invalid("scores must lie in [0, 1]".to_string());
        }
    }
    Ok(())
}

/// Per-pair loss and gradient at the current parameters.
fn pair_terms(
    mode: TrainMode,
    policy: &TabularPolicy,
    ref_lp: &[(f64, f64)],
    pairs: &[(usize, &PreferencePair, f64)],
) -> Result<Vec<(f64, SparseGrad)>, PolicyError> {
    crate::par::map_slice(
        pairs,
        |&(i, pair, beta_star)| -> Result<(f64, SparseGrad), PolicyError> {
            if mode == TrainMode::Sft {
                let lp = policy.log_prob(&pair.dut_id, &pair.chosen)?.total;
                let mut g = policy.grad_log_prob(&pair.dut_id, &pair.chosen)?;
                g.scale(-1.0);
                return Ok((-lp, g));
            }
            let (ref_w, ref_l) = ref_lp[i];
            let r_w = policy.log_prob(&pair.dut_id, &pair.chosen)?.total - ref_w;
            let r_l = policy.log_prob(&pair.dut_id, &pair.rejected)?.total - ref_l;
            let lb = breakdown(r_w, r_l, beta_star);
            Ok((lb.loss, gradient_from(policy, pair, &lb)?))
        },
    )
    .into_iter()
    .collect()
}

fn optimize(
    dataset: &[PreferencePair],
    config: &TrainConfig,
    mut policy: TabularPolicy,
    reference: &ReferencePolicy,
) -> Result<TrainOutcome, TrainError> {
    let scale = GapScale::fit(config.f_variant, dataset);
    let beta_star: Vec<f64> = dataset
        .iter()
        .map(|p| match config.mode {
            TrainMode::Sft => 0.0,
            TrainMode::Dpo => config.beta,
            TrainMode::Cddpo => config.beta * scale.apply(p.gap()),
        })
        .collect();
    let ref_lp = dataset
        .iter()
        .map(|p| {
            Ok((
                reference.log_prob(&p.dut_id, &p.chosen)?.total,
                reference.log_prob(&p.dut_id, &p.rejected)?.total,
            ))
        })
        .collect::<Result<Vec<_>, PolicyError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut net_update = SparseGrad::default();
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let items: Vec<_> = chunk
                .iter()
                .map(|&i| (i, &dataset[i], beta_star[i]))
                .collect();
            let terms = pair_terms(config.mode, &policy, &ref_lp, &items)?;
            let mut grad = SparseGrad::default();
            let inv = 1.0 / chunk.len() as f64;
            for (loss, g) in &terms {
                if !loss.is_finite() || !g.all_finite() {
                    return Err(TrainError::NonFinite { epoch, batch });
                }
                loss_sum += loss;
                grad.add_scaled(g, inv);
            }
            policy.apply(&grad, -config.learning_rate);
            net_update.add_scaled(&grad, -config.learning_rate);
        }
        epochs.push(EpochStats {
            epoch,
            mean_loss: loss_sum / dataset.len() as f64,
            update_norm: net_update.norm(),
        });
    }
    Ok(TrainOutcome {
        policy,
        history: TrainHistory {
            config: config.clone(),
            epochs,
        },
    })
}

/// Trains from `init` with seeded shuffling and fixed-step mini-batch descent.
pub fn train(
    dataset: &[PreferencePair],
    config: &TrainConfig,
    init: &TabularPolicy,
) -> Result<TrainOutcome, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    config.validate()?;
    check_pairs(dataset, config.mode)?;
    let start = match (config.mode, config.ref_source) {
        (TrainMode::Sft, _) | (_, RefSource::InitialPolicy) => init.clone(),
        (_, RefSource::PostSftPolicy) => {
            let sft = TrainConfig {
                mode: TrainMode::Sft,
                ..config.clone()
            };
            optimize(dataset, &sft, init.clone(), &ReferencePolicy::freeze(init))?.policy
        }
    };
    let reference = ReferencePolicy::freeze(&start);
    optimize(dataset, config, start, &reference)
}
