//! Autoregressive stimulus policies.
//!
//! [`TabularPolicy`] keeps one logit vector per `(design, k-token context)`.
//! Contexts absent from the table have all-zero logits. BOS is never
//! emitted, and once `t_max` value tokens have been produced the next token
//! is EOS with probability one, which keeps sampling and scoring consistent.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::{CodecError, Token, TokenSeq, Vocab};

pub const CHECKPOINT_FORMAT: &str = "covpref-policy/1";

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("malformed sequence: {0}")]
    Malformed(#[from] CodecError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Anything that produces next-token logits from a design id and the tokens
/// emitted so far (starting with BOS).
pub trait StepModel {
    fn vocab(&self) -> Vocab;
    fn t_max(&self) -> usize;
    fn step_logits(&self, dut: &str, prefix: &[Token]) -> Cow<'_, [f64]>;
}

fn check_tau(tau: f64) -> Result<(), PolicyError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(PolicyError::InvalidTemperature(tau))
    }
}

fn eos_point_mass(vocab: &Vocab) -> Vec<f64> {
    let mut p = vec![0.0; vocab.size()];
    p[vocab.eos() as usize] = 1.0;
    p
}

/// `softmax(logits / tau)` over every token except BOS, which gets 0.
pub fn emittable_softmax(vocab: &Vocab, logits: &[f64], tau: f64) -> Vec<f64> {
    let bos = vocab.bos() as usize;
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != bos)
        .map(|(_, &z)| z / tau)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(i, &z)| if i == bos { 0.0 } else { (z / tau - max).exp() })
        .collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    p
}

/// `ln softmax(logits)_token` at unit temperature over emittable tokens.
fn emittable_log_softmax(vocab: &Vocab, logits: &[f64], token: Token) -> f64 {
    let bos = vocab.bos() as usize;
    let max = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != bos)
        .map(|(_, &z)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != bos)
        .map(|(_, &z)| (z - max).exp())
        .sum();
    logits[token as usize] - max - sum.ln()
}

/// Next-token distribution given the prefix emitted so far.
pub fn next_distribution<M: StepModel + ?Sized>(
    model: &M,
    dut: &str,
    prefix: &[Token],
    tau: f64,
) -> Result<Vec<f64>, PolicyError> {
    check_tau(tau)?;
    let vocab = model.vocab();
    if prefix.len().saturating_sub(1) >= model.t_max() {
        return Ok(eos_point_mass(&vocab));
    }
    Ok(emittable_softmax(
        &vocab,
        &model.step_logits(dut, prefix),
        tau,
    ))
}

fn draw(probs: &[f64], rng: &mut impl Rng) -> Token {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i as Token;
        }
    }
    last as Token
}

/// Samples one sequence: BOS, then tokens until EOS.
pub fn sample_sequence<M: StepModel + ?Sized>(
    model: &M,
    dut: &str,
    tau: f64,
    rng: &mut impl Rng,
) -> Result<TokenSeq, PolicyError> {
    check_tau(tau)?;
    let vocab = model.vocab();
    let mut tokens = vec![vocab.bos()];
    loop {
        let probs = next_distribution(model, dut, &tokens, tau)?;
        let t = draw(&probs, rng);
        tokens.push(t);
        if t == vocab.eos() {
            return Ok(TokenSeq(tokens));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProb {
    pub total: f64,
    pub per_step: Vec<f64>,
}

/// Sparse gradient over policy logits, one dense row per touched context.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGrad {
    rows: BTreeMap<String, BTreeMap<Vec<Token>, Vec<f64>>>,
}

impl SparseGrad {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, dut: &str, context: &[Token], token: Token) -> f64 {
        self.rows
            .get(dut)
            .and_then(|m| m.get(context))
            .map_or(0.0, |row| row[token as usize])
    }

    fn row_mut(&mut self, dut: &str, context: &[Token], width: usize) -> &mut Vec<f64> {
        if !self.rows.contains_key(dut) {
            self.rows.insert(dut.to_string(), BTreeMap::new());
        }
        let by_ctx = self.rows.get_mut(dut).expect("inserted above");
        if !by_ctx.contains_key(context) {
            by_ctx.insert(context.to_vec(), vec![0.0; width]);
        }
        by_ctx.get_mut(context).expect("inserted above")
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &SparseGrad, scale: f64) {
        for (dut, by_ctx) in &other.rows {
            for (ctx, row) in by_ctx {
                let dst = self.row_mut(dut, ctx, row.len());
                for (d, s) in dst.iter_mut().zip(row) {
                    *d += scale * s;
                }
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for row in self.rows.values_mut().flat_map(|m| m.values_mut()) {
            row.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries().map(|(_, _, _, g)| g * g).sum::<f64>().sqrt()
    }

    /// `(dut, context, token, value)` for every stored entry, in key order.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[Token], Token, f64)> + '_ {
        self.rows.iter().flat_map(|(dut, by_ctx)| {
            by_ctx.iter().flat_map(move |(ctx, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(t, &g)| (dut.as_str(), ctx.as_slice(), t as Token, g))
            })
        })
    }

    pub fn all_finite(&self) -> bool {
        self.entries().all(|(_, _, _, g)| g.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    vocab: Vocab,
    k: usize,
    t_max: usize,
    table: BTreeMap<String, BTreeMap<Vec<Token>, Vec<f64>>>,
    zeros: Vec<f64>,
}

impl TabularPolicy {
    /// A uniform policy (every context at zero logits).
    pub fn new(vocab: Vocab, k: usize, t_max: usize) -> Self {
        Self {
            vocab,
            k,
            t_max,
            table: BTreeMap::new(),
            zeros: vec![0.0; vocab.size()],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_contexts(&self) -> usize {
        self.table.values().map(BTreeMap::len).sum()
    }

    /// Last `k` tokens of the prefix, left-padded with BOS.
    pub fn context_of(&self, prefix: &[Token]) -> Vec<Token> {
        let start = prefix.len().saturating_sub(self.k);
        let mut ctx = vec![self.vocab.bos(); self.k - (prefix.len() - start)];
        ctx.extend_from_slice(&prefix[start..]);
        ctx
    }

    pub fn logits(&self, dut: &str, context: &[Token]) -> &[f64] {
        self.table
            .get(dut)
            .and_then(|m| m.get(context))
            .map_or(&self.zeros, |row| row)
    }

    /// Mutable logits for a context, materializing zeros if absent.
    pub fn logits_mut(&mut self, dut: &str, context: &[Token]) -> &mut Vec<f64> {
        assert_eq!(context.len(), self.k, "context length must equal k");
        if !self.table.contains_key(dut) {
            self.table.insert(dut.to_string(), BTreeMap::new());
        }
        let by_ctx = self.table.get_mut(dut).expect("inserted above");
        if !by_ctx.contains_key(context) {
            by_ctx.insert(context.to_vec(), self.zeros.clone());
        }
        by_ctx.get_mut(context).expect("inserted above")
    }

    /// Distribution at interior `position` (number of value tokens already emitted).
    pub fn step_distribution(
        &self,
        dut: &str,
        context: &[Token],
        tau: f64,
        position: usize,
    ) -> Result<Vec<f64>, PolicyError> {
        check_tau(tau)?;
        if position >= self.t_max {
            return Ok(eos_point_mass(&self.vocab));
        }
        Ok(emittable_softmax(
            &self.vocab,
            self.logits(dut, context),
            tau,
        ))
    }

    pub fn sample(&self, dut: &str, tau: f64, rng: &mut impl Rng) -> Result<TokenSeq, PolicyError> {
        sample_sequence(self, dut, tau, rng)
    }

    /// Predicted positions of a well-formed sequence: `(context, token, forced)`.
    fn steps<'a>(
        &'a self,
        seq: &'a TokenSeq,
    ) -> Result<impl Iterator<Item = (Vec<Token>, Token, bool)> + 'a, PolicyError> {
        seq.check_well_formed(&self.vocab, self.t_max)?;
        let toks = seq.tokens();
        Ok((1..toks.len()).map(move |i| (self.context_of(&toks[..i]), toks[i], i > self.t_max)))
    }

    /// Sequence log-probability at unit temperature. The forced EOS step contributes 0.
    pub fn log_prob(&self, dut: &str, seq: &TokenSeq) -> Result<LogProb, PolicyError> {
        let per_step: Vec<f64> = self
            .steps(seq)?
            .map(|(ctx, tok, forced)| {
                if forced {
                    0.0
                } else {
                    emittable_log_softmax(&self.vocab, self.logits(dut, &ctx), tok)
                }
            })
            .collect();
        Ok(LogProb {
            total: per_step.iter().sum(),
            per_step,
        })
    }

    /// Gradient of [`TabularPolicy::log_prob`] with respect to the logits.
    pub fn grad_log_prob(&self, dut: &str, seq: &TokenSeq) -> Result<SparseGrad, PolicyError> {
        let mut grad = SparseGrad::default();
        let bos = self.vocab.bos() as usize;
        for (ctx, tok, forced) in self.steps(seq)? {
            if forced {
                continue;
            }
            let probs = emittable_softmax(&self.vocab, self.logits(dut, &ctx), 1.0);
            let row = grad.row_mut(dut, &ctx, self.vocab.size());
            for (u, (g, p)) in row.iter_mut().zip(&probs).enumerate() {
                if u != bos {
                    *g += f64::from(u == tok as usize) - p;
                }
            }
        }
        Ok(grad)
    }

    /// `θ += step * grad`.
    pub fn apply(&mut self, grad: &SparseGrad, step: f64) {
        for (dut, by_ctx) in &grad.rows {
            for (ctx, row) in by_ctx {
                let dst = self.logits_mut(dut, ctx);
                for (d, g) in dst.iter_mut().zip(row) {
                    *d += step * g;
                }
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.table
            .values()
            .flat_map(BTreeMap::values)
            .all(|row| row.iter().all(|x| x.is_finite()))
    }

    pub fn to_json(&self) -> Result<String, PolicyError> {
        let table = self
            .table
            .iter()
            .flat_map(|(dut, by_ctx)| {
                by_ctx
                    .iter()
                    .map(move |(ctx, row)| (dut.clone(), ctx.clone(), row.clone()))
            })
            .collect();
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.to_string(),
            vocab: self.vocab,
            k: self.k,
            t_max: self.t_max,
            table,
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let file: CheckpointFile = serde_json::from_str(text)?;
        if file.format != CHECKPOINT_FORMAT {
            return Err(PolicyError::Checkpoint(format!(
                "unsupported format `{}`",
                file.format
            )));
        }
        let vocab = Vocab::new(file.vocab.wmax)?;
        if file.k == 0 {
            return Err(PolicyError::Checkpoint("k must be at least 1".into()));
        }
        let mut policy = Self::new(vocab, file.k, file.t_max);
        for (dut, ctx, row) in file.table {
            if ctx.len() != file.k || row.len() != vocab.size() {
                return Err(PolicyError::Checkpoint(format!(
                    "entry for `{dut}` has context length {} and {} logits",
                    ctx.len(),
                    row.len()
                )));
            }
            if ctx.iter().any(|&t| t as usize >= vocab.size()) || row.iter().any(|x| !x.is_finite())
            {
                return Err(PolicyError::Checkpoint(format!(
                    "invalid entry for `{dut}`"
                )));
            }
            *policy.logits_mut(&dut, &ctx) = row;
        }
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

impl StepModel for TabularPolicy {
    fn vocab(&self) -> Vocab {
        self.vocab
    }

    fn t_max(&self) -> usize {
        self.t_max
    }

    fn step_logits(&self, dut: &str, prefix: &[Token]) -> Cow<'_, [f64]> {
        Cow::Borrowed(self.logits(dut, &self.context_of(prefix)))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    vocab: Vocab,
    k: usize,
    t_max: usize,
    table: Vec<(String, Vec<Token>, Vec<f64>)>,
}

/// Frozen snapshot of a policy used as the reference in implicit rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferencePolicy(TabularPolicy);

impl ReferencePolicy {
    pub fn freeze(policy: &TabularPolicy) -> Self {
        Self(policy.clone())
    }

    pub fn policy(&self) -> &TabularPolicy {
        &self.0
    }

    pub fn log_prob(&self, dut: &str, seq: &TokenSeq) -> Result<LogProb, PolicyError> {
        self.0.log_prob(dut, seq)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform() -> TabularPolicy {
        TabularPolicy::new(Vocab::default(), 2, 8)
    }

    #[test]
    fn uniform_step_distribution() {
        let p = uniform();
        let probs = p.step_distribution("toy1", &[16, 16], 1.0, 0).unwrap();
        assert_eq!(probs[16], 0.0);
        for (i, &x) in probs.iter().enumerate() {
            if i != 16 {
                assert!((x - 1.0 / 17.0).abs() < 1e-15);
            }
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn forced_eos_at_t_max() {
        let probs = uniform()
            .step_distribution("toy1", &[0, 0], 1.0, 8)
            .unwrap();
        assert_eq!(probs[17], 1.0);
        assert_eq!(probs.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn tempered_boost() {
        let mut p = uniform();
        p.logits_mut("d", &[16, 16])[0] = 1.0;
        let probs = p.step_distribution("d", &[16, 16], 0.5, 0).unwrap();
        // e^2 : 1 : ... over 17 emittable tokens, computed in closed form.
        let z = 2f64.exp() + 16.0;
        assert!((probs[0] - 2f64.exp() / z).abs() < 1e-15);
        assert!((probs[5] - 1.0 / z).abs() < 1e-15);
        assert_eq!(probs[16], 0.0);
    }

    #[test]
    fn bad_temperature() {
        assert!(uniform().step_distribution("d", &[16, 16], 0.0, 0).is_err());
        assert!(uniform()
            .step_distribution("d", &[16, 16], -1.0, 0)
            .is_err());
    }

    #[test]
    fn context_padding() {
        let p = uniform();
        assert_eq!(p.context_of(&[16]), vec![16, 16]);
        assert_eq!(p.context_of(&[16, 3]), vec![16, 3]);
        assert_eq!(p.context_of(&[16, 3, 4, 5]), vec![4, 5]);
    }

    #[test]
    fn uniform_log_prob_closed_form() {
        let lp = uniform()
            .log_prob("toy1", &TokenSeq(vec![16, 1, 17]))
            .unwrap();
        assert_eq!(lp.per_step.len(), 2);
        assert!((lp.total - (-2.0 * 17f64.ln())).abs() < 1e-12);
        assert!((lp.total - -5.666427).abs() < 1e-6);
    }

    #[test]
    fn forced_step_contributes_zero() {
        let mut toks = vec![16];
        toks.extend([3; 8]);
        toks.push(17);
        let lp = uniform().log_prob("toy1", &TokenSeq(toks)).unwrap();
        assert_eq!(lp.per_step.len(), 9);
        assert_eq!(lp.per_step[8], 0.0);
    }

    #[test]
    fn malformed_sequence_rejected() {
        assert!(uniform().log_prob("d", &TokenSeq(vec![1, 17])).is_err());
        assert!(uniform()
            .grad_log_prob("d", &TokenSeq(vec![16, 1]))
            .is_err());
    }

    #[test]
    fn uniform_gradient_identity() {
        let g = uniform()
            .grad_log_prob("d", &TokenSeq(vec![16, 5, 17]))
            .unwrap();
        // First step: context (BOS, BOS), emitted 5.
        for u in 0..18 {
            let expected = match u {
                16 => 0.0,
                5 => 1.0 - 1.0 / 17.0,
                _ => -1.0 / 17.0,
            };
            assert!((g.get("d", &[16, 16], u) - expected).abs() < 1e-15);
        }
        let row_sum: f64 = (0..18).map(|u| g.get("d", &[16, 5], u)).sum();
        assert!(row_sum.abs() < 1e-15);
    }

    #[test]
    fn boosting_true_tokens_raises_log_prob() {
        let seq = TokenSeq(vec![16, 2, 7, 17]);
        let base = uniform();
        let mut boosted = base.clone();
        for i in 1..seq.len() {
            let ctx = boosted.context_of(&seq.tokens()[..i]);
            boosted.logits_mut("d", &ctx)[seq.tokens()[i] as usize] += 0.3;
        }
        assert!(
            boosted.log_prob("d", &seq).unwrap().total > base.log_prob("d", &seq).unwrap().total
        );
    }

    #[test]
    fn sampling_is_deterministic_and_well_formed() {
        let p = uniform();
        let a = p
            .sample("d", 1.0, &mut ChaCha8Rng::seed_from_u64(7))
            .unwrap();
        let b = p
            .sample("d", 1.0, &mut ChaCha8Rng::seed_from_u64(7))
            .unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..500 {
            let s = p.sample("d", 1.3, &mut rng).unwrap();
            s.check_well_formed(&Vocab::default(), 8).unwrap();
        }
    }

    #[test]
    fn cold_sampling_follows_argmax() {
        let mut p = uniform();
        let mut ctxs = vec![vec![16, 16], vec![16, 5]];
        ctxs.push(vec![5, 5]);
        for ctx in &ctxs {
            p.logits_mut("d", ctx)[5] = 3.0;
        }
        let s = p
            .sample("d", 1e-3, &mut ChaCha8Rng::seed_from_u64(3))
            .unwrap();
        assert_eq!(s.interior(), &[5; 8]);
        assert_eq!(*s.tokens().last().unwrap(), 17);
    }

    #[test]
    fn reference_matches_source() {
        let mut p = uniform();
        p.logits_mut("d", &[16, 16])[3] = 0.7;
        let r = ReferencePolicy::freeze(&p);
        let seq = TokenSeq(vec![16, 3, 4, 17]);
        assert_eq!(
            r.log_prob("d", &seq).unwrap(),
            p.log_prob("d", &seq).unwrap()
        );
    }

    #[test]
    fn checkpoint_rejects_bad_files() {
        assert!(TabularPolicy::from_json(
            r#"{"format":"other","vocab":{"wmax":4},"k":2,"t_max":8,"table":[]}"#
        )
        .is_err());
        assert!(TabularPolicy::from_json(r#"{"format":"covpref-policy/1","vocab":{"wmax":4},"k":2,"t_max":8,"table":[["d",[16],[0]]]}"#).is_err());
    }
}
