//! Independent oracles and generators shared by integration tests.
#![allow(dead_code)]

use covpref::codec::{Token, TokenSeq, Vocab};
use covpref::policy::{StepModel, TabularPolicy};
use covpref::trainer::PreferencePair;
use rand::Rng;

/// Hand model of the two-state toy design: `y` shows last cycle's `a`,
/// statements are the two `next` arms plus the `assign`, branch outcomes are
/// the `if` arms, and the covergroup has bins for `y == 0` and `y == 1`.
/// Returns `(statement, branch, functional)` covered counts.
pub fn toy1_oracle(inputs: &[u64]) -> (usize, usize, usize) {
    let (mut then_arm, mut else_arm, mut assign) = (false, false, false);
    let (mut y0, mut y1) = (false, false);
    let mut s = 0;
    for &a in inputs {
        assign = true;
        if a == 1 {
            then_arm = true;
        } else {
            else_arm = true;
        }
        if s == 0 {
            y0 = true;
        } else {
            y1 = true;
        }
        s = a;
    }
    let n = |bits: &[bool]| bits.iter().filter(|&&b| b).count();
    (
        n(&[then_arm, else_arm, assign]),
        n(&[then_arm, else_arm]),
        n(&[y0, y1]),
    )
}

/// Every binary input sequence of length 1..=max_len.
pub fn all_binary_stimuli(max_len: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    for len in 1..=max_len {
        for bits in 0..(1u64 << len) {
            out.push((0..len).map(|i| (bits >> i) & 1).collect());
        }
    }
    out
}

/// Every well-formed sequence for a vocabulary and length bound.
pub fn all_sequences(vocab: &Vocab, t_max: usize) -> Vec<TokenSeq> {
    let values = vocab.num_values() as Token;
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<Token>> = vec![vec![]];
    for _ in 0..=t_max {
        let mut next = Vec::new();
        for interior in &frontier {
            out.push(TokenSeq::from_values(vocab, interior));
            if interior.len() < t_max {
                for v in 0..values {
                    let mut longer = interior.clone();
                    longer.push(v);
                    next.push(longer);
                }
            }
        }
        frontier = next;
    }
    out
}

/// All contexts of length `k` over value tokens and BOS.
pub fn all_contexts(vocab: &Vocab, k: usize) -> Vec<Vec<Token>> {
    let symbols: Vec<Token> = (0..vocab.num_values() as Token)
        .chain([vocab.bos()])
        .collect();
    let mut out: Vec<Vec<Token>> = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|c| {
                symbols.iter().map(move |&s| {
                    let mut c = c.clone();
                    c.push(s);
                    c
                })
            })
            .collect();
    }
    out
}

/// A policy with Gaussian-ish logits on every context of `dut`.
pub fn random_policy(
    vocab: Vocab,
    k: usize,
    t_max: usize,
    dut: &str,
    scale: f64,
    rng: &mut impl Rng,
) -> TabularPolicy {
    let mut p = TabularPolicy::new(vocab, k, t_max);
    for ctx in all_contexts(&vocab, k) {
        for l in p.logits_mut(dut, &ctx).iter_mut() {
            *l = scale * (rng.gen::<f64>() * 2.0 - 1.0);
        }
    }
    p
}

pub fn random_seq(vocab: &Vocab, t_max: usize, rng: &mut impl Rng) -> TokenSeq {
    let len = rng.gen_range(0..=t_max);
    let values: Vec<Token> = (0..len)
        .map(|_| rng.gen_range(0..vocab.num_values() as Token))
        .collect();
    TokenSeq::from_values(vocab, &values)
}

pub fn random_pair(vocab: &Vocab, t_max: usize, dut: &str, rng: &mut impl Rng) -> PreferencePair {
    let s_np = rng.gen::<f64>() * 0.9;
    let s_p = s_np + 0.01 + rng.gen::<f64>() * (1.0 - s_np - 0.01);
    PreferencePair {
        dut_id: dut.to_string(),
        prompt: String::new(),
        chosen: random_seq(vocab, t_max, rng),
        rejected: random_seq(vocab, t_max, rng),
        s_p: s_p.min(1.0),
        s_np,
    }
}

/// Central finite-difference gradient of `f` over every logit in the rows
/// that the given sequences visit, together with the row coordinates.
pub fn finite_difference(
    policy: &TabularPolicy,
    dut: &str,
    seqs: &[&TokenSeq],
    eps: f64,
    f: impl Fn(&TabularPolicy) -> f64,
) -> Vec<(Vec<Token>, Token, f64)> {
    let mut contexts: Vec<Vec<Token>> = Vec::new();
    for seq in seqs {
        let toks = seq.tokens();
        for i in 1..toks.len() {
            let ctx = policy.context_of(&toks[..i]);
            if !contexts.contains(&ctx) {
                contexts.push(ctx);
            }
        }
    }
    let size = policy.vocab().size();
    let mut out = Vec::new();
    for ctx in contexts {
        for t in 0..size {
            let mut plus = policy.clone();
            plus.logits_mut(dut, &ctx)[t] += eps;
            let mut minus = policy.clone();
            minus.logits_mut(dut, &ctx)[t] -= eps;
            out.push((
                ctx.clone(),
                t as Token,
                (f(&plus) - f(&minus)) / (2.0 * eps),
            ));
        }
    }
    out
}

/// Norm-wise relative error `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn relative_error(pairs: &[(f64, f64)]) -> f64 {
    let diff: f64 = pairs
        .iter()
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let na: f64 = pairs.iter().map(|(a, _)| a * a).sum::<f64>().sqrt();
    let nb: f64 = pairs.iter().map(|(_, b)| b * b).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Stimuli reaching full average coverage on each bundled design, as value
/// tokens with the first declared input in the low bits.
pub const WITNESSES: &[(&str, &[Token])] = &[
    ("toy1", &[1, 0]),
    // en|up<<1|clr<<2: count up to 3, wrap, count down, clear, idle.
    ("updown", &[3, 3, 3, 3, 1, 4, 0]),
    // x|op<<2: 3+1 carries, 1-1 is zero, then the other two ops.
    ("alu2", &[3, 5, 8, 12]),
    ("shift3", &[1, 0, 1, 1, 1, 0]),
    ("parity", &[0, 7]),
    // req|ack<<1: idle without req, req, wait without ack, ack, finish.
    ("handshake", &[0, 1, 0, 2, 0]),
];
