//! Token vocabulary and the token-sequence/stimulus conversion.
//!
//! A value token packs one cycle of inputs: the first declared input port
//! occupies the least-significant bits. The vocabulary is sized by `wmax`
//! and shared by every design, so a sequence can carry values that do not
//! fit a narrower design; decoding rejects them.

use serde::{Deserialize, Serialize};

use crate::hdl::DutModel;
use crate::sim::Stimulus;

pub type Token = u32;

/// Largest supported `wmax`.
pub const MAX_WMAX: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Vocab {
    pub wmax: u32,
}

impl Default for Vocab {
    fn default() -> Self {
        Self { wmax: 4 }
    }
}

impl Vocab {
    pub fn new(wmax: u32) -> Result<Self, CodecError> {
        if (1..=MAX_WMAX).contains(&wmax) {
            Ok(Self { wmax })
        } else {
            Err(CodecError {
                kind: CodecErrorKind::InvalidVocab,
                position: 0,
            })
        }
    }

    /// Number of value tokens, `2^wmax`.
    pub fn num_values(&self) -> usize {
        1usize << self.wmax
    }

    /// Total vocabulary size including BOS and EOS.
    pub fn size(&self) -> usize {
        self.num_values() + 2
    }

    pub fn bos(&self) -> Token {
        self.num_values() as Token
    }

    pub fn eos(&self) -> Token {
        self.num_values() as Token + 1
    }

    pub fn is_value(&self, t: Token) -> bool {
        (t as usize) < self.num_values()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(pub Vec<Token>);

impl TokenSeq {
    pub fn tokens(&self) -> &[Token] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Tokens between BOS and EOS. Assumes a well-formed sequence.
    pub fn interior(&self) -> &[Token] {
        if self.0.len() < 2 {
            &[]
        } else {
            &self.0[1..self.0.len() - 1]
        }
    }

    /// Wraps value tokens in BOS/EOS.
    pub fn from_values(vocab: &Vocab, values: &[Token]) -> Self {
        let mut tokens = Vec::with_capacity(values.len() + 2);
        tokens.push(vocab.bos());
        tokens.extend_from_slice(values);
        tokens.push(vocab.eos());
        Self(tokens)
    }

    /// Checks BOS/EOS framing and the interior length bound. Returns the
    /// position of the first violation.
    pub fn check_well_formed(&self, vocab: &Vocab, t_max: usize) -> Result<(), CodecError> {
        let toks = &self.0;
        let fail = |kind, position| Err(CodecError { kind, position });
        if toks.first() != Some(&vocab.bos()) {
            return fail(CodecErrorKind::NotWellFormed, 0);
        }
        if toks.len() < 2 || toks[toks.len() - 1] != vocab.eos() {
            return fail(CodecErrorKind::NotWellFormed, toks.len().saturating_sub(1));
        }
        if let Some(i) = self.interior().iter().position(|&t| !vocab.is_value(t)) {
            return fail(CodecErrorKind::NotWellFormed, i + 1);
        }
        if toks.len() - 2 > t_max {
            return fail(CodecErrorKind::TooLong, t_max + 1);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodecErrorKind {
    NotWellFormed,
    ValueExceedsInputWidth,
    EmptyStimulus,
    TooLong,
    /// The design's packed input width exceeds `wmax`.
    InputsExceedVocab,
    /// `wmax` outside `1..=16`.
    InvalidVocab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[error("{kind:?} at token {position}")]
pub struct CodecError {
    pub kind: CodecErrorKind,
    /// Token index in the sequence (encode: cycle index).
    pub position: usize,
}

fn input_layout(dut: &DutModel, vocab: &Vocab) -> Result<Vec<(u32, u32)>, CodecError> {
    let total = dut.input_width();
    if total > vocab.wmax {
        return Err(CodecError {
            kind: CodecErrorKind::InputsExceedVocab,
            position: 0,
        });
    }
    let mut offset = 0;
    Ok(dut
        .inputs()
        .map(|p| {
            let slot = (offset, p.width);
            offset += p.width;
            slot
        })
        .collect())
}

/// Decodes a generated sequence into a stimulus, or reports the first rule it
/// breaks: framing, then cycle count, then per-token input width.
pub fn validate_and_decode(
    dut: &DutModel,
    vocab: &Vocab,
    seq: &TokenSeq,
    t_max: usize,
) -> Result<Stimulus, CodecError> {
    let layout = input_layout(dut, vocab)?;
    seq.check_well_formed(vocab, t_max)?;
    let interior = seq.interior();
    if interior.is_empty() {
        return Err(CodecError {
            kind: CodecErrorKind::EmptyStimulus,
            position: 1,
        });
    }
    let width = dut.input_width();
    let mut cycles = Vec::with_capacity(interior.len());
    for (i, &v) in interior.iter().enumerate() {
        let v = u64::from(v);
        if v >> width != 0 {
            return Err(CodecError {
                kind: CodecErrorKind::ValueExceedsInputWidth,
                position: i + 1,
            });
        }
        cycles.push(
            layout
                .iter()
                .map(|&(offset, w)| (v >> offset) & ((1u64 << w) - 1))
                .collect(),
        );
    }
    Ok(Stimulus::new(cycles))
}

/// Packs a stimulus into a token sequence.
pub fn encode(dut: &DutModel, vocab: &Vocab, stim: &Stimulus) -> Result<TokenSeq, CodecError> {
    let layout = input_layout(dut, vocab)?;
    let mut values = Vec::with_capacity(stim.len());
    for (cycle, inputs) in stim.cycles.iter().enumerate() {
        let err = CodecError {
            kind: CodecErrorKind::ValueExceedsInputWidth,
            position: cycle,
        };
        if inputs.len() != layout.len() {
            return Err(CodecError {
                kind: CodecErrorKind::NotWellFormed,
                position: cycle,
            });
        }
        let mut token = 0u64;
        for (&value, &(offset, w)) in inputs.iter().zip(&layout) {
            if value >> w != 0 {
                return Err(err);
            }
            token |= value << offset;
        }
        values.push(token as Token);
    }
    Ok(TokenSeq::from_values(vocab, &values))
}
