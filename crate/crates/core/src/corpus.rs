//! Designs shipped with the crate.

use crate::hdl::{parse, DutModel, ParseError};

pub const TOY1: &str = include_str!("../corpus/toy1.hdl");
pub const UPDOWN: &str = include_str!("../corpus/updown.hdl");
pub const ALU2: &str = include_str!("../corpus/alu2.hdl");
pub const SHIFT3: &str = include_str!("../corpus/shift3.hdl");
pub const PARITY: &str = include_str!("../corpus/parity.hdl");
pub const HANDSHAKE: &str = include_str!("../corpus/handshake.hdl");

/// `(name, source)` for every bundled design, in a fixed order.
pub const BUNDLED: &[(&str, &str)] = &[
    ("toy1", TOY1),
    ("updown", UPDOWN),
    ("alu2", ALU2),
    ("shift3", SHIFT3),
    ("parity", PARITY),
    ("handshake", HANDSHAKE),
];

/// The one bundled design without covergroups.
pub const NO_COVERGROUP_DESIGN: &str = "parity";

/// A parsed design together with its source text, which serves as the prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub source: String,
    pub model: DutModel,
}

impl Design {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        Ok(Self {
            source: source.to_string(),
            model: parse(source)?,
        })
    }

    pub fn name(&self) -> &str {
        &self.model.name
    }
}

/// Parsed bundled corpus.
pub fn bundled() -> Vec<Design> {
    BUNDLED
        .iter()
        .map(|(name, src)| {
            Design::parse(src).unwrap_or_else(|e| panic!("bundled design {name}: {e}"))
        })
        .collect()
}
