//! Coverage-weighted preference optimization for stimulus generation.
//!
//! The crate covers the full pipeline on a small register-transfer language:
//! parsing and linting designs ([`hdl`]), cycle simulation with coverage
//! counting ([`sim`]), the token codec between policies and stimuli
//! ([`codec`]), tabular autoregressive policies ([`policy`]), preference
//! dataset curation ([`curation`]), SFT/DPO/coverage-scaled DPO training
//! ([`trainer`]) and mean/best-of-N evaluation ([`eval`]).

pub mod codec;
pub mod corpus;
pub mod curation;
pub mod eval;
pub mod hdl;
mod par;
pub mod policy;
pub mod rng;
pub mod sim;
pub mod trainer;
