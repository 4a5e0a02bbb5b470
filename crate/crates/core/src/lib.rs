//! Allocation-only core for projecting English QA-SRL / QANom annotations onto
//! target-language corpora and for scoring target-language QA-SRL output.
//!
//! Everything here is pure: corpus parsing works on `&str`, external model
//! services are reached through the traits in [`providers`], and randomness is
//! always seeded. File IO, HTTP clients, fixtures, the curation server and the
//! command line live in the companion `qasrl` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod corpus;
pub mod curation;
pub mod dataset;
pub mod evaluation;
pub mod projection;
pub mod providers;
pub mod record;
pub mod span;
pub mod text;

pub use corpus::{PredicateInstance, PredicateKind, Sentence, Token, Upos};
pub use span::TokenSpan;

/// Slack used when comparing floating-point scores against inclusive
/// thresholds (`score >= threshold`).
pub const SCORE_EPSILON: f64 = 1e-9;

/// Inclusive threshold test shared by IOU edges, cosine matching and threshold
/// sweeps.
#[inline]
pub fn meets_threshold(score: f64, threshold: f64) -> bool {
    score >= threshold - SCORE_EPSILON
}
