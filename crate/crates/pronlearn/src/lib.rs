//! Pronunciation learning from phone-level transcripts.
//!
//! This crate implements a closed loop for improving grapheme-to-phoneme
//! (G2P) models in low-resource settings:
//!
//! 1. bootstrap a joint-sequence G2P from a small seed lexicon ([`g2p`]);
//! 2. annotate a text corpus with G2P pronunciations and train a phone
//!    n-gram language model on the resulting transcripts ([`phonelm`]);
//! 3. decode sentence-level phoneme streams through a simulated, seeded
//!    phone recognizer constrained by that LM ([`recognizer`]);
//! 4. discover word boundaries in the decoded streams with tied-emission
//!    HMMs and Viterbi, harvest per-word pronunciations, and keep those
//!    seen at least `k` times ([`lexlearn`]);
//! 5. pool the learned lexicon with the seed, retrain the G2P, and
//!    measure phone/word error rates against a gold lexicon ([`eval`]).
//!
//! A synthetic-language generator ([`synthlang`]) provides gold lexicons
//! and corpora with controllable regularity so end-to-end behavior is
//! testable, and [`pipeline`] orchestrates the loop with resumable,
//! deterministic on-disk artifacts. See the crate `examples/` directory
//! for one runnable example per capability.

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod g2p;
pub mod lexicon;
pub mod lexlearn;
pub mod ngram;
pub mod phonelm;
pub mod pipeline;
pub mod recognizer;
pub mod rng;
pub mod symbol;
pub mod synthlang;

pub use error::{Error, Result};
pub use symbol::{Symbol, SymbolTable};
