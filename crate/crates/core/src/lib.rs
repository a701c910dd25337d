//! Subword tokenisers with a choice of space handling.
//!
//! BPE, Unigram and WordPiece can each be trained in two ways: the conventional
//! *attached* mode, where a token may begin with the space symbol `▁`, and the
//! *isolated* mode, where every space is a token of its own and no other token
//! contains one. The crate also ships a boundary-based morphological evaluation
//! ([`morphoeval`]), vocabulary statistics ([`vocabstats`]) and a plain-text model
//! format ([`modelfile`]).

pub mod bpe;
pub mod cli;
pub mod error;
mod merges;
pub mod modelfile;
pub mod morphoeval;
pub mod textnorm;
pub mod tokens;
pub mod unigram;
pub mod vocabstats;
pub mod wordpiece;

pub use error::{Error, Result};
pub use modelfile::{Algorithm, AnyModel};
pub use textnorm::{Corpus, NormConfig, SpaceMode};
pub use tokens::{Token, Tokenisation, Tokenizer};
