//! Morphology-aware word embedding toolkit.
//!
//! This crate trains context-free word vectors (CBOW and Skip-Gram with
//! negative sampling, plus a hashed character n-gram variant) over
//! differently preprocessed morphological renderings of an annotated corpus:
//! surface forms, lemmas, lemma+suffix token pairs and BPE pieces. Finished
//! vectors are composed into per-word representations under several schemes
//! (including derived suffix offsets) and evaluated with analogy,
//! odd-one-out, nearest-neighbor and document-classification harnesses.
//!
//! The `morphovec` binary exposes the whole pipeline as subcommands; see the
//! [`cli`] module. All vector artifacts use the word2vec-compatible text
//! format implemented in [`store`].
//!
//! With the `parallel` feature (enabled by default) training shards, bulk
//! evaluation and ranking scans run on rayon; without it everything falls
//! back to sequential execution behind the same APIs. Single-threaded runs
//! are deterministic for a fixed seed in either build.

pub mod cli;
pub mod compose;
pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod rng;
pub mod store;
pub mod subword;
pub mod trainer;

pub use error::{Error, Result};
