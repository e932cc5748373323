//! Dynamic combination of retrieval-based and neural code comment generation.
//!
//! For every input snippet the toolkit retrieves the most similar training
//! snippet with BM25, asks a router whether the retrieved comment can be
//! reused as-is, and only calls a neural generator when it cannot. The
//! combined output is scored with BLEU, METEOR, ROUGE-L and CIDEr, and the
//! run is broken down into IR-better / NMT-better partitions, effort saved and
//! paired significance tests.
//!
//! Module map:
//!
//! * [`corpus`]: preprocessing, loading, auto-generated filtering, project splits
//! * [`retrieval`]: BM25 inverted index and top-1 retrieval
//! * [`metrics`]: BLEU, METEOR, ROUGE-L, CIDEr, classification metrics, Wilcoxon
//! * [`labeler`]: triplet construction for training routing classifiers
//! * [`router`]: lexical, external-classifier and oracle routers, threshold sweep
//! * [`backend`]: line-delimited JSON protocol for generator/classifier processes
//! * [`pipeline`]: end-to-end experiment, partition analysis, effort accounting
//! * [`report`]: JSON/CSV/text/markdown rendering of evaluation reports
//! * [`synthetic`]: seeded synthetic corpora for tests and demos

pub mod backend;
pub mod corpus;
pub mod labeler;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod retrieval;
pub mod router;
pub mod synthetic;

mod error;

pub use error::{Error, Result};

/// A token sequence after preprocessing.
pub type Tokens = Vec<String>;

/// Converts a slice of string-likes into owned tokens. Mostly useful in tests
/// and doc examples.
pub fn toks<S: AsRef<str>>(words: &[S]) -> Tokens {
    words.iter().map(|w| w.as_ref().to_string()).collect()
}

/// Splits a space-joined token string, ignoring empty pieces.
pub fn split_tokens(s: &str) -> Tokens {
    s.split(' ').filter(|t| !t.is_empty()).map(str::to_string).collect()
}
