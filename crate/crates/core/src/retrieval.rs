//! BM25 inverted index over the training split and top-1 retrieval.
//!
//! Score of document `d` for query `q`:
//!
//! ```text
//! score(q, d) = Σ_{t ∈ unique(q)} idf(t) · tf(t,d)·(k1+1) / (tf(t,d) + k1·(1 − b + b·|d|/avgdl))
//! idf(t)      = ln(1 + (N − df(t) + 0.5) / (df(t) + 0.5))
//! ```
//!
//! Documents are the preprocessed code tokens of training samples. Internally
//! documents are numbered in ascending sample-id order, so "smallest doc id"
//! tie-breaking is the same as smallest internal number.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, CorpusError, Sample, Split};
use crate::Tokens;

pub const INDEX_FORMAT: &str = "hybridsum-bm25";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IndexError {
    #[error("cannot build an index over an empty document set")]
    Empty,
    #[error("unknown document id {0:?}")]
    UnknownDoc(String),
    #[error("index format: {0}")]
    Format(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("index io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable BM25 index. Safe to query from many threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bm25Index {
    format: String,
    version: u32,
    params: Bm25Params,
    doc_count: usize,
    avg_doc_len: f64,
    /// Sample ids, ascending; position is the internal doc number.
    doc_ids: Vec<String>,
    doc_lens: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
}

/// Best match for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub retrieved_id: String,
    pub score: f64,
    pub retrieved_comment: Tokens,
}

impl Bm25Index {
    /// Indexes the code tokens of the training split.
    pub fn build(corpus: &Corpus, params: Bm25Params) -> Result<Self, IndexError> {
        let train = corpus.require_split(Split::Train).map_err(|e| match e {
            CorpusError::EmptySplit(_) => IndexError::Empty,
            other => IndexError::Corpus(other),
        })?;
        Self::from_docs(train.iter().map(|s| (s.id.as_str(), s.code_tokens.as_slice())), params)
    }

    /// Indexes arbitrary `(id, tokens)` documents. Ids must be unique.
    pub fn from_docs<'a, I>(docs: I, params: Bm25Params) -> Result<Self, IndexError>
    where
        I: IntoIterator<Item = (&'a str, &'a [String])>,
    {
        let mut docs: Vec<(&str, &[String])> = docs.into_iter().collect();
        if docs.is_empty() {
            return Err(IndexError::Empty);
        }
        docs.sort_by(|a, b| a.0.cmp(b.0));
        if let Some(w) = docs.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(IndexError::Format(format!("duplicate document id {:?}", w[0].0)));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lens = Vec::with_capacity(docs.len());
        for (n, (_, tokens)) in docs.iter().enumerate() {
            doc_lens.push(tokens.len() as u32);
            let mut tf: BTreeMap<&str, u32> = BTreeMap::new();
            for t in tokens.iter() {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term.to_string()).or_default().push(Posting { doc: n as u32, tf: count });
            }
        }
        let total: u64 = doc_lens.iter().map(|&l| l as u64).sum();
        Ok(Self {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            params,
            doc_count: docs.len(),
            avg_doc_len: total as f64 / docs.len() as f64,
            doc_ids: docs.iter().map(|(id, _)| id.to_string()).collect(),
            doc_lens,
            postings,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.doc_number(doc_id).map(|n| self.doc_lens[n])
    }

    pub fn contains(&self, doc_id: &str) -> bool {
        self.doc_number(doc_id).is_some()
    }

    fn doc_number(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.binary_search_by(|d| d.as_str().cmp(doc_id)).ok()
    }

    pub fn df(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, idf: f64, tf: u32, doc_len: u32) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = k1 * (1.0 - b + b * doc_len as f64 / self.avg_doc_len);
        idf * tf * (k1 + 1.0) / (tf + norm)
    }

    /// BM25 score of one indexed document.
    pub fn score(&self, query: &[String], doc_id: &str) -> Result<f64, IndexError> {
        let doc = self.doc_number(doc_id).ok_or_else(|| IndexError::UnknownDoc(doc_id.to_string()))?;
        let mut total = 0.0;
        for term in unique_terms(query) {
            let Some(list) = self.postings.get(term) else { continue };
            if let Ok(i) = list.binary_search_by_key(&(doc as u32), |p| p.doc) {
                total += self.term_weight(self.idf(term), list[i].tf, self.doc_lens[doc]);
            }
        }
        Ok(total)
    }

    /// Highest-scoring document for `query`, ties to the smallest doc id.
    ///
    /// `exclude` removes one id from consideration (self-retrieval on training
    /// queries). Returns `None` only when nothing is left to retrieve.
    pub fn top1(&self, query: &[String], exclude: Option<&str>) -> Option<(&str, f64)> {
        let excluded = exclude.and_then(|id| self.doc_number(id));
        let mut acc = vec![0.0f64; self.doc_count];
        for term in unique_terms(query) {
            let Some(list) = self.postings.get(term) else { continue };
            let idf = self.idf(term);
            for p in list {
                acc[p.doc as usize] += self.term_weight(idf, p.tf, self.doc_lens[p.doc as usize]);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for (n, &s) in acc.iter().enumerate() {
            if Some(n) == excluded {
                continue;
            }
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((n, s));
            }
        }
        best.map(|(n, s)| (self.doc_ids[n].as_str(), s))
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<(), IndexError> {
        serde_json::to_writer(w, self).map_err(|e| IndexError::Format(e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("index serializes")
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self, IndexError> {
        let idx: Bm25Index =
            serde_json::from_reader(r).map_err(|e| IndexError::Format(e.to_string()))?;
        idx.check()?;
        Ok(idx)
    }

    fn check(&self) -> Result<(), IndexError> {
        if self.format != INDEX_FORMAT {
            return Err(IndexError::Format(format!("expected format {INDEX_FORMAT:?}, found {:?}", self.format)));
        }
        if self.version != INDEX_VERSION {
            return Err(IndexError::Format(format!("unsupported version {}", self.version)));
        }
        if self.doc_ids.len() != self.doc_count || self.doc_lens.len() != self.doc_count || self.doc_count == 0 {
            return Err(IndexError::Format("document tables disagree with doc_count".into()));
        }
        if self.postings.values().flatten().any(|p| p.doc as usize >= self.doc_count) {
            return Err(IndexError::Format("posting refers to unknown document".into()));
        }
        Ok(())
    }
}

fn unique_terms(query: &[String]) -> BTreeSet<&str> {
    query.iter().map(String::as_str).collect()
}

/// Where a query comes from, which decides self-exclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfExclusion {
    /// Exclude the query's own id when it is indexed.
    On,
    Off,
}

/// Finds the most similar indexed sample and returns its comment.
///
/// `corpus` supplies the retrieved comment; normally it is the corpus the
/// index was built from.
pub fn retrieve_top1(
    index: &Bm25Index,
    corpus: &Corpus,
    query: &Sample,
    exclusion: SelfExclusion,
) -> Result<RetrievalResult, IndexError> {
    let exclude = (exclusion == SelfExclusion::On).then_some(query.id.as_str());
    let (id, score) = index.top1(&query.code_tokens, exclude).ok_or(IndexError::Empty)?;
    let retrieved = corpus.get(id).ok_or_else(|| IndexError::UnknownDoc(id.to_string()))?;
    Ok(RetrievalResult {
        query_id: query.id.clone(),
        retrieved_id: id.to_string(),
        score,
        retrieved_comment: retrieved.comment_tokens.clone(),
    })
}

/// Retrieves for many queries in parallel; output order follows `queries`.
/// Training-split queries get self-exclusion, others do not.
pub fn retrieve_all(
    index: &Bm25Index,
    corpus: &Corpus,
    queries: &[&Sample],
) -> Result<Vec<RetrievalResult>, IndexError> {
    let lookup: std::collections::HashMap<&str, &Sample> =
        corpus.samples.iter().map(|s| (s.id.as_str(), s)).collect();
    queries
        .par_iter()
        .map(|q| {
            let exclusion = if corpus.split_of(&q.id) == Some(Split::Train) {
                SelfExclusion::On
            } else {
                SelfExclusion::Off
            };
            let exclude = (exclusion == SelfExclusion::On).then_some(q.id.as_str());
            let (id, score) = index.top1(&q.code_tokens, exclude).ok_or(IndexError::Empty)?;
            let retrieved = lookup.get(id).ok_or_else(|| IndexError::UnknownDoc(id.to_string()))?;
            Ok(RetrievalResult {
                query_id: q.id.clone(),
                retrieved_id: id.to_string(),
                score,
                retrieved_comment: retrieved.comment_tokens.clone(),
            })
        })
        .collect()
}
