//! Code–comment corpora: preprocessing, JSONL ingestion, auto-generated
//! filtering and project-level train/validation/test splits.
//!
//! The corpus file holds one JSON object per line:
//!
//! ```text
//! {"id": "s1", "project": "p1", "code": "int getX() {...}", "ast": "a b c", "comment": "Returns x."}
//! ```
//!
//! `ast` is optional and taken as an already-serialized, space-separated token
//! sequence. Corpora written back out carry an extra `split` field.

mod preprocess;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use preprocess::{default_auto_generated_patterns, preprocess, preprocess_bytes, PreprocessConfig};
pub use split::{split_by_project, SplitRatios};

use crate::Tokens;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("input is not valid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate sample id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("need at least 3 projects to split, found {0}")]
    TooFewProjects(usize),
    #[error("invalid split ratios {0:?}: must be positive and sum to 1")]
    BadRatios([f64; 3]),
    #[error("split {0} is empty")]
    EmptySplit(Split),
    #[error("corpus has no split assignment")]
    Unsplit,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// One preprocessed code–comment pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub project_id: String,
    pub code_tokens: Tokens,
    pub ast_tokens: Option<Tokens>,
    pub comment_tokens: Tokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "valid" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?}")),
        }
    }
}

/// Counts of records removed while building a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DropCounts {
    pub empty_comment: usize,
    pub empty_code: usize,
    pub auto_generated: usize,
}

/// Ordered samples plus an optional split assignment.
///
/// `split` is either empty (not yet split) or total over `samples`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub samples: Vec<Sample>,
    pub split: BTreeMap<String, Split>,
    pub dropped: DropCounts,
}

impl Corpus {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples, split: BTreeMap::new(), dropped: DropCounts::default() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_split(&self) -> bool {
        !self.samples.is_empty() && self.samples.iter().all(|s| self.split.contains_key(&s.id))
    }

    pub fn split_of(&self, id: &str) -> Option<Split> {
        self.split.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Samples of one split, sorted by id.
    pub fn samples_in(&self, split: Split) -> Vec<&Sample> {
        let mut v: Vec<&Sample> =
            self.samples.iter().filter(|s| self.split_of(&s.id) == Some(split)).collect();
        v.sort_by(|a, b| a.id.cmp(&b.id));
        v
    }

    pub fn require_split(&self, split: Split) -> Result<Vec<&Sample>, CorpusError> {
        if !self.is_split() {
            return Err(CorpusError::Unsplit);
        }
        let v = self.samples_in(split);
        if v.is_empty() {
            return Err(CorpusError::EmptySplit(split));
        }
        Ok(v)
    }
}

/// One line of a corpus file, before preprocessing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRecord {
    pub id: String,
    pub project: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ast: Option<String>,
    pub comment: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// Writes raw records as JSONL.
pub fn write_records<W: Write>(records: &[RawRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a corpus file, preprocessing code and comments.
///
/// Records whose comment or code preprocesses to nothing are dropped and
/// counted in [`Corpus::dropped`]. If every surviving record carries a
/// `split` field the assignment is kept; a partial assignment is an error.
pub fn load_corpus(path: &Path, cfg: &PreprocessConfig) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path)
        .map_err(|source| CorpusError::Io { path: path.display().to_string(), source })?;
    read_corpus(std::io::BufReader::new(file), cfg)
}

pub fn read_corpus<R: BufRead>(reader: R, cfg: &PreprocessConfig) -> Result<Corpus, CorpusError> {
    let mut corpus = Corpus::default();
    let mut seen = HashSet::new();
    let mut with_split = 0usize;
    for (idx, line) in reader.split(b'\n').enumerate() {
        let line_no = idx + 1;
        let bytes = line.map_err(|source| CorpusError::Io { path: format!("line {line_no}"), source })?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CorpusError::Malformed {
            line: line_no,
            message: format!("invalid UTF-8 at byte offset {}", e.valid_up_to()),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(text)
            .map_err(|e| CorpusError::Malformed { line: line_no, message: e.to_string() })?;
        if !seen.insert(rec.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: rec.id });
        }
        let comment_tokens = preprocess(&rec.comment, cfg);
        if comment_tokens.is_empty() {
            corpus.dropped.empty_comment += 1;
            continue;
        }
        let code_tokens = preprocess(&rec.code, cfg);
        if code_tokens.is_empty() {
            corpus.dropped.empty_code += 1;
            continue;
        }
        if let Some(split) = rec.split {
            corpus.split.insert(rec.id.clone(), split);
            with_split += 1;
        }
        corpus.samples.push(Sample {
            id: rec.id,
            project_id: rec.project,
            code_tokens,
            ast_tokens: rec.ast.map(|a| crate::split_tokens(&a)),
            comment_tokens,
        });
    }
    if with_split != 0 && with_split != corpus.samples.len() {
        return Err(CorpusError::Malformed {
            line: 0,
            message: format!(
                "{with_split} of {} records carry a split field; expected all or none",
                corpus.samples.len()
            ),
        });
    }
    Ok(corpus)
}

/// Writes the corpus in the input format, with tokens space-joined and the
/// `split` field added when assigned.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for s in &corpus.samples {
        let rec = RawRecord {
            id: s.id.clone(),
            project: s.project_id.clone(),
            code: s.code_tokens.join(" "),
            ast: s.ast_tokens.as_ref().map(|a| a.join(" ")),
            comment: s.comment_tokens.join(" "),
            split: corpus.split_of(&s.id),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Removes samples whose comment contains any configured pattern as a
/// contiguous subsequence. Empty patterns never match.
pub fn filter_auto_generated(corpus: &Corpus, cfg: &PreprocessConfig) -> Corpus {
    let patterns: Vec<&Tokens> = cfg.auto_generated_patterns.iter().filter(|p| !p.is_empty()).collect();
    let mut out = Corpus { dropped: corpus.dropped, ..Corpus::default() };
    for s in &corpus.samples {
        if patterns.iter().any(|p| contains_subsequence(&s.comment_tokens, p)) {
            out.dropped.auto_generated += 1;
            continue;
        }
        if let Some(split) = corpus.split_of(&s.id) {
            out.split.insert(s.id.clone(), split);
        }
        out.samples.push(s.clone());
    }
    out
}

fn contains_subsequence(hay: &[String], needle: &[String]) -> bool {
    needle.len() <= hay.len() && hay.windows(needle.len()).any(|w| w == needle)
}
