//! Triplet construction for routing classifiers.
//!
//! For each validation sample the IR comment (from top-1 retrieval) and the
//! NMT comment (from the generator backend) are scored against the ground
//! truth with sentence BLEU. The sample is positive ("IR result is better")
//! only if the IR score is strictly higher and the two outputs are not both
//! poor.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, GenerateRequest};
use crate::corpus::{Corpus, Split};
use crate::metrics::{sentence_bleu, BleuConfig, MetricError};
use crate::retrieval::{retrieve_all, Bm25Index};
use crate::{Error, Result, Tokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// When both outputs count as "poor" (and the sample cannot be positive).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BothPoorRule {
    /// Neither output shares a single word with the ground truth.
    #[default]
    ZeroUnigramOverlap,
    /// Never exclude.
    Off,
}

impl BothPoorRule {
    fn both_poor(self, truth: &[String], ir: &[String], nmt: &[String]) -> bool {
        match self {
            BothPoorRule::Off => false,
            BothPoorRule::ZeroUnigramOverlap => {
                let truth: HashSet<&str> = truth.iter().map(String::as_str).collect();
                let hits = |c: &[String]| c.iter().any(|t| truth.contains(t.as_str()));
                !hits(ir) && !hits(nmt)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    pub bleu: BleuConfig,
    pub both_poor: BothPoorRule,
    /// Fraction of triplets placed in the training subset.
    pub train_fraction: f64,
    pub seed: u64,
    /// Requests per backend batch.
    pub batch_size: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { bleu: BleuConfig::default(), both_poor: BothPoorRule::default(), train_fraction: 0.9, seed: 0, batch_size: 64 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Labeled {
    pub label: Label,
    pub bleu_ir: f64,
    pub bleu_nmt: f64,
}

/// Labels one sample from its ground truth and the two candidate comments.
pub fn label_sample(
    ground_truth: &[String],
    ir_comment: &[String],
    nmt_comment: &[String],
    cfg: &LabelConfig,
) -> Result<Labeled, MetricError> {
    if ground_truth.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let bleu_ir = sentence_bleu(ir_comment, ground_truth, &cfg.bleu)?;
    let bleu_nmt = sentence_bleu(nmt_comment, ground_truth, &cfg.bleu)?;
    let positive = bleu_ir > bleu_nmt && !cfg.both_poor.both_poor(ground_truth, ir_comment, nmt_comment);
    Ok(Labeled { label: if positive { Label::Positive } else { Label::Negative }, bleu_ir, bleu_nmt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Dev,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triplet {
    pub input_id: String,
    pub retrieved_id: String,
    pub input_code: Tokens,
    pub retrieved_code: Tokens,
    pub label: Label,
    pub bleu_ir: f64,
    pub bleu_nmt: f64,
    pub subset: Subset,
}

/// Everything needed to re-score routing decisions offline for one sample:
/// both candidate comments, the ground truth and the code pair. This is the
/// input format of the threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidates {
    pub id: String,
    #[serde(with = "joined")]
    pub input_code: Tokens,
    #[serde(with = "joined")]
    pub retrieved_code: Tokens,
    #[serde(with = "joined")]
    pub ir_comment: Tokens,
    #[serde(with = "joined")]
    pub nmt_comment: Tokens,
    #[serde(with = "joined")]
    pub reference: Tokens,
}

/// Output of [`build_triplet_dataset`], both ordered by input id.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletDataset {
    pub triplets: Vec<Triplet>,
    pub candidates: Vec<Candidates>,
}

impl TripletDataset {
    pub fn positives(&self) -> usize {
        self.triplets.iter().filter(|t| t.label.is_positive()).count()
    }

    pub fn subset(&self, subset: Subset) -> impl Iterator<Item = &Triplet> {
        self.triplets.iter().filter(move |t| t.subset == subset)
    }
}

/// Builds one triplet per validation sample.
///
/// Retrieval runs against `index` (built on the training split); the backend
/// generates the NMT comment for every sample. Any backend failure aborts with
/// the sample id. Triplets are divided into train/dev by a seeded shuffle and
/// returned sorted by input id.
pub fn build_triplet_dataset(
    corpus: &Corpus,
    index: &Bm25Index,
    backend: &mut dyn Backend,
    cfg: &LabelConfig,
) -> Result<TripletDataset> {
    let validation = corpus.require_split(Split::Validation)?;
    if !(0.0..=1.0).contains(&cfg.train_fraction) {
        return Err(Error::Invalid(format!("train_fraction {} outside [0,1]", cfg.train_fraction)));
    }
    let retrieved = retrieve_all(index, corpus, &validation)?;

    let mut nmt: Vec<Tokens> = Vec::with_capacity(validation.len());
    for chunk in validation.chunks(cfg.batch_size.max(1)) {
        let reqs: Vec<GenerateRequest> = chunk
            .iter()
            .map(|s| GenerateRequest { id: s.id.clone(), code: s.code_tokens.clone(), ast: s.ast_tokens.clone() })
            .collect();
        let out = backend.generate_batch(&reqs).map_err(|e| {
            let id = match &e {
                crate::backend::BackendError::Remote { id, .. }
                | crate::backend::BackendError::Protocol { id, .. }
                | crate::backend::BackendError::Timeout { id, .. } => id.clone(),
                _ => chunk[0].id.clone(),
            };
            Error::for_sample(&id, e)
        })?;
        nmt.extend(out);
    }

    let n = validation.len();
    let n_train = ((n as f64) * cfg.train_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let mut subset = vec![Subset::Dev; n];
    for &i in &order[..n_train] {
        subset[i] = Subset::Train;
    }

    let mut triplets = Vec::with_capacity(n);
    let mut candidates = Vec::with_capacity(n);
    for (i, sample) in validation.iter().enumerate() {
        let r = &retrieved[i];
        let retrieved_sample = corpus.get(&r.retrieved_id).expect("retrieved id comes from corpus");
        let labeled = label_sample(&sample.comment_tokens, &r.retrieved_comment, &nmt[i], cfg)
            .map_err(|e| Error::for_sample(&sample.id, e))?;
        triplets.push(Triplet {
            input_id: sample.id.clone(),
            retrieved_id: r.retrieved_id.clone(),
            input_code: sample.code_tokens.clone(),
            retrieved_code: retrieved_sample.code_tokens.clone(),
            label: labeled.label,
            bleu_ir: labeled.bleu_ir,
            bleu_nmt: labeled.bleu_nmt,
            subset: subset[i],
        });
        candidates.push(Candidates {
            id: sample.id.clone(),
            input_code: sample.code_tokens.clone(),
            retrieved_code: retrieved_sample.code_tokens.clone(),
            ir_comment: r.retrieved_comment.clone(),
            nmt_comment: nmt[i].clone(),
            reference: sample.comment_tokens.clone(),
        });
    }
    Ok(TripletDataset { triplets, candidates })
}

#[derive(Serialize, Deserialize)]
struct TripletRecord {
    input_id: String,
    retrieved_id: String,
    input_code: String,
    retrieved_code: String,
    label: u8,
    bleu_ir: f64,
    bleu_nmt: f64,
    subset: Subset,
}

pub fn write_triplets<W: Write>(triplets: &[Triplet], mut out: W) -> std::io::Result<()> {
    for t in triplets {
        let rec = TripletRecord {
            input_id: t.input_id.clone(),
            retrieved_id: t.retrieved_id.clone(),
            input_code: t.input_code.join(" "),
            retrieved_code: t.retrieved_code.join(" "),
            label: u8::from(t.label.is_positive()),
            bleu_ir: t.bleu_ir,
            bleu_nmt: t.bleu_nmt,
            subset: t.subset,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_triplets<R: BufRead>(reader: R) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("reading triplets", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: TripletRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Invalid(format!("triplet line {}: {e}", i + 1)))?;
        let label = match r.label {
            0 => Label::Negative,
            1 => Label::Positive,
            other => return Err(Error::Invalid(format!("triplet line {}: label {other} not 0/1", i + 1))),
        };
        out.push(Triplet {
            input_id: r.input_id,
            retrieved_id: r.retrieved_id,
            input_code: crate::split_tokens(&r.input_code),
            retrieved_code: crate::split_tokens(&r.retrieved_code),
            label,
            bleu_ir: r.bleu_ir,
            bleu_nmt: r.bleu_nmt,
            subset: r.subset,
        });
    }
    Ok(out)
}

pub fn write_candidates<W: Write>(candidates: &[Candidates], mut out: W) -> std::io::Result<()> {
    for c in candidates {
        serde_json::to_writer(&mut out, c)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_candidates<R: BufRead>(reader: R) -> Result<Vec<Candidates>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("reading candidates", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Invalid(format!("candidates line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}

/// Token sequences stored as one space-joined string.
pub(crate) mod joined {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &[String], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.join(" "))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
        let s = String::deserialize(d)?;
        Ok(crate::split_tokens(&s))
    }
}
