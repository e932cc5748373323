//! Evaluation metrics for generated comments and routing classifiers.
//!
//! All text metrics operate on preprocessed token sequences; no
//! detokenization happens before scoring.

mod bleu;
mod cider;
mod classification;
mod meteor;
mod rouge;
mod wilcoxon;

pub(crate) use bleu::BleuStats;
pub use bleu::{corpus_bleu, ngram_counts, sentence_bleu, BleuConfig, BleuMode, CorpusBleu, Smoothing};
pub use cider::{cider, cider_per_sample};
pub use classification::{classification_metrics, ClassificationMetrics, Confusion};
pub use meteor::{meteor, MeteorConfig};
pub use rouge::{lcs_len, rouge_l};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonMethod, WilcoxonResult, EXACT_MAX_N};

use serde::{Deserialize, Serialize};

use crate::Tokens;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("reference is empty")]
    EmptyReference,
    #[error("candidate is empty")]
    EmptyCandidate,
    #[error("no candidate/reference pairs to score")]
    NoPairs,
    #[error("invalid metric config: {0}")]
    Config(String),
    #[error("all confusion counts are zero")]
    ZeroCounts,
    #[error("need at least {needed} non-zero differences, found {found}")]
    TooFewPairs { needed: usize, found: usize },
}

/// Per-sample sentence-level scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleScores {
    pub id: String,
    pub bleu: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

/// Corpus-level metric row, values in `[0, 1]` (CIDEr unbounded above).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub bleu_1: f64,
    pub bleu_2: f64,
    pub bleu_3: f64,
    pub bleu_4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_sample: Option<Vec<SampleScores>>,
}

/// Options for [`evaluate`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub bleu: BleuConfig,
    pub meteor: MeteorConfig,
}

/// One scored prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub candidate: Tokens,
    pub reference: Tokens,
}

/// Scores a set of predictions with the full metric suite.
///
/// BLEU is corpus-level (pooled counts); METEOR and ROUGE-L are averaged over
/// samples; CIDEr is the mean per-sample score. Predictions are sorted by id
/// first, so the result does not depend on input order.
pub fn evaluate(preds: &[Prediction], opts: &MetricOptions, keep_per_sample: bool) -> Result<MetricReport, MetricError> {
    if preds.is_empty() {
        return Err(MetricError::NoPairs);
    }
    let mut sorted: Vec<&Prediction> = preds.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let pairs: Vec<(&[String], &[String])> =
        sorted.iter().map(|p| (p.candidate.as_slice(), p.reference.as_slice())).collect();

    let corpus_cfg = BleuConfig { mode: BleuMode::Corpus, smoothing: Smoothing::None, ..opts.bleu.clone() };
    let cb = corpus_bleu(&pairs, &corpus_cfg)?;
    let sent_cfg = BleuConfig { mode: BleuMode::Sentence, ..opts.bleu.clone() };

    let ciders = cider_per_sample(&pairs)?;
    let mut per_sample = Vec::with_capacity(sorted.len());
    for (p, c) in sorted.iter().zip(&ciders) {
        let meteor = if p.candidate.is_empty() { 0.0 } else { meteor(&p.candidate, &p.reference, &opts.meteor)? };
        let rouge_l = if p.candidate.is_empty() { 0.0 } else { rouge_l(&p.candidate, &p.reference)? };
        per_sample.push(SampleScores {
            id: p.id.clone(),
            bleu: sentence_bleu(&p.candidate, &p.reference, &sent_cfg)?,
            meteor,
            rouge_l,
            cider: *c,
        });
    }
    let n = per_sample.len() as f64;
    let mean = |f: fn(&SampleScores) -> f64| per_sample.iter().map(f).sum::<f64>() / n;
    let per_n = |k: usize| cb.per_n.get(k).copied().unwrap_or(0.0);
    Ok(MetricReport {
        bleu: cb.composite,
        bleu_1: per_n(0),
        bleu_2: per_n(1),
        bleu_3: per_n(2),
        bleu_4: per_n(3),
        meteor: mean(|s| s.meteor),
        rouge_l: mean(|s| s.rouge_l),
        cider: mean(|s| s.cider),
        per_sample: keep_per_sample.then_some(per_sample),
    })
}
