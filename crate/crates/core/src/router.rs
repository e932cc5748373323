//! Per-sample choice between reusing the retrieved comment (IR) and calling
//! the generator (NMT).

use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ClassifyRequest};
use crate::labeler::Candidates;
use crate::metrics::{sentence_bleu, BleuConfig, BleuMode, BleuStats, MetricError};
use crate::Tokens;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Choice {
    Ir,
    Nmt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouterKind {
    /// Sentence BLEU between input and retrieved code, thresholded.
    Lexical,
    /// Score from a classifier backend, thresholded.
    External,
    /// IR iff its sentence BLEU against the ground truth beats NMT's.
    Oracle,
    AlwaysIr,
    AlwaysNmt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouterConfig {
    pub kind: RouterKind,
    pub threshold: f64,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self { kind: RouterKind::Lexical, threshold: 0.40 }
    }
}

/// One routing outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub sample_id: String,
    pub score: f64,
    pub choice: Choice,
    pub emitted_comment: Tokens,
}

/// IR iff `score >= threshold`.
pub fn route(score: f64, threshold: f64) -> Choice {
    if score >= threshold {
        Choice::Ir
    } else {
        Choice::Nmt
    }
}

/// IR iff the IR result is strictly better; ties go to NMT.
pub fn oracle_route(bleu_ir: f64, bleu_nmt: f64) -> Choice {
    if bleu_ir > bleu_nmt {
        Choice::Ir
    } else {
        Choice::Nmt
    }
}

/// Sentence BLEU of the input code against the retrieved code (as reference).
/// An empty retrieved snippet scores 0.
pub fn lexical_score(input_code: &[String], retrieved_code: &[String], cfg: &BleuConfig) -> Result<f64, MetricError> {
    if retrieved_code.is_empty() {
        return Ok(0.0);
    }
    sentence_bleu(input_code, retrieved_code, &BleuConfig { mode: BleuMode::Sentence, ..cfg.clone() })
}

/// Clamps a classifier score into `[0, 1]`, warning when it was outside.
pub fn clamp_score(id: &str, score: f64) -> f64 {
    if (0.0..=1.0).contains(&score) {
        score
    } else {
        let c = score.clamp(0.0, 1.0);
        log::warn!("request {id}: classifier score {score} outside [0,1], clamped to {c}");
        c
    }
}

/// Asks a classifier backend how likely the retrieved result is reusable.
pub fn classify_external(
    backend: &mut dyn Backend,
    id: &str,
    input_code: &[String],
    retrieved_code: &[String],
) -> Result<f64, BackendError> {
    let score = backend.classify(ClassifyRequest {
        id: id.to_string(),
        input_code: input_code.to_vec(),
        retrieved_code: retrieved_code.to_vec(),
    })?;
    Ok(clamp_score(id, score))
}

/// Number of points in the sweep grid (0.00, 0.05, ..., 1.00).
pub const SWEEP_POINTS: usize = 21;

/// The sweep grid, computed as `i / 20` so every point is the nearest double
/// to its decimal value.
pub fn sweep_grid() -> [f64; SWEEP_POINTS] {
    std::array::from_fn(|i| i as f64 / 20.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub bleu: f64,
    pub ir_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub best_threshold: f64,
    pub best_bleu: f64,
    pub curve: Vec<SweepPoint>,
}

/// Tries every grid threshold on a dev set and keeps the one with the highest
/// combined corpus BLEU (ties to the smallest threshold).
///
/// `scores[i]` is the router score of `dev[i]`.
pub fn sweep_threshold(dev: &[Candidates], scores: &[f64], cfg: &BleuConfig) -> Result<SweepResult, MetricError> {
    if dev.is_empty() {
        return Err(MetricError::NoPairs);
    }
    assert_eq!(dev.len(), scores.len(), "one score per dev sample");
    cfg.validate()?;
    if dev.iter().any(|c| c.reference.is_empty()) {
        return Err(MetricError::EmptyReference);
    }
    // Counts per sample and source are fixed; only the selection changes.
    let stats: Vec<(BleuStats, BleuStats)> = dev
        .iter()
        .map(|c| {
            (
                BleuStats::of_pair(&c.ir_comment, &c.reference, cfg.max_n),
                BleuStats::of_pair(&c.nmt_comment, &c.reference, cfg.max_n),
            )
        })
        .collect();
    let mut curve = Vec::with_capacity(SWEEP_POINTS);
    for threshold in sweep_grid() {
        let mut ir_count = 0;
        let mut total = BleuStats::zero(cfg.max_n);
        for ((ir, nmt), &s) in stats.iter().zip(scores) {
            match route(s, threshold) {
                Choice::Ir => {
                    ir_count += 1;
                    total.add(ir);
                }
                Choice::Nmt => total.add(nmt),
            }
        }
        curve.push(SweepPoint { threshold, bleu: total.score(cfg).composite, ir_count });
    }
    let best = curve
        .iter()
        .fold(None::<&SweepPoint>, |best, p| match best {
            Some(b) if b.bleu >= p.bleu => Some(b),
            _ => Some(p),
        })
        .expect("grid nonempty");
    Ok(SweepResult { best_threshold: best.threshold, best_bleu: best.bleu, curve })
}

/// Lexical scores for a dev set, in order.
pub fn lexical_scores(dev: &[Candidates], cfg: &BleuConfig) -> Result<Vec<f64>, MetricError> {
    dev.iter().map(|c| lexical_score(&c.input_code, &c.retrieved_code, cfg)).collect()
}
