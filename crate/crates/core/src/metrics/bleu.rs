use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    /// Zero n-gram matches count as `epsilon` matches.
    Epsilon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuMode {
    Sentence,
    Corpus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BleuConfig {
    pub max_n: usize,
    pub weights: Vec<f64>,
    pub smoothing: Smoothing,
    pub mode: BleuMode,
}

impl Default for BleuConfig {
    fn default() -> Self {
        Self { max_n: 4, weights: vec![0.25; 4], smoothing: Smoothing::None, mode: BleuMode::Sentence }
    }
}

impl BleuConfig {
    pub fn with_epsilon(eps: f64) -> Self {
        Self { smoothing: Smoothing::Epsilon(eps), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.max_n == 0 {
            return Err(MetricError::Config("max_n must be at least 1".into()));
        }
        if self.weights.len() != self.max_n {
            return Err(MetricError::Config(format!(
                "expected {} weights, got {}",
                self.max_n,
                self.weights.len()
            )));
        }
        let sum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(MetricError::Config("weights must be non-negative and sum to 1".into()));
        }
        if let Smoothing::Epsilon(e) = self.smoothing {
            if !(e.is_finite() && e > 0.0) {
                return Err(MetricError::Config("epsilon must be positive".into()));
            }
        }
        Ok(())
    }

    /// Weights for the first `used` orders, rescaled to sum to 1.
    fn weights_up_to(&self, used: usize) -> Vec<f64> {
        let head = &self.weights[..used];
        let sum: f64 = head.iter().sum();
        if sum > 0.0 {
            head.iter().map(|w| w / sum).collect()
        } else {
            vec![1.0 / used as f64; used]
        }
    }
}

pub fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Matches of candidate n-grams, clipped by reference counts.
fn clipped_matches(candidate: &[String], reference: &[String], n: usize) -> usize {
    let reference = ngram_counts(reference, n);
    ngram_counts(candidate, n)
        .into_iter()
        .map(|(g, c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len > ref_len {
        1.0
    } else if cand_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

/// Sentence-level BLEU of one candidate against one reference.
///
/// Orders above the candidate length are dropped and the remaining weights
/// rescaled, so a one-word candidate is scored on unigrams alone. Without
/// smoothing, any zero precision makes the score 0.
///
/// ```
/// use hybridsum::metrics::{sentence_bleu, BleuConfig};
/// use hybridsum::toks;
///
/// let cfg = BleuConfig::default();
/// let s = sentence_bleu(&toks(&["a", "b", "c", "d"]), &toks(&["a", "b", "c", "d", "e"]), &cfg).unwrap();
/// assert!((s - (1.0f64 - 5.0 / 4.0).exp()).abs() < 1e-12);
/// ```
pub fn sentence_bleu(candidate: &[String], reference: &[String], cfg: &BleuConfig) -> Result<f64, MetricError> {
    cfg.validate()?;
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let used = cfg.max_n.min(candidate.len());
    let weights = cfg.weights_up_to(used);
    let mut log_sum = 0.0;
    for (k, w) in weights.iter().enumerate() {
        let n = k + 1;
        let denom = (candidate.len() - n + 1) as f64;
        let matches = clipped_matches(candidate, reference, n);
        let p = if matches > 0 {
            matches as f64 / denom
        } else {
            match cfg.smoothing {
                Smoothing::None => return Ok(0.0),
                Smoothing::Epsilon(eps) => eps / denom,
            }
        };
        log_sum += w * p.ln();
    }
    Ok(brevity_penalty(candidate.len(), reference.len()) * log_sum.exp())
}

/// Result of [`corpus_bleu`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusBleu {
    pub composite: f64,
    /// Individual BLEU_n = BP · p_n for n = 1..=max_n.
    pub per_n: Vec<f64>,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
}

/// Pooled n-gram counts for one or more candidate/reference pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct BleuStats {
    num: Vec<usize>,
    den: Vec<usize>,
    cand_len: usize,
    ref_len: usize,
}

impl BleuStats {
    pub(crate) fn zero(max_n: usize) -> Self {
        Self { num: vec![0; max_n], den: vec![0; max_n], cand_len: 0, ref_len: 0 }
    }

    pub(crate) fn of_pair(cand: &[String], refr: &[String], max_n: usize) -> Self {
        let mut s = Self::zero(max_n);
        s.cand_len = cand.len();
        s.ref_len = refr.len();
        for n in 1..=max_n {
            s.num[n - 1] = clipped_matches(cand, refr, n);
            s.den[n - 1] = cand.len().saturating_sub(n - 1);
        }
        s
    }

    pub(crate) fn add(&mut self, other: &Self) {
        for (a, b) in self.num.iter_mut().zip(&other.num) {
            *a += b;
        }
        for (a, b) in self.den.iter_mut().zip(&other.den) {
            *a += b;
        }
        self.cand_len += other.cand_len;
        self.ref_len += other.ref_len;
    }

    pub(crate) fn score(&self, cfg: &BleuConfig) -> CorpusBleu {
        let bp = brevity_penalty(self.cand_len, self.ref_len);
        let precisions: Vec<f64> =
            self.num.iter().zip(&self.den).map(|(&m, &d)| if d == 0 { 0.0 } else { m as f64 / d as f64 }).collect();
        let per_n = precisions.iter().map(|p| bp * p).collect();

        let used = self.den.iter().take_while(|&&d| d > 0).count();
        let composite = if used == 0 || precisions[..used].iter().any(|&p| p == 0.0) {
            0.0
        } else {
            let weights = cfg.weights_up_to(used);
            let log_sum: f64 = weights.iter().zip(&precisions).map(|(w, p)| w * p.ln()).sum();
            bp * log_sum.exp()
        };
        CorpusBleu { composite, per_n, precisions, brevity_penalty: bp }
    }
}

/// Corpus-level BLEU with pooled n-gram counts and a corpus-wide brevity
/// penalty. Never smoothed. Orders with no candidate n-grams anywhere in the
/// corpus are left out of the composite (their per-n value is 0).
pub fn corpus_bleu(pairs: &[(&[String], &[String])], cfg: &BleuConfig) -> Result<CorpusBleu, MetricError> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(MetricError::NoPairs);
    }
    if pairs.iter().any(|(_, r)| r.is_empty()) {
        return Err(MetricError::EmptyReference);
    }
    let mut total = BleuStats::zero(cfg.max_n);
    for (cand, refr) in pairs {
        total.add(&BleuStats::of_pair(cand, refr, cfg.max_n));
    }
    Ok(total.score(cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toks;
    use proptest::prelude::*;

    fn sb(c: &[&str], r: &[&str]) -> f64 {
        sentence_bleu(&toks(c), &toks(r), &BleuConfig::default()).unwrap()
    }

    #[test]
    fn identity() {
        assert_eq!(sb(&["the", "cat", "sat", "on", "mat"], &["the", "cat", "sat", "on", "mat"]), 1.0);
        assert_eq!(sb(&["set"], &["set"]), 1.0);
    }

    #[test]
    fn brevity_only() {
        let s = sb(&["a", "b", "c", "d"], &["a", "b", "c", "d", "e"]);
        assert!((s - 0.778_800_783_071_404_9).abs() < 1e-12, "{s}");
    }

    #[test]
    fn disjoint_is_zero() {
        assert_eq!(sb(&["x", "y"], &["a", "b", "c"]), 0.0);
    }

    #[test]
    fn empty_candidate_and_reference() {
        assert_eq!(sb(&[], &["a"]), 0.0);
        assert_eq!(
            sentence_bleu(&toks(&["a"]), &[], &BleuConfig::default()),
            Err(MetricError::EmptyReference)
        );
    }

    #[test]
    fn clipping() {
        // "the the the" vs "the cat": p1 = 1/3, no bigram match -> 0 unsmoothed
        assert_eq!(sb(&["the", "the", "the"], &["the", "cat"]), 0.0);
        let cfg = BleuConfig { max_n: 1, weights: vec![1.0], ..BleuConfig::default() };
        let s = sentence_bleu(&toks(&["the", "the", "the"]), &toks(&["the", "cat"]), &cfg).unwrap();
        assert!((s - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn epsilon_smoothing_is_positive() {
        let s = sentence_bleu(&toks(&["a", "x"]), &toks(&["a", "b"]), &BleuConfig::with_epsilon(1e-9)).unwrap();
        // p1 = 1/2, p2 = 1e-9/1, weights 1/2 each, BP = 1
        let expect = (0.5f64.ln() * 0.5 + (1e-9f64).ln() * 0.5).exp();
        assert!((s - expect).abs() < 1e-15);
    }

    #[test]
    fn bad_config() {
        let cfg = BleuConfig { max_n: 2, weights: vec![1.0], ..BleuConfig::default() };
        assert!(matches!(sentence_bleu(&toks(&["a"]), &toks(&["a"]), &cfg), Err(MetricError::Config(_))));
    }

    #[test]
    fn corpus_identity_and_individual_orders() {
        let c1 = toks(&["a", "b", "c", "d"]);
        let c2 = toks(&["e", "f", "g", "h", "i"]);
        let pairs = [(c1.as_slice(), c1.as_slice()), (c2.as_slice(), c2.as_slice())];
        let cb = corpus_bleu(&pairs, &BleuConfig::default()).unwrap();
        assert_eq!(cb.composite, 1.0);
        assert_eq!(cb.per_n, vec![1.0; 4]);
    }

    proptest! {
        #[test]
        fn singleton_corpus_equals_sentence(
            c in prop::collection::vec(0u8..6, 0..12),
            r in prop::collection::vec(0u8..6, 1..12),
        ) {
            let c: Vec<String> = c.iter().map(|x| format!("w{x}")).collect();
            let r: Vec<String> = r.iter().map(|x| format!("w{x}")).collect();
            let cfg = BleuConfig::default();
            let s = sentence_bleu(&c, &r, &cfg).unwrap();
            let cb = corpus_bleu(&[(c.as_slice(), r.as_slice())], &cfg).unwrap();
            prop_assert!((s - cb.composite).abs() < 1e-12, "{} vs {}", s, cb.composite);
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }
}
