use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeteorConfig {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for MeteorConfig {
    fn default() -> Self {
        Self { alpha: 0.9, beta: 3.0, gamma: 0.5 }
    }
}

/// METEOR with exact-token unigram matching.
///
/// The alignment maximizes the number of matched tokens and, among maximal
/// alignments, minimizes the number of chunks (runs of matches contiguous in
/// both sequences). Then
///
/// ```text
/// P = m/|cand|, R = m/|ref|, F = P·R / (α·P + (1−α)·R)
/// score = (1 − γ·(chunks/m)^β) · F
/// ```
pub fn meteor(candidate: &[String], reference: &[String], cfg: &MeteorConfig) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if candidate.is_empty() {
        return Ok(0.0);
    }
    let (matches, chunks) = align(candidate, reference);
    if matches == 0 {
        return Ok(0.0);
    }
    let m = matches as f64;
    let p = m / candidate.len() as f64;
    let r = m / reference.len() as f64;
    let f = p * r / (cfg.alpha * p + (1.0 - cfg.alpha) * r);
    let frag = chunks as f64 / m;
    Ok((1.0 - cfg.gamma * frag.powf(cfg.beta)) * f)
}

/// Returns (matches, chunks) for the best alignment.
pub(crate) fn align(candidate: &[String], reference: &[String]) -> (usize, usize) {
    // Intern tokens so comparisons are integer compares.
    let mut ids: HashMap<&str, u32> = HashMap::new();
    let cand = intern_all(candidate, &mut ids);
    let refr = intern_all(reference, &mut ids);

    let mut cand_count: HashMap<u32, usize> = HashMap::new();
    let mut ref_count: HashMap<u32, usize> = HashMap::new();
    cand.iter().for_each(|&t| *cand_count.entry(t).or_default() += 1);
    refr.iter().for_each(|&t| *ref_count.entry(t).or_default() += 1);
    let target: usize = cand_count.iter().map(|(t, c)| (*c).min(ref_count.get(t).copied().unwrap_or(0))).sum();
    if target == 0 {
        return (0, 0);
    }
    if refr.len() > 128 {
        return (target, greedy_chunks(&cand, &refr));
    }
    let mut search = AlignSearch { cand: &cand, refr: &refr, target, memo: HashMap::new() };
    let links = search.best(0, 0, None).expect("maximal alignment exists");
    (target, target - links as usize)
}

fn intern_all<'a>(tokens: &'a [String], ids: &mut HashMap<&'a str, u32>) -> Vec<u32> {
    tokens
        .iter()
        .map(|t| {
            let next = ids.len() as u32;
            *ids.entry(t.as_str()).or_insert(next)
        })
        .collect()
}

struct AlignSearch<'a> {
    cand: &'a [u32],
    refr: &'a [u32],
    target: usize,
    memo: HashMap<(usize, u128, Option<usize>), Option<u32>>,
}

impl AlignSearch<'_> {
    /// Max number of adjacent links (pairs (i,j),(i+1,j+1) both aligned)
    /// achievable from candidate position `i`, given the set of used reference
    /// positions and where `i-1` was aligned. `None` when the maximal match
    /// count can no longer be reached.
    fn best(&mut self, i: usize, used: u128, prev: Option<usize>) -> Option<u32> {
        let matched = used.count_ones() as usize;
        if matched == self.target {
            return Some(0);
        }
        if i == self.cand.len() || matched + (self.cand.len() - i) < self.target {
            return None;
        }
        let key = (i, used, prev);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let tok = self.cand[i];
        let mut best = self.best(i + 1, used, None);
        for j in 0..self.refr.len() {
            if self.refr[j] != tok || used & (1u128 << j) != 0 {
                continue;
            }
            let link = u32::from(prev.is_some_and(|p| p + 1 == j));
            if let Some(rest) = self.best(i + 1, used | (1u128 << j), Some(j)) {
                let total = rest + link;
                if best.is_none_or(|b| total > b) {
                    best = Some(total);
                }
            }
        }
        self.memo.insert(key, best);
        best
    }
}

/// Left-to-right alignment preferring the reference position that extends the
/// current chunk. Only used for very long references.
fn greedy_chunks(cand: &[u32], refr: &[u32]) -> usize {
    let mut used = vec![false; refr.len()];
    let mut prev: Option<usize> = None;
    let mut chunks = 0;
    for &t in cand {
        let extend = prev.map(|p| p + 1).filter(|&j| j < refr.len() && !used[j] && refr[j] == t);
        let pick = extend.or_else(|| (0..refr.len()).find(|&j| !used[j] && refr[j] == t));
        match pick {
            Some(j) => {
                if extend.is_none() {
                    chunks += 1;
                }
                used[j] = true;
                prev = Some(j);
            }
            None => prev = None,
        }
    }
    chunks
}
