//! Test-side reference implementations, written without the crate's metric
//! code so they can serve as oracles.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use hybridsum::corpus::{load_corpus, Corpus, PreprocessConfig};

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic_corpus.jsonl")
}

pub fn fixture_corpus() -> Corpus {
    load_corpus(&fixture_path(), &PreprocessConfig::default()).unwrap()
}

fn grams(t: &[String], n: usize) -> HashMap<Vec<String>, usize> {
    let mut m = HashMap::new();
    if t.len() >= n {
        for w in t.windows(n) {
            *m.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    m
}

/// Pooled-count corpus BLEU-4 with uniform weights over the orders that have
/// at least one candidate n-gram, and no smoothing.
pub fn ref_corpus_bleu(pairs: &[(Vec<String>, Vec<String>)]) -> f64 {
    let (mut c_len, mut r_len) = (0usize, 0usize);
    let mut num = [0usize; 4];
    let mut den = [0usize; 4];
    for (c, r) in pairs {
        c_len += c.len();
        r_len += r.len();
        for n in 1..=4 {
            let rc = grams(r, n);
            for (g, k) in grams(c, n) {
                num[n - 1] += k.min(*rc.get(&g).unwrap_or(&0));
                den[n - 1] += k;
            }
        }
    }
    let used: Vec<usize> = (0..4).filter(|&i| den[i] > 0).collect();
    if used.is_empty() || used.iter().any(|&i| num[i] == 0) {
        return 0.0;
    }
    let log_p: f64 = used.iter().map(|&i| (num[i] as f64 / den[i] as f64).ln()).sum::<f64>() / used.len() as f64;
    let bp = if c_len >= r_len { 1.0 } else { (1.0 - r_len as f64 / c_len as f64).exp() };
    bp * log_p.exp()
}

/// Two-sided signed-rank p-value by enumerating all 2^n sign assignments.
pub fn brute_force_wilcoxon(paired: &[(f64, f64)]) -> (f64, f64) {
    let d: Vec<f64> = paired.iter().map(|(a, b)| a - b).filter(|x| *x != 0.0).collect();
    let n = d.len();
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let less = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let eq = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            less + (eq + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let stat = w_plus.min(total - w_plus);
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if s.min(total - s) <= stat + 1e-9 {
            hits += 1;
        }
    }
    (stat, hits as f64 / (1u64 << n) as f64)
}

/// Paired scores with two zero differences, leaving n = 30.
pub const X30: [f64; 32] = [
    0.5, 0.6, 0.9, 0.5, 0.5, 0.6, 0.2, 0.5, 0.6, 0.8, 0.1, 0.3, 0.1, 0.8, 0.7, 0.0, 1.0, 1.0, 0.7, 0.6, 0.2, 0.0, 0.5,
    0.1, 0.2, 0.2, 0.0, 0.5, 0.4, 0.8, 0.5, 0.6,
];
pub const Y30: [f64; 32] = [
    0.4, 0.5, 0.4, 0.2, 0.8, 0.8, 0.7, 0.6, 0.3, 0.2, 0.2, 0.1, 0.6, 0.3, 0.7, 0.3, 0.8, 0.7, 0.0, 0.2, 0.7, 0.4, 0.8,
    0.3, 0.1, 0.5, 0.6, 0.2, 0.1, 0.3, 0.8, 0.6,
];

/// Exact p over all 2^30 sign assignments, ties included.
pub const N30_EXACT_P: f64 = 0.764567157253623;
