use std::collections::HashMap;

use super::bleu::ngram_counts;
use super::MetricError;

const MAX_N: usize = 4;

/// Mean per-sample CIDEr over `(candidate, reference)` pairs, one reference
/// per candidate.
pub fn cider(pairs: &[(&[String], &[String])]) -> Result<f64, MetricError> {
    let scores = cider_per_sample(pairs)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Per-sample CIDEr: for n = 1..4 the cosine similarity of TF-IDF n-gram
/// vectors, combined with uniform weights 1/4.
///
/// Document frequencies come from the references (one document per sample);
/// `idf(g) = ln(N / max(1, df(g)))`. A zero-norm vector on either side gives a
/// cosine of 0. No length penalty and no ×10 scaling are applied.
pub fn cider_per_sample(pairs: &[(&[String], &[String])]) -> Result<Vec<f64>, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::NoPairs);
    }
    if pairs.iter().any(|(_, r)| r.is_empty()) {
        return Err(MetricError::EmptyReference);
    }
    let n_docs = pairs.len() as f64;
    let mut scores = vec![0.0; pairs.len()];
    for n in 1..=MAX_N {
        let ref_counts: Vec<HashMap<&[String], usize>> = pairs.iter().map(|(_, r)| ngram_counts(r, n)).collect();
        let mut df: HashMap<&[String], usize> = HashMap::new();
        for counts in &ref_counts {
            for g in counts.keys() {
                *df.entry(g).or_default() += 1;
            }
        }
        let idf = |g: &[String]| (n_docs / df.get(g).copied().unwrap_or(0).max(1) as f64).ln();
        for (k, (cand, _)) in pairs.iter().enumerate() {
            let cand_counts = ngram_counts(cand, n);
            let cv = tfidf(&cand_counts, &idf);
            let rv = tfidf(&ref_counts[k], &idf);
            scores[k] += cosine(&cv, &rv) / MAX_N as f64;
        }
    }
    Ok(scores)
}

fn tfidf<'a>(counts: &HashMap<&'a [String], usize>, idf: &impl Fn(&[String]) -> f64) -> HashMap<&'a [String], f64> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(g, &c)| (*g, c as f64 / total as f64 * idf(g))).collect()
}

fn cosine(a: &HashMap<&[String], f64>, b: &HashMap<&[String], f64>) -> f64 {
    // Sum in a fixed order so results do not depend on hash iteration order.
    let mut keys: Vec<&&[String]> = a.keys().filter(|k| b.contains_key(**k)).collect();
    keys.sort();
    let dot: f64 = keys.iter().map(|k| a[**k] * b[**k]).sum();
    let norm = |v: &HashMap<&[String], f64>| {
        let mut vals: Vec<(&&[String], &f64)> = v.iter().collect();
        vals.sort_by(|x, y| x.0.cmp(y.0));
        vals.iter().map(|(_, x)| *x * *x).sum::<f64>().sqrt()
    };
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
