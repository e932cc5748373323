use super::MetricError;

/// Length of the longest common subsequence.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-L F-score with β = P/R, taken literally:
///
/// ```text
/// P = LCS/|cand|, R = LCS/|ref|, F = (1+β²)·P·R / (R + β²·P)
/// ```
///
/// With β = P/R this is not symmetric in candidate and reference unless the
/// two have equal length.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> Result<f64, MetricError> {
    if reference.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    if candidate.is_empty() {
        return Err(MetricError::EmptyCandidate);
    }
    let lcs = lcs_len(reference, candidate);
    if lcs == 0 {
        return Ok(0.0);
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let beta2 = (p / r).powi(2);
    Ok((1.0 + beta2) * p * r / (r + beta2 * p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toks;

    #[test]
    fn identity_and_disjoint() {
        let t = toks(&["a", "b", "c"]);
        assert_eq!(rouge_l(&t, &t).unwrap(), 1.0);
        assert_eq!(rouge_l(&toks(&["x"]), &t).unwrap(), 0.0);
    }

    #[test]
    fn hand_fixture() {
        // P = 1, R = 2/3, β = 1.5 -> 3.25·(2/3) / (2/3 + 2.25)
        let f = rouge_l(&toks(&["a", "c"]), &toks(&["a", "b", "c"])).unwrap();
        assert!((f - 0.742_857_142_857_142_8).abs() < 1e-12, "{f}");
    }

    #[test]
    fn swapped_arguments() {
        let a = toks(&["a", "c"]);
        let b = toks(&["a", "b", "c"]);
        let ab = rouge_l(&a, &b).unwrap();
        let ba = rouge_l(&b, &a).unwrap();
        // swapped: P = 2/3, R = 1, β = 2/3, evaluated from the formula as written
        let expect_ba = (1.0 + 4.0 / 9.0) * (2.0 / 3.0) / (1.0 + (4.0 / 9.0) * (2.0 / 3.0));
        assert!((ba - expect_ba).abs() < 1e-12);
        // With β = P/R the F-score reduces to (P²+R²)·P·R / (P³+R³), which is
        // symmetric in P and R, so swapping never changes the value.
        assert!((ab - ba).abs() < 1e-12);
        let c = toks(&["b", "a", "c"]);
        assert_eq!(rouge_l(&b, &c).unwrap(), rouge_l(&c, &b).unwrap());
    }

    #[test]
    fn errors() {
        assert_eq!(rouge_l(&[], &toks(&["a"])), Err(MetricError::EmptyCandidate));
        assert_eq!(rouge_l(&toks(&["a"]), &[]), Err(MetricError::EmptyReference));
    }

    #[test]
    fn lcs() {
        assert_eq!(lcs_len(&toks(&["a", "b", "c", "d"]), &toks(&["b", "d", "a"])), 2);
        assert_eq!(lcs_len(&[], &toks(&["a"])), 0);
    }
}
