use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::MetricError;

/// Largest number of non-zero differences handled by the exact null
/// distribution; above this the tie- and continuity-corrected normal
/// approximation is used.
pub const EXACT_MAX_N: usize = 25;

const MIN_PAIRS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// min(W+, W−)
    pub statistic: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Number of non-zero differences used.
    pub n: usize,
    pub method: WilcoxonMethod,
}

/// Two-sided Wilcoxon signed-rank test on paired scores.
///
/// Zero differences are dropped and tied absolute differences share the
/// average rank. For up to [`EXACT_MAX_N`] pairs the p-value is
/// `P(min(W+, W−) ≤ observed)` under the exact sign-flip null distribution
/// (ties included), computed by dynamic programming over doubled ranks.
pub fn wilcoxon_signed_rank(paired: &[(f64, f64)]) -> Result<WilcoxonResult, MetricError> {
    let diffs: Vec<f64> = paired.iter().map(|(a, b)| a - b).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n < MIN_PAIRS {
        return Err(MetricError::TooFewPairs { needed: MIN_PAIRS, found: n });
    }
    let (ranks2, tie_sizes) = doubled_ranks(&diffs);
    let w_plus2: u64 = diffs.iter().zip(&ranks2).filter(|(d, _)| **d > 0.0).map(|(_, r)| *r).sum();
    let total2: u64 = ranks2.iter().sum();
    let stat2 = w_plus2.min(total2 - w_plus2);
    let statistic = stat2 as f64 / 2.0;

    if n <= EXACT_MAX_N {
        let counts = sign_sum_distribution(&ranks2);
        let extreme: u64 = counts
            .iter()
            .enumerate()
            .filter(|(s, _)| {
                let s = *s as u64;
                s <= stat2 || s >= total2 - stat2
            })
            .map(|(_, c)| *c)
            .sum();
        let p_value = (extreme as f64 / 2f64.powi(n as i32)).min(1.0);
        return Ok(WilcoxonResult { statistic, p_value, n, method: WilcoxonMethod::Exact });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = tie_sizes.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let dev = (w_plus2 as f64 / 2.0 - mean).abs() - 0.5;
    let p_value = if dev <= 0.0 || var <= 0.0 {
        1.0
    } else {
        erfc(dev / var.sqrt() / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(WilcoxonResult { statistic, p_value, n, method: WilcoxonMethod::Normal })
}

/// Average ranks of |d| times two (always integral), plus tie-group sizes.
fn doubled_ranks(diffs: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks2 = vec![0u64; diffs.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        // positions i..=j hold ranks i+1..=j+1; their sum doubled over count
        let avg2 = (i + 1 + j + 1) as u64;
        for &k in &order[i..=j] {
            ranks2[k] = avg2;
        }
        ties.push((j - i + 1) as u64);
        i = j + 1;
    }
    (ranks2, ties)
}

/// counts[s] = number of sign assignments whose positive-rank sum (doubled) is s.
fn sign_sum_distribution(ranks2: &[u64]) -> Vec<u64> {
    let total: usize = ranks2.iter().sum::<u64>() as usize;
    let mut counts = vec![0u64; total + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in ranks2 {
        let r = r as usize;
        for s in (0..=reach).rev() {
            let c = counts[s];
            if c != 0 {
                counts[s + r] += c;
            }
        }
        reach += r;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zero_differences() {
        let pairs = vec![(0.5, 0.5); 10];
        assert_eq!(
            wilcoxon_signed_rank(&pairs),
            Err(MetricError::TooFewPairs { needed: 6, found: 0 })
        );
    }

    #[test]
    fn constant_shift() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 0.1 + 0.3, i as f64 * 0.1)).collect();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(r.statistic, 0.0);
        // all ten |d| tie: every assignment other than all-plus / all-minus is less extreme
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn distinct_ranks_small() {
        // d = 1..6 all positive: W- = 0, p = 2/64
        let pairs: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 0.0)).collect();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        assert!((r.p_value - 2.0 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn balanced_gives_one() {
        // ranks 1..6 with signs + - + - + - ... W+ = 1+3+5 = 9, W- = 12; total 21
        let d = [1.0, -2.0, 3.0, -4.0, 5.0, -6.0];
        let pairs: Vec<(f64, f64)> = d.iter().map(|&x| (x, 0.0)).collect();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(r.statistic, 9.0);
        assert!(r.p_value > 0.5);
    }

    #[test]
    fn doubled_ranks_average_ties() {
        let (r, t) = doubled_ranks(&[1.0, -1.0, 2.0, 3.0, 3.0, 3.0]);
        assert_eq!(r, vec![3, 3, 6, 10, 10, 10]);
        assert_eq!(t, vec![2, 1, 3]);
    }

    #[test]
    fn normal_branch_used_above_25() {
        let pairs: Vec<(f64, f64)> = (1..=30).map(|i| (if i % 3 == 0 { -(i as f64) } else { i as f64 }, 0.0)).collect();
        let r = wilcoxon_signed_rank(&pairs).unwrap();
        assert_eq!(r.method, WilcoxonMethod::Normal);
        assert!((0.0..=1.0).contains(&r.p_value));
    }
}
