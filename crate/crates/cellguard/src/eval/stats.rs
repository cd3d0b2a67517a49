//! Distribution statistics for token-overhead reporting.

use serde::Serialize;

use crate::docs::TokenOverhead;
use crate::error::EvalError;

/// Mean plus nearest-rank percentiles of one distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionStats {
    pub mean: f64,
    pub median: f64,
    pub p75: f64,
    pub p90: f64,
}

/// Nearest-rank percentile over a sorted slice: the value at 1-based rank
/// `ceil(pct/100 * n)`.
pub fn nearest_rank_percentile(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

fn distribution(values: &[f64]) -> DistributionStats {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in statistics input"));
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    DistributionStats {
        mean,
        median: nearest_rank_percentile(&sorted, 50.0),
        p75: nearest_rank_percentile(&sorted, 75.0),
        p90: nearest_rank_percentile(&sorted, 90.0),
    }
}

/// Summary statistics over token overheads: one distribution for additional
/// tokens and one for the relative increase.
pub fn token_stats(
    overheads: &[TokenOverhead],
) -> Result<(DistributionStats, DistributionStats), EvalError> {
    if overheads.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let additional: Vec<f64> = overheads.iter().map(|o| o.additional as f64).collect();
    let increase: Vec<f64> = overheads.iter().map(|o| o.increase_pct).collect();
    Ok((distribution(&additional), distribution(&increase)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overhead(base: u64, additional: u64) -> TokenOverhead {
        TokenOverhead {
            base_tokens: base,
            grounded_tokens: base + additional,
            additional,
            increase_pct: additional as f64 / base as f64,
        }
    }

    #[test]
    fn one_to_four() {
        let overheads: Vec<TokenOverhead> = (1..=4).map(|i| overhead(100, i)).collect();
        let (additional, _) = token_stats(&overheads).unwrap();
        assert_eq!(additional.mean, 2.5);
        assert_eq!(additional.median, 2.0);
        assert_eq!(additional.p75, 3.0);
        assert_eq!(additional.p90, 4.0);
    }

    #[test]
    fn singleton() {
        let (additional, increase) = token_stats(&[overhead(100, 7)]).unwrap();
        assert_eq!(additional.mean, 7.0);
        assert_eq!(additional.median, 7.0);
        assert_eq!(additional.p75, 7.0);
        assert_eq!(additional.p90, 7.0);
        assert!((increase.mean - 0.07).abs() < 1e-12);
    }

    #[test]
    fn empty_rejected() {
        assert!(token_stats(&[]).is_err());
    }

    #[test]
    fn percentiles_match_sort_oracle() {
        // Brute-force oracle: index the sorted list directly at the
        // nearest-rank position.
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for round in 0..1000 {
            let len = (next() % 50 + 1) as usize;
            let values: Vec<f64> = (0..len).map(|_| (next() % 10_000) as f64).collect();
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for pct in [50.0, 75.0, 90.0] {
                let expected = {
                    let rank = ((pct / 100.0) * len as f64).ceil() as usize;
                    sorted[rank.max(1) - 1]
                };
                let got = nearest_rank_percentile(&sorted, pct);
                assert_eq!(got, expected, "round {round}, pct {pct}, len {len}");
            }
        }
    }
}
