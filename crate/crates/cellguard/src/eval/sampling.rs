//! Sample-size estimation and stratified sampling plans.

use rand::seq::index::sample as index_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EvalError;

/// Required sample size for a finite population:
///
/// `n = N * Z^2 * p * (1-p) / (E^2 * (N-1) + Z^2 * p * (1-p))`, rounded up.
pub fn sample_size_with(population: u64, z: f64, p: f64, e: f64) -> u64 {
    if population == 0 {
        return 0;
    }
    let variance_term = z * z * p * (1.0 - p);
    let numerator = population as f64 * variance_term;
    let denominator = e * e * (population as f64 - 1.0) + variance_term;
    (numerator / denominator).ceil() as u64
}

/// Sample size at 95% confidence, maximum variability, 5% margin of error.
pub fn sample_size(population: u64) -> u64 {
    sample_size_with(population, 1.96, 0.5, 0.05)
}

/// Per-stratum share of a sampling plan.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StratumAllocation {
    pub stratum: String,
    pub size: usize,
    pub proportion: f64,
    pub allocated: usize,
}

/// A realized stratified sampling plan.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SamplePlan {
    pub target: usize,
    pub realized_total: usize,
    pub allocations: Vec<StratumAllocation>,
    pub selected: Vec<String>,
    pub seed: u64,
}

/// Proportional stratified sampling with per-stratum allocation rounded up,
/// so the realized total may exceed the target; selection within a stratum
/// is uniform under the seed.
pub fn stratified_sample(
    cases: &[(String, String)],
    target: usize,
    seed: u64,
) -> Result<SamplePlan, EvalError> {
    let total = cases.len();
    if target > total {
        return Err(EvalError::SampleTooLarge {
            target,
            population: total,
        });
    }
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }

    let mut strata: std::collections::BTreeMap<String, Vec<&str>> = Default::default();
    for (case_id, stratum) in cases {
        strata.entry(stratum.clone()).or_default().push(case_id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut allocations = Vec::with_capacity(strata.len());
    let mut selected = Vec::new();
    for (stratum, members) in &strata {
        let size = members.len();
        let exact = size as f64 * target as f64 / total as f64;
        let allocated = exact.ceil() as usize;
        let indices = index_sample(&mut rng, size, allocated.min(size));
        let mut chosen: Vec<String> = indices.iter().map(|i| members[i].to_string()).collect();
        chosen.sort();
        selected.extend(chosen);
        allocations.push(StratumAllocation {
            stratum: stratum.clone(),
            size,
            proportion: size as f64 / total as f64,
            allocated,
        });
    }
    let realized_total = allocations.iter().map(|a| a.allocated).sum();
    Ok(SamplePlan {
        target,
        realized_total,
        allocations,
        selected,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_501_needs_218() {
        assert_eq!(sample_size(501), 218);
    }

    #[test]
    fn population_of_one() {
        assert_eq!(sample_size(1), 1);
    }

    #[test]
    fn large_population_limit() {
        // Limit of the formula is Z^2 p (1-p) / E^2 = 384.16; ceiling 385.
        assert_eq!(sample_size(1_000_000_000), 385);
    }

    #[test]
    fn six_strata_plan_matches_allocation() {
        // Strata sized (90, 99, 71, 74, 79, 88) at target 218 allocate
        // (40, 44, 31, 33, 35, 39), realized total 222.
        let sizes = [90usize, 99, 71, 74, 79, 88];
        let mut cases = Vec::new();
        for (s, size) in sizes.iter().enumerate() {
            for i in 0..*size {
                cases.push((format!("case_{s}_{i:03}"), format!("stratum_{s}")));
            }
        }
        let plan = stratified_sample(&cases, 218, 7).unwrap();
        let allocated: Vec<usize> = plan.allocations.iter().map(|a| a.allocated).collect();
        assert_eq!(allocated, vec![40, 44, 31, 33, 35, 39]);
        assert_eq!(plan.realized_total, 222);
        assert_eq!(plan.selected.len(), 222);
    }

    #[test]
    fn single_stratum_plain_uniform() {
        let cases: Vec<(String, String)> =
            (0..50).map(|i| (format!("c{i}"), "all".to_string())).collect();
        let plan = stratified_sample(&cases, 10, 1).unwrap();
        assert_eq!(plan.realized_total, 10);
        assert_eq!(plan.selected.len(), 10);
        let unique: std::collections::BTreeSet<&String> = plan.selected.iter().collect();
        assert_eq!(unique.len(), 10);
    }

    #[test]
    fn seed_reproducibility() {
        let cases: Vec<(String, String)> = (0..40)
            .map(|i| (format!("c{i}"), format!("s{}", i % 3)))
            .collect();
        let a = stratified_sample(&cases, 20, 42).unwrap();
        let b = stratified_sample(&cases, 20, 42).unwrap();
        let c = stratified_sample(&cases, 20, 43).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_ne!(a.selected, c.selected);
    }

    #[test]
    fn target_above_population_rejected() {
        let cases = vec![("a".to_string(), "s".to_string())];
        assert!(stratified_sample(&cases, 2, 0).is_err());
    }
}
