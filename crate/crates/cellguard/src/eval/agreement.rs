//! Inter-rater agreement.

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::EvalError;

/// Cohen's kappa over two equal-length category sequences:
/// `(p_o - p_e) / (1 - p_e)`, defined as 1.0 when expected agreement is
/// 1 and the raters agree everywhere.
pub fn cohens_kappa<T: Eq + Hash>(labels_a: &[T], labels_b: &[T]) -> Result<f64, EvalError> {
    if labels_a.len() != labels_b.len() {
        return Err(EvalError::LengthMismatch(labels_a.len(), labels_b.len()));
    }
    if labels_a.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = labels_a.len() as f64;
    let observed = labels_a
        .iter()
        .zip(labels_b)
        .filter(|(a, b)| a == b)
        .count() as f64
        / n;

    let mut count_a: HashMap<&T, usize> = HashMap::new();
    let mut count_b: HashMap<&T, usize> = HashMap::new();
    for a in labels_a {
        *count_a.entry(a).or_default() += 1;
    }
    for b in labels_b {
        *count_b.entry(b).or_default() += 1;
    }
    let expected: f64 = count_a
        .iter()
        .map(|(category, &ca)| {
            let cb = count_b.get(category).copied().unwrap_or(0);
            (ca as f64 / n) * (cb as f64 / n)
        })
        .sum();

    if (1.0 - expected).abs() < f64::EPSILON {
        // Both raters constant on the same category: they agree everywhere.
        return Ok(1.0);
    }
    Ok((observed - expected) / (1.0 - expected))
}
