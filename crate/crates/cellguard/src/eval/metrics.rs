//! Detection metrics and stratification.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{ConfusionCell, LibraryCause, OutcomeRecord, RootCause};
use crate::error::EvalError;

/// Confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub r#fn: u64,
}

impl Counts {
    pub fn add(&mut self, cell: ConfusionCell) {
        match cell {
            ConfusionCell::TP => self.tp += 1,
            ConfusionCell::FP => self.fp += 1,
            ConfusionCell::TN => self.tn += 1,
            ConfusionCell::FN => self.r#fn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.r#fn
    }
}

impl FromIterator<ConfusionCell> for Counts {
    fn from_iter<T: IntoIterator<Item = ConfusionCell>>(iter: T) -> Self {
        let mut counts = Counts::default();
        for cell in iter {
            counts.add(cell);
        }
        counts
    }
}

/// Precision/recall/F1/accuracy. Undefined values stay `None` and are
/// reported as "undefined", never coerced to 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: f64,
    pub counts: Counts,
}

/// F1 from precision and recall.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Compute metrics from confusion counts.
///
/// Precision is undefined when TP+FP = 0, recall when TP+FN = 0, and F1 when
/// either is undefined.
pub fn metrics(counts: Counts) -> Result<Metrics, EvalError> {
    let total = counts.total();
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }
    let precision = (counts.tp + counts.fp > 0)
        .then(|| counts.tp as f64 / (counts.tp + counts.fp) as f64);
    let recall = (counts.tp + counts.r#fn > 0)
        .then(|| counts.tp as f64 / (counts.tp + counts.r#fn) as f64);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => Some(f1_from_pr(p, r)),
        _ => None,
    };
    let accuracy = (counts.tp + counts.tn) as f64 / total as f64;
    Ok(Metrics {
        precision,
        recall,
        f1,
        accuracy,
        counts,
    })
}

/// Grouping key for stratified metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StratifyKey {
    LibraryCause,
    RootCause,
    Llm,
    Config,
}

impl StratifyKey {
    pub fn of(&self, record: &OutcomeRecord) -> String {
        match self {
            StratifyKey::LibraryCause => record.library_cause.as_str().to_string(),
            StratifyKey::RootCause => record.root_cause.as_str().to_string(),
            StratifyKey::Llm => record.llm.clone(),
            StratifyKey::Config => record.config.clone(),
        }
    }
}

/// Metrics per group, plus notes for label-set groups with zero cases.
pub fn stratify(
    records: &[OutcomeRecord],
    key: StratifyKey,
) -> (BTreeMap<String, Metrics>, Vec<String>) {
    let mut grouped: BTreeMap<String, Counts> = BTreeMap::new();
    for record in records {
        grouped.entry(key.of(record)).or_default().add(record.cell);
    }
    let mut out = BTreeMap::new();
    for (group, counts) in grouped {
        if let Ok(m) = metrics(counts) {
            out.insert(group, m);
        }
    }
    let mut notes = Vec::new();
    let known: Vec<String> = match key {
        StratifyKey::LibraryCause => LibraryCause::ALL.iter().map(|l| l.as_str().into()).collect(),
        StratifyKey::RootCause => RootCause::ALL.iter().map(|r| r.as_str().into()).collect(),
        _ => Vec::new(),
    };
    for group in known {
        if !out.contains_key(&group) {
            notes.push(format!("group `{group}` omitted: no cases"));
        }
    }
    (out, notes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Counts {
        Counts {
            tp,
            fp,
            tn,
            r#fn: fn_,
        }
    }

    #[test]
    fn perfect_classifier() {
        let m = metrics(counts(5, 0, 5, 0)).unwrap();
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.f1, Some(1.0));
        assert_eq!(m.accuracy, 1.0);
    }

    #[test]
    fn undefined_precision_convention() {
        let m = metrics(counts(0, 0, 3, 1)).unwrap();
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
        assert_eq!(m.accuracy, 0.75);
    }

    #[test]
    fn zero_total_is_error() {
        assert!(matches!(metrics(Counts::default()), Err(EvalError::EmptyInput)));
    }

    #[test]
    fn f1_matches_reported_row() {
        // Detection-only baseline row: P 79.0, R 71.2 reported as F1 74.9.
        let f1 = f1_from_pr(0.790, 0.712);
        assert!((f1 - 0.749).abs() < 0.0015, "f1 = {f1}");
    }

    #[test]
    fn f1_zero_when_both_zero() {
        assert_eq!(f1_from_pr(0.0, 0.0), 0.0);
    }

    fn record(lib: LibraryCause, cell: ConfusionCell) -> OutcomeRecord {
        OutcomeRecord {
            case_id: "c".into(),
            llm: "mock".into(),
            config: "+RT".into(),
            library_cause: lib,
            root_cause: RootCause::ApiMisuse,
            cell,
            sub_outcome: None,
        }
    }

    #[test]
    fn stratify_two_libraries() {
        let records = vec![
            record(LibraryCause::Pandas, ConfusionCell::TP),
            record(LibraryCause::Pandas, ConfusionCell::TN),
            record(LibraryCause::Numpy, ConfusionCell::FN),
            record(LibraryCause::Numpy, ConfusionCell::TN),
        ];
        let (groups, notes) = stratify(&records, StratifyKey::LibraryCause);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups["pandas"].accuracy, 1.0);
        assert_eq!(groups["numpy"].accuracy, 0.5);
        // The other five library groups are noted as empty.
        assert_eq!(notes.len(), 5);
    }

    #[test]
    fn stratify_by_root_cause_groups() {
        let mut records = Vec::new();
        for root in [RootCause::ApiMisuse, RootCause::DataConfusion, RootCause::ImplementationError] {
            let mut r = record(LibraryCause::Sklearn, ConfusionCell::TP);
            r.root_cause = root;
            records.push(r);
        }
        let (groups, _) = stratify(&records, StratifyKey::RootCause);
        let keys: Vec<&str> = groups.keys().map(String::as_str).collect();
        assert_eq!(keys, vec!["api_misuse", "data_confusion", "implementation_error"]);
    }
}
