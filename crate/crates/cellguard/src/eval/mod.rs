//! Evaluation harness: benchmark ingestion, confusion-cell mapping for the
//! detection-only and end-to-end modes, metrics, stratification, sampling
//! plans, inter-rater agreement, and token statistics.

mod agreement;
mod metrics;
pub mod report;
mod sampling;
mod stats;

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use agreement::cohens_kappa;
pub use metrics::{f1_from_pr, metrics, stratify, Counts, Metrics, StratifyKey};
pub use sampling::{sample_size, sample_size_with, stratified_sample, SamplePlan, StratumAllocation};
pub use stats::{nearest_rank_percentile, token_stats, DistributionStats};

use crate::error::EvalError;

/// Library blamed for a crash, per the benchmark's label set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LibraryCause {
    TensorflowKeras,
    Pytorch,
    Sklearn,
    Numpy,
    Pandas,
    Other,
    Nbspecific,
}

impl LibraryCause {
    pub const ALL: [LibraryCause; 7] = [
        LibraryCause::TensorflowKeras,
        LibraryCause::Pytorch,
        LibraryCause::Sklearn,
        LibraryCause::Numpy,
        LibraryCause::Pandas,
        LibraryCause::Other,
        LibraryCause::Nbspecific,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LibraryCause::TensorflowKeras => "tensorflow_keras",
            LibraryCause::Pytorch => "pytorch",
            LibraryCause::Sklearn => "sklearn",
            LibraryCause::Numpy => "numpy",
            LibraryCause::Pandas => "pandas",
            LibraryCause::Other => "other",
            LibraryCause::Nbspecific => "nbspecific",
        }
    }
}

/// Root-cause label of a crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootCause {
    ApiMisuse,
    DataConfusion,
    ImplementationError,
    NotebookSpecific,
    Other,
}

impl RootCause {
    pub const ALL: [RootCause; 5] = [
        RootCause::ApiMisuse,
        RootCause::DataConfusion,
        RootCause::ImplementationError,
        RootCause::NotebookSpecific,
        RootCause::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RootCause::ApiMisuse => "api_misuse",
            RootCause::DataConfusion => "data_confusion",
            RootCause::ImplementationError => "implementation_error",
            RootCause::NotebookSpecific => "notebook_specific",
            RootCause::Other => "other",
        }
    }
}

/// One labeled corpus entry. Buggy and fixed variants pair by a shared stem
/// in `case_id`; `crash_label` is true exactly for the buggy variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkCase {
    pub case_id: String,
    pub notebook_path: String,
    pub target_cell_index: usize,
    pub crash_label: bool,
    pub library_cause: LibraryCause,
    pub root_cause: RootCause,
    pub diagnosis_truth: String,
    /// Optional synthetic-kernel fixture for offline extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_fixture: Option<String>,
}

impl BenchmarkCase {
    /// Pairing stem: the case id minus its variant suffix.
    pub fn stem(&self) -> &str {
        for suffix in ["_fixed", "_reproduced", "_buggy"] {
            if let Some(stem) = self.case_id.strip_suffix(suffix) {
                return stem;
            }
        }
        &self.case_id
    }
}

/// A loaded corpus plus non-fatal pairing warnings.
#[derive(Debug)]
pub struct BenchmarkLoad {
    pub cases: Vec<BenchmarkCase>,
    pub warnings: Vec<String>,
}

/// Load a line-delimited JSON benchmark manifest.
///
/// Missing label fields are load errors naming the case; unpaired cases are
/// retained with a warning.
pub fn load_benchmark(path: &Path) -> Result<BenchmarkLoad, EvalError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut cases: Vec<BenchmarkCase> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| EvalError::BadRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let case_id = value
            .get("case_id")
            .and_then(|v| v.as_str())
            .unwrap_or("<unknown>")
            .to_string();
        let case: BenchmarkCase =
            serde_json::from_value(value).map_err(|e| EvalError::BadCase {
                line: idx + 1,
                case_id: case_id.clone(),
                message: e.to_string(),
            })?;
        if case.case_id.ends_with("_fixed") && case.crash_label {
            return Err(EvalError::BadCase {
                line: idx + 1,
                case_id,
                message: "fixed variant labeled as crashing".into(),
            });
        }
        cases.push(case);
    }

    let mut by_stem: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for case in &cases {
        let entry = by_stem.entry(case.stem().to_string()).or_default();
        if case.crash_label {
            entry.0 += 1;
        } else {
            entry.1 += 1;
        }
    }
    let mut warnings = Vec::new();
    for (stem, (buggy, fixed)) in &by_stem {
        if *buggy != 1 || *fixed != 1 {
            warnings.push(format!(
                "stem `{stem}`: expected one buggy and one fixed variant, found {buggy} buggy / {fixed} fixed"
            ));
        }
    }
    Ok(BenchmarkLoad { cases, warnings })
}

/// Human verdict on a diagnosis, for a correctly detected crash.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    PartiallyCorrect,
    ReasoningWrong,
}

/// One judgment record from the judgment file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosisJudgment {
    pub case_id: String,
    pub judge_id: String,
    pub verdict: Verdict,
}

/// Load a line-delimited JSON judgment file (multiple judges allowed).
pub fn load_judgments(path: &Path) -> Result<Vec<DiagnosisJudgment>, EvalError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let judgment: DiagnosisJudgment =
            serde_json::from_str(&line).map_err(|e| EvalError::BadRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        out.push(judgment);
    }
    Ok(out)
}

/// Confusion cell of one evaluated case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConfusionCell {
    TP,
    FP,
    TN,
    FN,
}

/// Evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    DetectionOnly,
    EndToEnd,
}

/// End-to-end sub-outcome, tracking why a case landed in its cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubOutcome {
    Correct,
    PartiallyCorrect,
    ReasoningWrong,
    Wrong,
}

/// One evaluated case.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalOutcome {
    pub case_id: String,
    pub mode: EvalMode,
    pub cell: ConfusionCell,
    pub sub_outcome: Option<SubOutcome>,
}

/// Detection-only confusion mapping.
pub fn detection_outcome(pred: bool, label: bool) -> ConfusionCell {
    match (pred, label) {
        (true, true) => ConfusionCell::TP,
        (true, false) => ConfusionCell::FP,
        (false, false) => ConfusionCell::TN,
        (false, true) => ConfusionCell::FN,
    }
}

/// End-to-end confusion mapping: a detected crash counts as TP only when its
/// diagnosis is judged fully correct; partially-correct and reasoning-wrong
/// diagnoses are treated as wrong and land in FN with their sub-outcome.
pub fn end_to_end_outcome(
    case_id: &str,
    pred: bool,
    label: bool,
    judgment: Option<&DiagnosisJudgment>,
) -> Result<EvalOutcome, EvalError> {
    let needs_judgment = pred && label;
    if needs_judgment && judgment.is_none() {
        return Err(EvalError::MissingJudgment(case_id.to_string()));
    }
    if !needs_judgment && judgment.is_some() {
        return Err(EvalError::Invalid(format!(
            "case `{case_id}`: judgment supplied but detection/label are not both true"
        )));
    }
    let (cell, sub_outcome) = match (pred, label) {
        (true, true) => match judgment.expect("checked above").verdict {
            Verdict::Correct => (ConfusionCell::TP, SubOutcome::Correct),
            Verdict::PartiallyCorrect => (ConfusionCell::FN, SubOutcome::PartiallyCorrect),
            Verdict::ReasoningWrong => (ConfusionCell::FN, SubOutcome::ReasoningWrong),
        },
        (true, false) => (ConfusionCell::FP, SubOutcome::Wrong),
        (false, true) => (ConfusionCell::FN, SubOutcome::Wrong),
        (false, false) => (ConfusionCell::TN, SubOutcome::Correct),
    };
    Ok(EvalOutcome {
        case_id: case_id.to_string(),
        mode: EvalMode::EndToEnd,
        cell,
        sub_outcome: Some(sub_outcome),
    })
}

/// One prediction record as written by the pipeline and read back by the
/// harness: line-delimited JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub case_id: String,
    pub config: String,
    pub llm: String,
    pub detection: bool,
    pub reasoning: String,
    /// `(true votes, false votes)`.
    pub vote_split: (usize, usize),
    /// Per-instance latency in milliseconds.
    pub latencies: Vec<f64>,
    pub parse_statuses: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_time_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_latency_ms: Option<f64>,
}

/// Load a line-delimited prediction-record file.
pub fn load_prediction_records(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| EvalError::BadRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        out.push(record);
    }
    Ok(out)
}

/// One fully evaluated (case, llm, config) with its corpus labels, the unit
/// the stratifier works over.
#[derive(Debug, Clone)]
pub struct OutcomeRecord {
    pub case_id: String,
    pub llm: String,
    pub config: String,
    pub library_cause: LibraryCause,
    pub root_cause: RootCause,
    pub cell: ConfusionCell,
    pub sub_outcome: Option<SubOutcome>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn detection_cells() {
        assert_eq!(detection_outcome(true, true), ConfusionCell::TP);
        assert_eq!(detection_outcome(false, true), ConfusionCell::FN);
        assert_eq!(detection_outcome(true, false), ConfusionCell::FP);
        assert_eq!(detection_outcome(false, false), ConfusionCell::TN);
    }

    fn judgment(verdict: Verdict) -> DiagnosisJudgment {
        DiagnosisJudgment {
            case_id: "c".into(),
            judge_id: "j1".into(),
            verdict,
        }
    }

    #[test]
    fn correct_diagnosis_is_tp() {
        let out = end_to_end_outcome("c", true, true, Some(&judgment(Verdict::Correct))).unwrap();
        assert_eq!(out.cell, ConfusionCell::TP);
        assert_eq!(out.sub_outcome, Some(SubOutcome::Correct));
    }

    #[test]
    fn partially_correct_is_fn() {
        let out =
            end_to_end_outcome("c", true, true, Some(&judgment(Verdict::PartiallyCorrect)))
                .unwrap();
        assert_eq!(out.cell, ConfusionCell::FN);
        assert_eq!(out.sub_outcome, Some(SubOutcome::PartiallyCorrect));
    }

    #[test]
    fn reasoning_wrong_is_fn() {
        let out =
            end_to_end_outcome("c", true, true, Some(&judgment(Verdict::ReasoningWrong))).unwrap();
        assert_eq!(out.cell, ConfusionCell::FN);
        assert_eq!(out.sub_outcome, Some(SubOutcome::ReasoningWrong));
    }

    #[test]
    fn fixed_notebook_true_negative() {
        let out = end_to_end_outcome("c", false, false, None).unwrap();
        assert_eq!(out.cell, ConfusionCell::TN);
        assert_eq!(out.sub_outcome, Some(SubOutcome::Correct));
    }

    #[test]
    fn missing_judgment_is_error() {
        assert!(matches!(
            end_to_end_outcome("c", true, true, None),
            Err(EvalError::MissingJudgment(_))
        ));
    }

    #[test]
    fn unneeded_judgment_is_error() {
        assert!(end_to_end_outcome("c", false, true, Some(&judgment(Verdict::Correct))).is_err());
    }

    fn manifest_line(case_id: &str, crash: bool, lib: &str, root: &str) -> String {
        serde_json::json!({
            "case_id": case_id,
            "notebook_path": format!("notebooks/{case_id}.ipynb"),
            "target_cell_index": 5,
            "crash_label": crash,
            "library_cause": lib,
            "root_cause": root,
            "diagnosis_truth": "shape mismatch",
        })
        .to_string()
    }

    #[test]
    fn load_paired_manifest() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", manifest_line("sklearn_6_reproduced", true, "sklearn", "data_confusion")).unwrap();
        writeln!(file, "{}", manifest_line("sklearn_6_fixed", false, "sklearn", "data_confusion")).unwrap();
        let load = load_benchmark(file.path()).unwrap();
        assert_eq!(load.cases.len(), 2);
        assert!(load.warnings.is_empty());
    }

    #[test]
    fn unpaired_case_warns_but_loads() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", manifest_line("numpy_1_reproduced", true, "numpy", "api_misuse")).unwrap();
        let load = load_benchmark(file.path()).unwrap();
        assert_eq!(load.cases.len(), 1);
        assert_eq!(load.warnings.len(), 1);
    }

    #[test]
    fn missing_root_cause_is_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        let mut value: serde_json::Value =
            serde_json::from_str(&manifest_line("pandas_2_reproduced", true, "pandas", "other")).unwrap();
        value.as_object_mut().unwrap().remove("root_cause");
        writeln!(file, "{value}").unwrap();
        match load_benchmark(file.path()) {
            Err(EvalError::BadCase { case_id, .. }) => {
                assert_eq!(case_id, "pandas_2_reproduced")
            }
            other => panic!("expected BadCase, got {other:?}"),
        }
    }

    #[test]
    fn mislabeled_fixed_variant_is_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "{}", manifest_line("torch_1_fixed", true, "pytorch", "api_misuse")).unwrap();
        assert!(load_benchmark(file.path()).is_err());
    }

    #[test]
    fn prediction_record_round_trip() {
        let record = PredictionRecord {
            case_id: "sklearn_6_reproduced".into(),
            config: "+RT".into(),
            llm: "mock".into(),
            detection: true,
            reasoning: "feature count mismatch".into(),
            vote_split: (4, 1),
            latencies: vec![12.0, 11.5, 13.0, 12.2, 11.9],
            parse_statuses: vec!["ok".into(); 5],
            config_fingerprint: Some("abc123".into()),
            extraction_time_ms: Some(3.5),
            total_latency_ms: Some(20.0),
        };
        let line = serde_json::to_string(&record).unwrap();
        let back: PredictionRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back, record);
    }
}
