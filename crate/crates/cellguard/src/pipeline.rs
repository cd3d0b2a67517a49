//! End-to-end orchestration: parse a notebook, acquire a kernel view,
//! extract and filter runtime context, assemble the prompt, vote, and emit
//! prediction records; plus corpus evaluation across configurations.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use crate::context::{apply_config, render_context, ContextConfig};
use crate::docs::{ground_call_targets, render_doc_block, DocConfig};
use crate::error::PipelineError;
use crate::error::EvalError;
use crate::eval::{
    detection_outcome, end_to_end_outcome, load_benchmark, load_judgments, BenchmarkCase,
    DiagnosisJudgment, OutcomeRecord, PredictionRecord,
};
use crate::extract::{extract_runtime_info, ExtractionConfig};
use crate::gateway::{predict_with_vote, Provider, ProviderProfile, VotedPrediction};
use crate::prompt::Prompt;
use crate::kernel::{kernel_from_fixture, KernelSession, SyntheticKernel};
use crate::notebook::{executed_cells, parse_notebook, CodeCell, DuplicatePolicy, Notebook};
use crate::prompt::{build_prompt, config_fingerprint};
use crate::summary::RuntimeContext;
use crate::symbols::referenced_symbols;

/// How the pipeline obtains a kernel namespace for extraction.
#[derive(Debug, Clone, Default)]
pub enum KernelSpec {
    /// Load a synthetic namespace from a fixture file.
    Fixture(PathBuf),
    /// No kernel: every referenced symbol reports as undefined.
    #[default]
    Empty,
    /// Replay executed cells in a fresh kernel.
    Replay,
    /// Attach to an existing live session.
    Attach,
}

/// Knobs for one prediction run.
#[derive(Debug, Clone)]
pub struct PredictOptions {
    pub config: ContextConfig,
    pub votes: usize,
    pub temperature: f64,
    pub duplicate_policy: DuplicatePolicy,
    pub extraction: ExtractionConfig,
    pub docs: DocConfig,
}

impl Default for PredictOptions {
    fn default() -> Self {
        Self {
            config: ContextConfig::default(),
            votes: 5,
            temperature: 0.01,
            duplicate_policy: DuplicatePolicy::Error,
            extraction: ExtractionConfig::default(),
            docs: DocConfig::default(),
        }
    }
}

/// Everything produced by one prediction, for records and auditing.
pub struct PredictionOutput {
    pub record: PredictionRecord,
    pub voted: VotedPrediction,
    pub prompt: Prompt,
    pub context: RuntimeContext,
}

/// Materialize a kernel session per the spec.
pub fn acquire_kernel(spec: &KernelSpec) -> Result<Box<dyn KernelSession>, PipelineError> {
    match spec {
        KernelSpec::Fixture(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                PipelineError::Kernel(format!("fixture `{}`: {e}", path.display()))
            })?;
            let kernel = kernel_from_fixture(&text).map_err(|e| {
                PipelineError::Kernel(format!("fixture `{}`: {e}", path.display()))
            })?;
            Ok(Box::new(kernel))
        }
        KernelSpec::Empty => Ok(Box::new(SyntheticKernel::new())),
        KernelSpec::Replay => Err(PipelineError::Kernel(
            "replaying executed cells requires a live kernel backend, which this build does not \
             include; use --kernel-fixture for a synthetic namespace"
                .into(),
        )),
        KernelSpec::Attach => Err(PipelineError::Kernel(
            "attaching to a live session is not supported by this build; use --kernel-fixture"
                .into(),
        )),
    }
}

/// Executed cells that may inform the prompt for `target`: strictly earlier
/// in execution order, and never the target itself.
pub fn cells_before_target(
    nb: &Notebook,
    target: &CodeCell,
    policy: DuplicatePolicy,
) -> Result<Vec<CodeCell>, PipelineError> {
    let executed = executed_cells(nb, policy)?;
    Ok(executed
        .into_iter()
        .filter(|cell| {
            if cell.index == target.index {
                return false;
            }
            match (cell.execution_count, target.execution_count) {
                (Some(c), Some(t)) => c < t,
                _ => true,
            }
        })
        .collect())
}

/// Run the full prediction pipeline for one target cell of a parsed
/// notebook.
pub fn predict_cell(
    nb: &Notebook,
    target_index: usize,
    kernel_spec: &KernelSpec,
    provider: &dyn Provider,
    profile: &ProviderProfile,
    opts: &PredictOptions,
    case_id: &str,
) -> Result<PredictionOutput, PipelineError> {
    let started = Instant::now();
    let target = nb
        .cells
        .iter()
        .find(|c| c.index == target_index)
        .ok_or(PipelineError::NoSuchCell(target_index))?;
    let executed = cells_before_target(nb, target, opts.duplicate_policy)?;
    let syms = referenced_symbols(&target.source)?;

    let needs_kernel = opts.config.use_runtime || opts.config.include_api_docs;
    let kernel = if needs_kernel {
        Some(acquire_kernel(kernel_spec)?)
    } else {
        None
    };

    let context = match (&kernel, opts.config.use_runtime) {
        (Some(kernel), true) => {
            let full = extract_runtime_info(kernel.as_ref(), &syms, &opts.extraction);
            apply_config(&full, &opts.config)
        }
        _ => RuntimeContext::default(),
    };
    let ctx_text = render_context(&context);

    let doc_text = match (&kernel, opts.config.include_api_docs) {
        (Some(kernel), true) => {
            let docs = ground_call_targets(&syms, kernel.as_ref(), &opts.docs);
            Some(render_doc_block(&docs))
        }
        _ => None,
    };

    let prompt = build_prompt(
        &executed,
        &ctx_text,
        doc_text.as_deref(),
        target,
        &opts.config,
    )?;
    let voted = predict_with_vote(provider, profile, &prompt, opts.votes, opts.temperature)?;
    let total_latency = started.elapsed();

    let record = PredictionRecord {
        case_id: case_id.to_string(),
        config: opts.config.name(),
        llm: profile.id.clone(),
        detection: voted.detection,
        reasoning: voted.reasoning.clone(),
        vote_split: voted.vote_split,
        latencies: voted
            .instances
            .iter()
            .map(|i| i.latency.as_secs_f64() * 1000.0)
            .collect(),
        parse_statuses: voted
            .instances
            .iter()
            .map(|i| i.prediction.parse_status.as_str().to_string())
            .collect(),
        config_fingerprint: Some(config_fingerprint(&opts.config)),
        extraction_time_ms: Some(context.extraction_time.as_secs_f64() * 1000.0),
        total_latency_ms: Some(total_latency.as_secs_f64() * 1000.0),
    };

    Ok(PredictionOutput {
        record,
        voted,
        prompt,
        context,
    })
}

/// Predict a target cell of a notebook file.
pub fn predict_file(
    notebook_path: &Path,
    target_index: usize,
    kernel_spec: &KernelSpec,
    provider: &dyn Provider,
    profile: &ProviderProfile,
    opts: &PredictOptions,
) -> Result<PredictionOutput, PipelineError> {
    let bytes = std::fs::read(notebook_path)?;
    let nb = parse_notebook(&bytes, &notebook_path.to_string_lossy())?;
    let case_id = notebook_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| notebook_path.to_string_lossy().into_owned());
    predict_cell(&nb, target_index, kernel_spec, provider, profile, opts, &case_id)
}

/// Extract and render the runtime context only (the `extract` command).
pub fn extract_context(
    notebook_path: &Path,
    target_index: usize,
    kernel_spec: &KernelSpec,
    opts: &PredictOptions,
) -> Result<RuntimeContext, PipelineError> {
    let bytes = std::fs::read(notebook_path)?;
    let nb = parse_notebook(&bytes, &notebook_path.to_string_lossy())?;
    let target = nb
        .cells
        .iter()
        .find(|c| c.index == target_index)
        .ok_or(PipelineError::NoSuchCell(target_index))?;
    let syms = referenced_symbols(&target.source)?;
    let kernel = acquire_kernel(kernel_spec)?;
    let full = extract_runtime_info(kernel.as_ref(), &syms, &opts.extraction);
    Ok(apply_config(&full, &opts.config))
}

/// Results of a corpus evaluation.
pub struct EvaluationRun {
    pub records: Vec<PredictionRecord>,
    /// Per-case failures; the run continues past them.
    pub failures: Vec<String>,
    pub warnings: Vec<String>,
}

/// Evaluate every (case, configuration) pair of a benchmark manifest.
///
/// Cases run in parallel up to `jobs`; within a case only the vote queries
/// are concurrent. Failures are collected, not fatal.
pub fn evaluate(
    manifest: &Path,
    configs: &[ContextConfig],
    provider: Arc<dyn Provider>,
    profile: &ProviderProfile,
    opts: &PredictOptions,
    jobs: usize,
) -> Result<EvaluationRun, PipelineError> {
    let load = load_benchmark(manifest)?;
    let manifest_dir = manifest.parent().unwrap_or_else(|| Path::new("."));

    let units: Vec<(&BenchmarkCase, &ContextConfig)> = load
        .cases
        .iter()
        .flat_map(|case| configs.iter().map(move |cfg| (case, cfg)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PipelineError::Kernel(format!("thread pool: {e}")))?;

    let results: Vec<Result<PredictionRecord, String>> = pool.install(|| {
        units
            .par_iter()
            .map(|(case, config)| {
                let mut case_opts = opts.clone();
                case_opts.config = (*config).clone();
                let kernel_spec = match &case.kernel_fixture {
                    Some(fixture) => KernelSpec::Fixture(manifest_dir.join(fixture)),
                    None => KernelSpec::Empty,
                };
                let notebook_path = manifest_dir.join(&case.notebook_path);
                predict_file(
                    &notebook_path,
                    case.target_cell_index,
                    &kernel_spec,
                    provider.as_ref(),
                    profile,
                    &case_opts,
                )
                .map(|output| PredictionRecord {
                    case_id: case.case_id.clone(),
                    ..output.record
                })
                .map_err(|e| format!("case `{}` ({}): {e}", case.case_id, config.name()))
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(record) => records.push(record),
            Err(message) => failures.push(message),
        }
    }
    records.sort_by(|a, b| (&a.case_id, &a.config).cmp(&(&b.case_id, &b.config)));
    Ok(EvaluationRun {
        records,
        failures,
        warnings: load.warnings,
    })
}

/// Join prediction records with corpus labels into detection outcomes.
pub fn detection_records(
    records: &[PredictionRecord],
    cases: &[BenchmarkCase],
) -> Vec<OutcomeRecord> {
    let by_id: std::collections::BTreeMap<&str, &BenchmarkCase> =
        cases.iter().map(|c| (c.case_id.as_str(), c)).collect();
    records
        .iter()
        .filter_map(|record| {
            let case = by_id.get(record.case_id.as_str())?;
            Some(OutcomeRecord {
                case_id: record.case_id.clone(),
                llm: record.llm.clone(),
                config: record.config.clone(),
                library_cause: case.library_cause,
                root_cause: case.root_cause,
                cell: detection_outcome(record.detection, case.crash_label),
                sub_outcome: None,
            })
        })
        .collect()
}

/// Pick the primary judge: widest coverage, then lexicographic id.
fn primary_judge(judgments: &[DiagnosisJudgment]) -> Option<String> {
    let mut coverage: std::collections::BTreeMap<&str, usize> = Default::default();
    for j in judgments {
        *coverage.entry(j.judge_id.as_str()).or_default() += 1;
    }
    coverage
        .into_iter()
        .max_by(|(id_a, n_a), (id_b, n_b)| n_a.cmp(n_b).then(id_b.cmp(id_a)))
        .map(|(id, _)| id.to_string())
}

/// Join prediction records, corpus labels, and diagnosis judgments into
/// end-to-end outcomes. Judgments from the primary judge are used; a missing
/// judgment for a required case is an error.
pub fn end_to_end_records(
    records: &[PredictionRecord],
    cases: &[BenchmarkCase],
    judgments: &[DiagnosisJudgment],
) -> Result<Vec<OutcomeRecord>, EvalError> {
    let by_id: std::collections::BTreeMap<&str, &BenchmarkCase> =
        cases.iter().map(|c| (c.case_id.as_str(), c)).collect();
    let judge = primary_judge(judgments);
    let by_case: std::collections::BTreeMap<&str, &DiagnosisJudgment> = judgments
        .iter()
        .filter(|j| Some(&j.judge_id) == judge.as_ref())
        .map(|j| (j.case_id.as_str(), j))
        .collect();

    let mut out = Vec::new();
    for record in records {
        let Some(case) = by_id.get(record.case_id.as_str()) else {
            continue;
        };
        let judgment = if record.detection && case.crash_label {
            Some(
                *by_case
                    .get(record.case_id.as_str())
                    .ok_or_else(|| EvalError::MissingJudgment(record.case_id.clone()))?,
            )
        } else {
            None
        };
        let outcome =
            end_to_end_outcome(&record.case_id, record.detection, case.crash_label, judgment)?;
        out.push(OutcomeRecord {
            case_id: record.case_id.clone(),
            llm: record.llm.clone(),
            config: record.config.clone(),
            library_cause: case.library_cause,
            root_cause: case.root_cause,
            cell: outcome.cell,
            sub_outcome: outcome.sub_outcome,
        });
    }
    Ok(out)
}

/// Write prediction records as line-delimited JSON.
pub fn write_records(records: &[PredictionRecord], path: &Path) -> Result<(), PipelineError> {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Load judgments from an optional path.
pub fn load_judgments_opt(
    path: Option<&Path>,
) -> Result<Vec<DiagnosisJudgment>, PipelineError> {
    match path {
        Some(p) => Ok(load_judgments(p)?),
        None => Ok(Vec::new()),
    }
}
