//! Pre-execution crash detection and diagnosis for ML notebooks.
//!
//! Given the executed cells of a notebook and a live (or replayed) kernel
//! namespace, this crate extracts concise runtime summaries of the objects a
//! target cell references, assembles an LLM prompt from code context plus
//! runtime context, queries a provider with majority voting, and evaluates
//! predictions against a labeled benchmark corpus.

pub mod context;
pub mod docs;
pub mod error;
pub mod eval;
pub mod extract;
pub mod gateway;
pub mod kernel;
pub mod notebook;
pub mod pipeline;
pub mod prompt;
pub mod summary;
pub mod symbols;
pub mod tokens;

pub use context::{apply_config, categorize_fields, render_context, Category, ContextConfig, FieldCategoryTable};
pub use docs::{collect_call_targets, doc_token_overhead, extract_doc, DocConfig, DocSummary, TokenOverhead};
pub use error::*;
pub use eval::{cohens_kappa, detection_outcome, end_to_end_outcome, load_benchmark, metrics, sample_size, token_stats, BenchmarkCase, ConfusionCell, Metrics};
pub use gateway::{predict_with_vote, query, InstanceRecord, MockProvider, Provider, ProviderProfile, VotedPrediction};
pub use prompt::{build_prompt, parse_response, ParseStatus, Prediction, Prompt};
pub use extract::{extract_runtime_info, summarize_object, ExtractionConfig};
pub use notebook::{executed_cells, parse_notebook, CodeCell, DuplicatePolicy, Notebook};
pub use pipeline::{evaluate, predict_file, KernelSpec, PredictOptions};
pub use summary::{ObjectSummary, RuntimeContext, SummaryDoc, ValueKind};
pub use symbols::{referenced_symbols, SymbolSet};
pub use tokens::{count_tokens, CounterRegistry, TokenCounter, WhitespaceCounter};
