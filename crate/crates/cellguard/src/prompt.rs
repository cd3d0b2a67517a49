//! Prompt assembly and response parsing.
//!
//! The prompt combines the instruction template, the executed cells in
//! execution order, the rendered runtime context (omitted entirely under
//! `-RT`), an optional API-doc block, and the target cell. Assembly is
//! byte-deterministic; every prompt carries a fingerprint tying it to the
//! configuration and template version that produced it.

use std::ops::Range;

use sha2::{Digest, Sha256};

use crate::context::ContextConfig;
use crate::error::PromptError;
use crate::notebook::CodeCell;

/// Instruction template, stored as a versioned resource.
pub const PROMPT_TEMPLATE: &str = include_str!("../data/prompt_template.txt");
pub const TEMPLATE_VERSION: &str = "1";

/// An assembled prompt with an auditable section map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub text: String,
    /// `(label, byte span)` pairs tiling `text`.
    pub sections: Vec<(String, Range<usize>)>,
    /// Hash of the context configuration and template version.
    pub config_fingerprint: String,
}

/// How strictly responses are validated against the output schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Extra keys are ignored.
    #[default]
    Lenient,
    /// No additional keys accepted.
    Strict,
}

/// Outcome of parsing one raw response.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseStatus {
    Ok,
    Recovered,
    Failed,
}

impl ParseStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParseStatus::Ok => "ok",
            ParseStatus::Recovered => "recovered",
            ParseStatus::Failed => "failed",
        }
    }
}

/// A parsed crash prediction. Parse failure abstains: `detection` is false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub reasoning: String,
    pub detection: bool,
    pub parse_status: ParseStatus,
    pub raw_response: String,
}

/// Fingerprint of a configuration plus the template version.
pub fn config_fingerprint(cfg: &ContextConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg.fingerprint_material());
    hasher.update(";template=");
    hasher.update(TEMPLATE_VERSION);
    let digest = hasher.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn ensure_trailing_newline(text: &str) -> String {
    if text.ends_with('\n') {
        text.to_string()
    } else {
        format!("{text}\n")
    }
}

/// Assemble the crash-detection prompt.
///
/// The runtime section is omitted entirely when `ctx_text` is empty, and the
/// doc section when `doc_text` is absent or empty. Equal inputs yield
/// byte-identical prompts.
pub fn build_prompt(
    cells: &[CodeCell],
    ctx_text: &str,
    doc_text: Option<&str>,
    target: &CodeCell,
    cfg: &ContextConfig,
) -> Result<Prompt, PromptError> {
    if target.source.trim().is_empty() {
        return Err(PromptError::EmptyTarget);
    }

    let mut text = String::new();
    let mut sections: Vec<(String, Range<usize>)> = Vec::new();
    let mut mark = |label: &str, text: &mut String, body: &str| {
        let start = text.len();
        text.push_str(body);
        sections.push((label.to_string(), start..text.len()));
    };

    mark("header", &mut text, PROMPT_TEMPLATE);

    let mut executed = String::from("\n[Executed Cells]\n");
    for cell in cells {
        let count = cell
            .execution_count
            .map(|c| c.to_string())
            .unwrap_or_else(|| "?".into());
        executed.push_str(&format!("# Cell {count}\n"));
        executed.push_str(&ensure_trailing_newline(&cell.source));
        executed.push('\n');
    }
    mark("executed_cells", &mut text, &executed);

    if !ctx_text.is_empty() {
        let runtime = format!(
            "[Runtime Information]\n{}\n",
            ensure_trailing_newline(ctx_text)
        );
        mark("runtime_info", &mut text, &runtime);
    }

    if let Some(doc) = doc_text {
        if !doc.is_empty() {
            let docs = format!("[API Documentation]\n{}\n", ensure_trailing_newline(doc));
            mark("api_docs", &mut text, &docs);
        }
    }

    let target_section = format!("[Target Cell]\n{}", ensure_trailing_newline(&target.source));
    mark("target_cell", &mut text, &target_section);

    Ok(Prompt {
        text,
        sections,
        config_fingerprint: config_fingerprint(cfg),
    })
}

/// JSON schema of the expected response, for providers that enforce output
/// schemas server-side.
pub fn response_schema() -> serde_json::Value {
    serde_json::json!({
        "type": "object",
        "properties": {
            "reasoning": {"type": "string"},
            "detection": {"type": "boolean"}
        },
        "required": ["reasoning", "detection"],
        "additionalProperties": false
    })
}

fn validate_object(value: &serde_json::Value, mode: ParseMode) -> Option<(String, bool)> {
    let obj = value.as_object()?;
    let reasoning = obj.get("reasoning")?.as_str()?.to_string();
    let detection = obj.get("detection")?.as_bool()?;
    if mode == ParseMode::Strict && obj.len() != 2 {
        return None;
    }
    Some((reasoning, detection))
}

/// Candidate balanced `{...}` substrings, in order of appearance.
fn balanced_objects(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut depth = 0usize;
            let mut in_string = false;
            let mut escaped = false;
            let mut end = None;
            for (j, &b) in bytes.iter().enumerate().skip(i) {
                if in_string {
                    if escaped {
                        escaped = false;
                    } else if b == b'\\' {
                        escaped = true;
                    } else if b == b'"' {
                        in_string = false;
                    }
                    continue;
                }
                match b {
                    b'"' => in_string = true,
                    b'{' => depth += 1,
                    b'}' => {
                        depth -= 1;
                        if depth == 0 {
                            end = Some(j);
                            break;
                        }
                    }
                    _ => {}
                }
            }
            if let Some(end) = end {
                out.push(&text[i..=end]);
            }
        }
        i += 1;
    }
    out
}

/// Parse a raw LLM response into a prediction. Total: any unparseable
/// response abstains with `detection = false` and `parse_status = failed`.
pub fn parse_response(raw: &str) -> Prediction {
    parse_response_with(raw, ParseMode::Lenient)
}

pub fn parse_response_with(raw: &str, mode: ParseMode) -> Prediction {
    let trimmed = raw.trim();

    // An exact single JSON object.
    if let Ok(value) = serde_json::from_str::<serde_json::Value>(trimmed) {
        if let Some((reasoning, detection)) = validate_object(&value, mode) {
            return Prediction {
                reasoning,
                detection,
                parse_status: ParseStatus::Ok,
                raw_response: raw.to_string(),
            };
        }
    }

    // JSON inside a fenced code block, or embedded in prose.
    for candidate in balanced_objects(trimmed) {
        if let Ok(value) = serde_json::from_str::<serde_json::Value>(candidate) {
            if let Some((reasoning, detection)) = validate_object(&value, mode) {
                return Prediction {
                    reasoning,
                    detection,
                    parse_status: ParseStatus::Recovered,
                    raw_response: raw.to_string(),
                };
            }
        }
    }

    Prediction {
        reasoning: String::new(),
        detection: false,
        parse_status: ParseStatus::Failed,
        raw_response: raw.to_string(),
    }
}
