//! Scripted mock provider for offline runs and tests.
//!
//! A script is JSON lines. Each entry holds one or more responses and an
//! optional `match` substring tested against the prompt; the first matching
//! entry answers the request, entries without `match` are the fallback.
//! Responses within an entry play in order and the last one repeats.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{CompletionRequest, Provider};

struct ScriptEntry {
    matcher: Option<String>,
    responses: Vec<String>,
    cursor: AtomicUsize,
}

impl ScriptEntry {
    fn next_response(&self) -> Option<String> {
        if self.responses.is_empty() {
            return None;
        }
        let idx = self.cursor.fetch_add(1, Ordering::SeqCst);
        Some(self.responses[idx.min(self.responses.len() - 1)].clone())
    }
}

/// What the mock saw in one request, for assertions.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub temperature: Option<f64>,
    pub schema_present: bool,
    pub prompt_len: usize,
}

pub struct MockProvider {
    entries: Vec<ScriptEntry>,
    transport_failures: AtomicUsize,
    failure_message: Option<String>,
    always_fail: bool,
    recorded: Mutex<Vec<RecordedRequest>>,
}

impl MockProvider {
    /// Replay the given responses in order (last repeats).
    pub fn sequence(responses: Vec<String>) -> Self {
        Self {
            entries: vec![ScriptEntry {
                matcher: None,
                responses,
                cursor: AtomicUsize::new(0),
            }],
            transport_failures: AtomicUsize::new(0),
            failure_message: None,
            always_fail: false,
            recorded: Mutex::new(Vec::new()),
        }
    }

    /// Fail `n` times with `message`, then answer `response` forever.
    pub fn failing_times(n: usize, message: &str, response: &str) -> Self {
        Self {
            entries: vec![ScriptEntry {
                matcher: None,
                responses: vec![response.to_string()],
                cursor: AtomicUsize::new(0),
            }],
            transport_failures: AtomicUsize::new(n),
            failure_message: Some(message.to_string()),
            always_fail: false,
            recorded: Mutex::new(Vec::new()),
        }
    }

    /// Every request is a transport failure.
    pub fn always_failing(message: &str) -> Self {
        Self {
            entries: Vec::new(),
            transport_failures: AtomicUsize::new(0),
            failure_message: Some(message.to_string()),
            always_fail: true,
            recorded: Mutex::new(Vec::new()),
        }
    }

    /// Parse a JSON-lines script.
    pub fn from_script(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let value: serde_json::Value =
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", idx + 1))?;
            let matcher = value
                .get("match")
                .and_then(|m| m.as_str())
                .map(str::to_string);
            let responses: Vec<String> = if let Some(single) = value.get("response") {
                vec![render_response(single)]
            } else if let Some(many) = value.get("responses").and_then(|r| r.as_array()) {
                many.iter().map(render_response).collect()
            } else {
                return Err(format!(
                    "line {}: entry needs `response` or `responses`",
                    idx + 1
                ));
            };
            entries.push(ScriptEntry {
                matcher,
                responses,
                cursor: AtomicUsize::new(0),
            });
        }
        if entries.is_empty() {
            return Err("script has no entries".into());
        }
        Ok(Self {
            entries,
            transport_failures: AtomicUsize::new(0),
            failure_message: None,
            always_fail: false,
            recorded: Mutex::new(Vec::new()),
        })
    }

    pub fn recorded(&self) -> Vec<RecordedRequest> {
        self.recorded.lock().expect("mock lock").clone()
    }
}

/// Script responses may be raw strings or JSON objects (serialized compactly).
fn render_response(value: &serde_json::Value) -> String {
    match value {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

impl Provider for MockProvider {
    fn id(&self) -> &str {
        "mock"
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, String> {
        self.recorded.lock().expect("mock lock").push(RecordedRequest {
            temperature: request.temperature,
            schema_present: request.schema.is_some(),
            prompt_len: request.prompt.len(),
        });
        if self.always_fail {
            return Err(self.failure_message.clone().unwrap_or_default());
        }
        let remaining = self.transport_failures.load(Ordering::SeqCst);
        if remaining > 0 {
            self.transport_failures.store(remaining - 1, Ordering::SeqCst);
            return Err(self.failure_message.clone().unwrap_or_default());
        }

        let matched = self
            .entries
            .iter()
            .find(|e| {
                e.matcher
                    .as_ref()
                    .map(|m| request.prompt.contains(m.as_str()))
                    .unwrap_or(false)
            })
            .or_else(|| self.entries.iter().find(|e| e.matcher.is_none()));
        match matched.and_then(|e| e.next_response()) {
            Some(response) => Ok(response),
            None => Err("mock script has no matching entry".into()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::time::Duration;

    fn request(prompt: &str) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.to_string(),
            temperature: None,
            schema: None,
            timeout: Duration::from_secs(1),
        }
    }

    #[test]
    fn match_routes_by_prompt_substring() {
        let script = r#"
{"match": "case_a", "response": {"reasoning": "a", "detection": true}}
{"match": "case_b", "response": {"reasoning": "b", "detection": false}}
{"response": {"reasoning": "default", "detection": false}}
"#;
        let mock = MockProvider::from_script(script).unwrap();
        let a = mock.complete(&request("prompt for case_a here")).unwrap();
        assert!(a.contains("\"a\""));
        let b = mock.complete(&request("prompt for case_b here")).unwrap();
        assert!(b.contains("\"b\""));
        let d = mock.complete(&request("something else")).unwrap();
        assert!(d.contains("default"));
    }

    #[test]
    fn sequence_repeats_last() {
        let mock = MockProvider::sequence(vec!["one".into(), "two".into()]);
        assert_eq!(mock.complete(&request("p")).unwrap(), "one");
        assert_eq!(mock.complete(&request("p")).unwrap(), "two");
        assert_eq!(mock.complete(&request("p")).unwrap(), "two");
    }

    #[test]
    fn bad_script_rejected() {
        assert!(MockProvider::from_script("{\"match\": \"x\"}\n").is_err());
        assert!(MockProvider::from_script("").is_err());
    }
}
