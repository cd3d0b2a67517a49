//! Provider-agnostic LLM access implementing the querying protocol:
//! temperature control where supported, schema-enforced output where
//! supported, retries with an attempt log, latency capture, and odd-count
//! majority voting.

mod mock;

#[cfg(feature = "http-provider")]
mod http;

use std::sync::Arc;
use std::time::{Duration, Instant};

pub use mock::{MockProvider, RecordedRequest};

#[cfg(feature = "http-provider")]
pub use http::HttpProvider;

use crate::error::GatewayError;
use crate::prompt::{parse_response, response_schema, ParseStatus, Prediction, Prompt};

/// Capabilities and limits of one provider deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct ProviderProfile {
    pub id: String,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub supports_temperature: bool,
    pub supports_schema_enforced_output: bool,
    pub request_timeout: Duration,
    pub max_retries: u32,
    /// Serialize requests to this provider (a crude rate limit).
    pub serialize_requests: bool,
}

impl Default for ProviderProfile {
    fn default() -> Self {
        Self {
            id: "default".into(),
            endpoint: None,
            model: None,
            supports_temperature: true,
            supports_schema_enforced_output: false,
            request_timeout: Duration::from_secs(60),
            max_retries: 2,
            serialize_requests: false,
        }
    }
}

impl ProviderProfile {
    /// Parse a key-value profile file (`key = value`, `#` comments).
    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let mut profile = Self::default();
        let mut saw_id = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| {
                    GatewayError::Profile(format!("line {}: expected key = value", idx + 1))
                })?;
            let parse_bool = |v: &str| match v {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                other => Err(GatewayError::Profile(format!(
                    "line {}: `{other}` is not a boolean",
                    idx + 1
                ))),
            };
            match key {
                "id" => {
                    profile.id = value.to_string();
                    saw_id = true;
                }
                "endpoint" => profile.endpoint = Some(value.to_string()),
                "model" => profile.model = Some(value.to_string()),
                "supports_temperature" => profile.supports_temperature = parse_bool(value)?,
                "supports_schema_enforced_output" => {
                    profile.supports_schema_enforced_output = parse_bool(value)?
                }
                "request_timeout_ms" => {
                    let ms: u64 = value.parse().map_err(|_| {
                        GatewayError::Profile(format!("line {}: bad timeout", idx + 1))
                    })?;
                    profile.request_timeout = Duration::from_millis(ms);
                }
                "max_retries" => {
                    profile.max_retries = value.parse().map_err(|_| {
                        GatewayError::Profile(format!("line {}: bad max_retries", idx + 1))
                    })?;
                }
                "serialize_requests" => profile.serialize_requests = parse_bool(value)?,
                other => {
                    return Err(GatewayError::Profile(format!(
                        "line {}: unknown key `{other}`",
                        idx + 1
                    )))
                }
            }
        }
        if !saw_id {
            return Err(GatewayError::Profile("profile is missing `id`".into()));
        }
        Ok(profile)
    }

    /// Profile used with the built-in mock provider.
    pub fn mock() -> Self {
        Self {
            id: "mock".into(),
            ..Self::default()
        }
    }

    /// Environment variable holding this provider's credential.
    pub fn credential_variable(&self) -> String {
        format!(
            "{}_API_KEY",
            self.id.to_uppercase().replace(['-', '.'], "_")
        )
    }
}

/// One completion request as handed to a provider.
#[derive(Debug, Clone)]
pub struct CompletionRequest {
    pub prompt: String,
    /// Absent when the provider does not support temperature control.
    pub temperature: Option<f64>,
    /// Response schema, present only under schema-enforced output.
    pub schema: Option<serde_json::Value>,
    pub timeout: Duration,
}

/// A raw-completion backend. `Err` strings are transport failures and are
/// retried by the gateway.
pub trait Provider: Send + Sync {
    fn id(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<String, String>;
}

/// One query instance: the parsed prediction plus accounting.
#[derive(Debug, Clone)]
pub struct InstanceRecord {
    pub prediction: Prediction,
    /// Wall time of the successful attempt only; retry backoff excluded.
    pub latency: Duration,
    pub attempt_count: u32,
}

/// Majority-vote verdict over an odd number of instances.
#[derive(Debug, Clone)]
pub struct VotedPrediction {
    pub detection: bool,
    /// Reasoning of the lowest-index instance agreeing with the majority.
    pub reasoning: String,
    pub instances: Vec<InstanceRecord>,
    pub vote_split: (usize, usize),
}

fn build_request(profile: &ProviderProfile, prompt: &Prompt, temperature: f64) -> CompletionRequest {
    CompletionRequest {
        prompt: prompt.text.clone(),
        temperature: profile.supports_temperature.then_some(temperature),
        // Schema-enforced mode falls back to the prompt-level schema when
        // the provider does not support it; the template already carries it.
        schema: profile
            .supports_schema_enforced_output
            .then(response_schema),
        timeout: profile.request_timeout,
    }
}

/// Issue one query: retries transport failures up to `max_retries`, performs
/// one automatic re-query on a parse failure, and abstains (detection false)
/// when the re-query fails to parse as well.
pub fn query(
    provider: &dyn Provider,
    profile: &ProviderProfile,
    prompt: &Prompt,
    temperature: f64,
) -> Result<InstanceRecord, GatewayError> {
    let request = build_request(profile, prompt, temperature);
    let max_attempts = 1 + profile.max_retries;
    let mut attempts = 0u32;
    let mut parse_requeried = false;
    let mut log: Vec<String> = Vec::new();

    loop {
        attempts += 1;
        let started = Instant::now();
        match provider.complete(&request) {
            Err(transport) => {
                log.push(format!("attempt {attempts}: transport: {transport}"));
                if attempts >= max_attempts {
                    return Err(GatewayError::Transport {
                        provider: profile.id.clone(),
                        attempts,
                        log,
                    });
                }
                std::thread::sleep(Duration::from_millis(25 * attempts as u64));
            }
            Ok(raw) => {
                let latency = started.elapsed();
                let prediction = parse_response(&raw);
                if prediction.parse_status != ParseStatus::Failed {
                    return Ok(InstanceRecord {
                        prediction,
                        latency,
                        attempt_count: attempts,
                    });
                }
                if !parse_requeried && attempts < max_attempts {
                    parse_requeried = true;
                    log.push(format!("attempt {attempts}: parse failure, re-querying"));
                    continue;
                }
                // Repeated parse failure abstains rather than erroring, so
                // abstention rates flow into evaluation.
                return Ok(InstanceRecord {
                    prediction,
                    latency,
                    attempt_count: attempts,
                });
            }
        }
    }
}

/// Query `votes` times (concurrently) and take the majority detection.
///
/// Instances are indexed at dispatch; the reported reasoning is from the
/// lowest-index instance whose detection equals the majority, which makes
/// the selection deterministic regardless of completion order.
pub fn predict_with_vote(
    provider: &dyn Provider,
    profile: &ProviderProfile,
    prompt: &Prompt,
    votes: usize,
    temperature: f64,
) -> Result<VotedPrediction, GatewayError> {
    if votes == 0 || votes % 2 == 0 {
        return Err(GatewayError::BadVoteCount(votes));
    }

    let results: Vec<Result<InstanceRecord, GatewayError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..votes)
            .map(|_| scope.spawn(|| query(provider, profile, prompt, temperature)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("vote thread panicked"))
            .collect()
    });

    let mut instances = Vec::with_capacity(votes);
    for (index, result) in results.into_iter().enumerate() {
        match result {
            Ok(record) => instances.push(record),
            Err(source) => {
                return Err(GatewayError::Vote {
                    index,
                    completed: instances.len(),
                    source: Box::new(source),
                })
            }
        }
    }

    Ok(tally_votes(instances))
}

/// Deterministic reduction of instance records into a voted prediction.
pub fn tally_votes(instances: Vec<InstanceRecord>) -> VotedPrediction {
    let true_count = instances
        .iter()
        .filter(|r| r.prediction.detection)
        .count();
    let false_count = instances.len() - true_count;
    let detection = true_count > false_count;
    let reasoning = instances
        .iter()
        .find(|r| r.prediction.detection == detection)
        .map(|r| r.prediction.reasoning.clone())
        .unwrap_or_default();
    VotedPrediction {
        detection,
        reasoning,
        instances,
        vote_split: (true_count, false_count),
    }
}

/// Build a provider from a CLI spec: `mock:<fixture path>` or a path to a
/// profile file (requires the `http-provider` feature).
pub fn provider_from_spec(
    spec: &str,
) -> Result<(ProviderProfile, Arc<dyn Provider>), GatewayError> {
    if spec == "mock" {
        return Ok((ProviderProfile::mock(), Arc::new(MockProvider::sequence(vec![]))));
    }
    if let Some(path) = spec.strip_prefix("mock:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Profile(format!("mock fixture `{path}`: {e}")))?;
        let provider = MockProvider::from_script(&text)
            .map_err(|e| GatewayError::Profile(format!("mock fixture `{path}`: {e}")))?;
        return Ok((ProviderProfile::mock(), Arc::new(provider)));
    }

    let text = std::fs::read_to_string(spec)
        .map_err(|e| GatewayError::Profile(format!("profile `{spec}`: {e}")))?;
    let profile = ProviderProfile::parse(&text)?;
    #[cfg(feature = "http-provider")]
    {
        let provider = HttpProvider::from_profile(&profile)?;
        Ok((profile, Arc::new(provider)))
    }
    #[cfg(not(feature = "http-provider"))]
    {
        Err(GatewayError::Profile(
            "built without the http-provider feature; only mock providers are available".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::ContextConfig;
    use crate::notebook::CodeCell;
    use crate::prompt::build_prompt;

    fn prompt() -> Prompt {
        let target = CodeCell {
            index: 1,
            execution_count: None,
            source: "model.fit(x)".into(),
            is_code: true,
        };
        build_prompt(&[], "", None, &target, &ContextConfig::default()).unwrap()
    }

    const CRASH: &str = r#"{"reasoning":"will crash","detection":true}"#;
    const SAFE: &str = r#"{"reasoning":"looks fine","detection":false}"#;

    #[test]
    fn mock_query_records_latency() {
        let provider = MockProvider::sequence(vec![CRASH.into()]);
        let record = query(&provider, &ProviderProfile::mock(), &prompt(), 0.01).unwrap();
        assert_eq!(record.prediction.parse_status, ParseStatus::Ok);
        assert!(record.prediction.detection);
        assert_eq!(record.attempt_count, 1);
    }

    #[test]
    fn temperature_omitted_when_unsupported() {
        let provider = MockProvider::sequence(vec![SAFE.into(), SAFE.into()]);
        let mut profile = ProviderProfile::mock();
        profile.supports_temperature = false;
        query(&provider, &profile, &prompt(), 0.01).unwrap();
        profile.supports_temperature = true;
        query(&provider, &profile, &prompt(), 0.01).unwrap();
        let recorded = provider.recorded();
        assert_eq!(recorded[0].temperature, None);
        assert_eq!(recorded[1].temperature, Some(0.01));
    }

    #[test]
    fn schema_sent_only_when_supported() {
        let provider = MockProvider::sequence(vec![SAFE.into(), SAFE.into()]);
        let mut profile = ProviderProfile::mock();
        profile.supports_schema_enforced_output = true;
        query(&provider, &profile, &prompt(), 0.01).unwrap();
        profile.supports_schema_enforced_output = false;
        query(&provider, &profile, &prompt(), 0.01).unwrap();
        let recorded = provider.recorded();
        assert!(recorded[0].schema_present);
        assert!(!recorded[1].schema_present);
    }

    #[test]
    fn parse_failure_requeries_once() {
        let provider = MockProvider::sequence(vec!["just prose".into(), CRASH.into()]);
        let record = query(&provider, &ProviderProfile::mock(), &prompt(), 0.01).unwrap();
        assert_eq!(record.attempt_count, 2);
        assert_eq!(record.prediction.parse_status, ParseStatus::Ok);
        assert!(record.prediction.detection);
    }

    #[test]
    fn repeated_parse_failure_abstains() {
        let provider = MockProvider::sequence(vec!["prose".into(), "more prose".into()]);
        let record = query(&provider, &ProviderProfile::mock(), &prompt(), 0.01).unwrap();
        assert_eq!(record.prediction.parse_status, ParseStatus::Failed);
        assert!(!record.prediction.detection);
        assert_eq!(record.attempt_count, 2);
    }

    #[test]
    fn transport_failure_exhausts_retries() {
        let provider = MockProvider::always_failing("connection reset");
        let mut profile = ProviderProfile::mock();
        profile.max_retries = 2;
        match query(&provider, &profile, &prompt(), 0.01) {
            Err(GatewayError::Transport { attempts, log, .. }) => {
                assert_eq!(attempts, 3);
                assert_eq!(log.len(), 3);
            }
            other => panic!("expected transport error, got {other:?}"),
        }
    }

    #[test]
    fn transport_failure_then_success() {
        let provider = MockProvider::failing_times(1, "timeout", CRASH);
        let record = query(&provider, &ProviderProfile::mock(), &prompt(), 0.01).unwrap();
        assert_eq!(record.attempt_count, 2);
        assert!(record.prediction.detection);
    }

    #[test]
    fn majority_three_of_five() {
        let provider =
            MockProvider::sequence(vec![CRASH.into(), CRASH.into(), SAFE.into(), CRASH.into(), SAFE.into()]);
        let mut profile = ProviderProfile::mock();
        profile.serialize_requests = true;
        let voted = predict_with_vote(&provider, &profile, &prompt(), 5, 0.01).unwrap();
        assert!(voted.detection);
        assert_eq!(voted.vote_split, (3, 2));
        assert_eq!(voted.instances.len(), 5);
    }

    #[test]
    fn unanimous_false() {
        let provider = MockProvider::sequence(vec![SAFE.into()]);
        let voted = predict_with_vote(&provider, &ProviderProfile::mock(), &prompt(), 5, 0.01).unwrap();
        assert!(!voted.detection);
        assert_eq!(voted.vote_split, (0, 5));
    }

    #[test]
    fn single_vote_degenerate() {
        let provider = MockProvider::sequence(vec![CRASH.into()]);
        let voted = predict_with_vote(&provider, &ProviderProfile::mock(), &prompt(), 1, 0.01).unwrap();
        assert!(voted.detection);
        assert_eq!(voted.vote_split, (1, 0));
    }

    #[test]
    fn even_votes_rejected() {
        let provider = MockProvider::sequence(vec![SAFE.into()]);
        assert!(matches!(
            predict_with_vote(&provider, &ProviderProfile::mock(), &prompt(), 4, 0.01),
            Err(GatewayError::BadVoteCount(4))
        ));
    }

    #[test]
    fn reasoning_from_lowest_majority_index() {
        let r0 = r#"{"reasoning":"r0 no","detection":false}"#;
        let r1 = r#"{"reasoning":"r1 yes","detection":true}"#;
        let r2 = r#"{"reasoning":"r2 yes","detection":true}"#;
        let instances: Vec<InstanceRecord> = [r0, r1, r2]
            .iter()
            .map(|raw| InstanceRecord {
                prediction: parse_response(raw),
                latency: Duration::from_millis(1),
                attempt_count: 1,
            })
            .collect();
        let voted = tally_votes(instances);
        assert!(voted.detection);
        assert_eq!(voted.reasoning, "r1 yes");
    }

    #[test]
    fn profile_parsing() {
        let text = "# provider\nid = gpt5\nendpoint = https://example.test/v1/chat\nmodel = gpt-5\nsupports_temperature = false\nrequest_timeout_ms = 1500\nmax_retries = 1\n";
        let profile = ProviderProfile::parse(text).unwrap();
        assert_eq!(profile.id, "gpt5");
        assert!(!profile.supports_temperature);
        assert_eq!(profile.request_timeout, Duration::from_millis(1500));
        assert_eq!(profile.credential_variable(), "GPT5_API_KEY");
        assert!(ProviderProfile::parse("model = x\n").is_err());
        assert!(ProviderProfile::parse("id = a\nwat = 1\n").is_err());
    }
}
