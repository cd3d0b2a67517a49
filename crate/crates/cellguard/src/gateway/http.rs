//! OpenAI-compatible chat-completions provider.
//!
//! Credentials come from the environment variable named by the profile
//! (`<PROVIDER_ID>_API_KEY`); profile files never carry secrets.

use std::sync::Mutex;

use super::{CompletionRequest, Provider, ProviderProfile};
use crate::error::GatewayError;

pub struct HttpProvider {
    id: String,
    endpoint: String,
    model: String,
    api_key: String,
    client: reqwest::blocking::Client,
    /// Present when the profile asks for serialized requests.
    gate: Option<Mutex<()>>,
}

impl HttpProvider {
    pub fn from_profile(profile: &ProviderProfile) -> Result<Self, GatewayError> {
        let endpoint = profile.endpoint.clone().ok_or_else(|| {
            GatewayError::Profile(format!("provider `{}` has no endpoint", profile.id))
        })?;
        let model = profile.model.clone().ok_or_else(|| {
            GatewayError::Profile(format!("provider `{}` has no model", profile.id))
        })?;
        let variable = profile.credential_variable();
        let api_key = std::env::var(&variable).map_err(|_| GatewayError::MissingCredential {
            provider: profile.id.clone(),
            variable,
        })?;
        let client = reqwest::blocking::Client::builder()
            .timeout(profile.request_timeout)
            .build()
            .map_err(|e| GatewayError::Profile(format!("http client: {e}")))?;
        Ok(Self {
            id: profile.id.clone(),
            endpoint,
            model,
            api_key,
            client,
            gate: profile.serialize_requests.then(|| Mutex::new(())),
        })
    }
}

impl Provider for HttpProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, String> {
        let _serialized = self.gate.as_ref().map(|g| g.lock().expect("gate lock"));

        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
        });
        if let Some(t) = request.temperature {
            body["temperature"] = serde_json::json!(t);
        }
        if let Some(schema) = &request.schema {
            body["response_format"] = serde_json::json!({
                "type": "json_schema",
                "json_schema": {
                    "name": "crash_prediction",
                    "schema": schema,
                    "strict": true,
                },
            });
        }

        let response = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| format!("request: {e}"))?;
        let status = response.status();
        let payload: serde_json::Value = response
            .json()
            .map_err(|e| format!("response body: {e}"))?;
        if !status.is_success() {
            return Err(format!("http {status}: {payload}"));
        }
        payload["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| format!("no completion content in response: {payload}"))
    }
}
