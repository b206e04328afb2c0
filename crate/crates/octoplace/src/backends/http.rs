use std::collections::BTreeMap;
use std::time::Duration;

use base64::Engine;
use serde_json::Value;

use super::wire::WireRequest;
use super::{BackendError, Capability, RawBackend, Request};
use crate::bundle::encode_png;

/// Seconds before a model request is abandoned.
pub const DEFAULT_TIMEOUT_S: u64 = 120;

const URL_VAR: &str = "OCTO_BACKEND_URL_";
const KEY_VAR: &str = "OCTO_BACKEND_KEY_";
const TIMEOUT_VAR: &str = "OCTO_BACKEND_TIMEOUT_S";

/// Where one capability is served.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub base_url: String,
    /// Sent as a bearer token. Required for `complete`.
    pub api_key: Option<String>,
}

/// POSTs `{image, text}` JSON to `{base_url}/v1/<capability>`.
pub struct HttpBackend {
    endpoints: BTreeMap<Capability, Endpoint>,
    agent: ureq::Agent,
}

fn env_name(prefix: &str, capability: Capability) -> String {
    format!("{prefix}{}", capability.as_str().to_uppercase())
}

impl HttpBackend {
    pub fn new(endpoints: BTreeMap<Capability, Endpoint>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { endpoints, agent }
    }

    /// Reads `OCTO_BACKEND_URL_<CAPABILITY>`, `OCTO_BACKEND_KEY_<CAPABILITY>`
    /// and `OCTO_BACKEND_TIMEOUT_S`. Capabilities without a URL fail when
    /// called.
    pub fn from_env() -> Self {
        let endpoints = Capability::ALL
            .into_iter()
            .filter_map(|c| {
                let base_url = std::env::var(env_name(URL_VAR, c)).ok().filter(|u| !u.is_empty())?;
                let api_key = std::env::var(env_name(KEY_VAR, c)).ok().filter(|k| !k.is_empty());
                Some((c, Endpoint { base_url, api_key }))
            })
            .collect();
        let timeout = std::env::var(TIMEOUT_VAR)
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(DEFAULT_TIMEOUT_S);
        Self::new(endpoints, Duration::from_secs(timeout))
    }
}

impl RawBackend for HttpBackend {
    fn call(&self, capability: Capability, request: &Request<'_>) -> Result<Value, BackendError> {
        let unavailable = |message: String| BackendError::Unavailable { capability, message };
        let endpoint = self
            .endpoints
            .get(&capability)
            .ok_or_else(|| unavailable(format!("{} is not set", env_name(URL_VAR, capability))))?;
        if capability == Capability::Complete && endpoint.api_key.is_none() {
            return Err(unavailable(format!(
                "missing credential ({} is not set)",
                env_name(KEY_VAR, capability)
            )));
        }

        let body = WireRequest {
            image: request
                .image
                .map(|img| base64::engine::general_purpose::STANDARD.encode(encode_png(img))),
            text: request.text.map(str::to_string),
        };
        let url = format!("{}/v1/{}", endpoint.base_url.trim_end_matches('/'), capability.as_str());
        let mut req = self.agent.post(&url);
        if let Some(key) = &endpoint.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = req
            .send_json(&body)
            .map_err(|e| unavailable(format!("{url}: {e}")))?;
        let status = response.status();
        if !status.is_success() {
            let detail = response.body_mut().read_to_string().unwrap_or_default();
            return Err(unavailable(format!("{url} answered {status}: {}", detail.trim())));
        }
        response
            .body_mut()
            .read_json::<Value>()
            .map_err(|e| BackendError::protocol(capability, e))
    }
}
