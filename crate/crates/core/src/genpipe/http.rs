use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::GenError;

/// Connection settings for an OpenAI-compatible endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub base_url: String,
    pub api_key: String,
    pub timeout_ms: u64,
}

impl HttpConfig {
    fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(self.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into()
    }

    /// POSTs `body` to `base_url/path` and decodes a JSON reply.
    pub(crate) fn post_json(&self, path: &str, body: &serde_json::Value) -> Result<serde_json::Value, GenError> {
        let url = format!("{}/{}", self.base_url.trim_end_matches('/'), path.trim_start_matches('/'));
        let mut resp = self
            .agent()
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(transport_error)?;
        let status = resp.status().as_u16();
        if status == 429 {
            return Err(GenError::RateLimited);
        }
        if !(200..300).contains(&status) {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(GenError::ApiError {
                status,
                message: message.chars().take(500).collect(),
            });
        }
        resp.body_mut()
            .read_json::<serde_json::Value>()
            .map_err(|e| GenError::BadResponse(e.to_string()))
    }
}

fn transport_error(e: ureq::Error) -> GenError {
    match e {
        ureq::Error::Timeout(_) => GenError::Timeout,
        other => GenError::Transport(other.to_string()),
    }
}
