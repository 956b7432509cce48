//! Minimal JSON-over-HTTP client shared by the model endpoint contracts.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::ClientError;

#[derive(Debug, Clone)]
pub struct JsonEndpoint {
    url: String,
    client: reqwest::blocking::Client,
}

impl JsonEndpoint {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Result<Self, ClientError> {
        let url = url.into();
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| ClientError::Transport {
                endpoint: url.clone(),
                cause: e.to_string(),
            })?;
        Ok(JsonEndpoint { url, client })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, request: &Req) -> Result<Resp, ClientError> {
        let response = self
            .client
            .post(&self.url)
            .json(request)
            .send()
            .map_err(|e| ClientError::Transport {
                endpoint: self.url.clone(),
                cause: e.to_string(),
            })?;
        let status = response.status();
        if !status.is_success() {
            return Err(ClientError::Status {
                endpoint: self.url.clone(),
                status: status.as_u16(),
            });
        }
        response.json().map_err(|e| ClientError::Decode {
            endpoint: self.url.clone(),
            cause: e.to_string(),
        })
    }
}
