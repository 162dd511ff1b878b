//! Thin HTTP client for the campaign server, plus a driver that runs many
//! simulated annotators against it concurrently.

mod simulate;

use pointillism_core::wire::{AnswerAck, AnswerBody, ErrorBody, NextResponse, Progress};
use serde::de::DeserializeOwned;
use thiserror::Error;

pub use simulate::{run_annotators, Assignment, SimulationReport};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    #[error("server answered {status}: {message}")]
    Status { status: u16, message: String },
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Status { status, .. } => Some(*status),
            ClientError::Http(e) => e.status().map(|s| s.as_u16()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    http: reqwest::Client,
    base: String,
    campaign: Option<String>,
}

impl Client {
    /// `base_url` like `http://127.0.0.1:8080`.
    pub fn new(base_url: impl Into<String>) -> Self {
        Client { http: reqwest::Client::new(), base: base_url.into().trim_end_matches('/').to_string(), campaign: None }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    /// Targets one campaign on a server that hosts several.
    pub fn with_campaign(mut self, name: impl Into<String>) -> Self {
        self.campaign = Some(name.into());
        self
    }

    fn url(&self, path: &str, query: &[(&str, &str)]) -> String {
        let mut params: Vec<(&str, &str)> = query.to_vec();
        if let Some(c) = &self.campaign {
            params.push(("campaign", c));
        }
        let qs: Vec<String> = params.iter().map(|(k, v)| format!("{k}={}", encode(v))).collect();
        if qs.is_empty() {
            format!("{}{path}", self.base)
        } else {
            format!("{}{path}?{}", self.base, qs.join("&"))
        }
    }

    async fn checked(resp: reqwest::Response) -> Result<reqwest::Response, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text).map(|b| b.error).unwrap_or(text);
        Err(ClientError::Status { status: status.as_u16(), message })
    }

    async fn get_json<T: DeserializeOwned>(&self, url: String) -> Result<T, ClientError> {
        Ok(Self::checked(self.http.get(url).send().await?).await?.json().await?)
    }

    pub async fn next(&self, annotator: &str) -> Result<NextResponse, ClientError> {
        self.get_json(self.url("/api/next", &[("annotator", annotator)])).await
    }

    pub async fn answer(&self, body: &AnswerBody) -> Result<AnswerAck, ClientError> {
        let resp = self.http.post(self.url("/api/answer", &[])).json(body).send().await?;
        Ok(Self::checked(resp).await?.json().await?)
    }

    pub async fn progress(&self) -> Result<Progress, ClientError> {
        self.get_json(self.url("/api/progress", &[])).await
    }

    /// Resolved point labels as point-label CSV.
    pub async fn labels_csv(&self) -> Result<String, ClientError> {
        Ok(Self::checked(self.http.get(self.url("/api/labels", &[])).send().await?).await?.text().await?)
    }

    /// Image bytes and their content type.
    pub async fn image(&self, image_id: &str) -> Result<(String, Vec<u8>), ClientError> {
        let resp = Self::checked(self.http.get(self.url(&format!("/images/{}", encode(image_id)), &[])).send().await?).await?;
        let ct = resp
            .headers()
            .get(reqwest::header::CONTENT_TYPE)
            .and_then(|v| v.to_str().ok())
            .unwrap_or("")
            .to_string();
        Ok((ct, resp.bytes().await?.to_vec()))
    }
}

/// Percent-encodes everything outside the unreserved URL characters.
fn encode(s: &str) -> String {
    s.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn urls() {
        let c = Client::new("http://h:1/");
        assert_eq!(c.url("/api/next", &[("annotator", "a b")]), "http://h:1/api/next?annotator=a%20b");
        let c = c.with_campaign("x");
        assert_eq!(c.url("/api/progress", &[]), "http://h:1/api/progress?campaign=x");
    }
}
