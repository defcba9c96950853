use std::time::Duration;

use reqwest::StatusCode;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

use super::{ClientError, VERSION_HEADER};
use crate::pathcodec::{decode_wire, PathPlan};

/// Capped exponential backoff between network retries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base: Duration,
    pub cap: Duration,
    /// Total requests, including the first.
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_millis(500),
            cap: Duration::from_secs(8),
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Wait before retry number `retry` (0-based): `min(base * 2^retry, cap)`.
    pub fn delay(&self, retry: u32) -> Duration {
        let factor = 1u32.checked_shl(retry).unwrap_or(u32::MAX);
        self.base.saturating_mul(factor).min(self.cap)
    }

    /// Every wait a fully failing fetch sleeps through.
    pub fn schedule(&self) -> Vec<Duration> {
        (0..self.max_attempts.saturating_sub(1)).map(|i| self.delay(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VersionedPlan {
    pub plan: PathPlan,
    /// Value of the version header, when the server sent one.
    pub version: Option<u64>,
}

/// Accepts either the service root (`http://host:port`) or the full `/path` URL.
pub fn path_url(url: &str) -> Result<reqwest::Url, ClientError> {
    let mut parsed = reqwest::Url::parse(url).map_err(|e| ClientError::InvalidUrl(e.to_string()))?;
    if parsed.path() == "/" || parsed.path().is_empty() {
        parsed.set_path("/path");
    }
    Ok(parsed)
}

#[derive(Debug, Clone)]
pub struct PathClient {
    http: reqwest::Client,
    url: reqwest::Url,
    retry: RetryPolicy,
}

impl PathClient {
    pub fn new(url: &str, retry: RetryPolicy) -> Result<Self, ClientError> {
        let http = reqwest::Client::builder()
            .connect_timeout(Duration::from_secs(2))
            .timeout(Duration::from_secs(10))
            .build()
            .map_err(|e| ClientError::InvalidUrl(e.to_string()))?;
        Ok(Self {
            http,
            url: path_url(url)?,
            retry,
        })
    }

    pub fn url(&self) -> &reqwest::Url {
        &self.url
    }

    /// Single GET and decode, retrying only transport failures.
    pub async fn fetch(&self) -> Result<VersionedPlan, ClientError> {
        let mut attempt = 0;
        let response = loop {
            match self.http.get(self.url.clone()).send().await {
                Ok(resp) => break resp,
                Err(e) => {
                    attempt += 1;
                    if attempt >= self.retry.max_attempts {
                        return Err(ClientError::Network {
                            attempts: attempt,
                            message: e.to_string(),
                        });
                    }
                    tokio::time::sleep(self.retry.delay(attempt - 1)).await;
                }
            }
        };
        match response.status() {
            StatusCode::OK => {}
            StatusCode::NOT_FOUND => return Err(ClientError::NoPlan),
            other => return Err(ClientError::Status(other.as_u16())),
        }
        let version = response
            .headers()
            .get(VERSION_HEADER.as_str())
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok());
        let body = response.bytes().await.map_err(|e| ClientError::Network {
            attempts: attempt + 1,
            message: e.to_string(),
        })?;
        let plan = decode_wire(&body).map_err(|source| ClientError::Decode {
            source,
            excerpt: excerpt(&body),
        })?;
        Ok(VersionedPlan { plan, version })
    }

    /// Publishes `plan`; returns the version the server assigned.
    pub async fn put(&self, plan: &PathPlan) -> Result<Option<u64>, ClientError> {
        let resp = self
            .http
            .put(self.url.clone())
            .header("content-type", "application/json")
            .body(crate::pathcodec::encode_wire(plan))
            .send()
            .await
            .map_err(|e| ClientError::Network {
                attempts: 1,
                message: e.to_string(),
            })?;
        if !resp.status().is_success() {
            return Err(ClientError::Status(resp.status().as_u16()));
        }
        Ok(resp
            .headers()
            .get(VERSION_HEADER.as_str())
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.parse().ok()))
    }
}

fn excerpt(body: &[u8]) -> String {
    let text = String::from_utf8_lossy(body);
    text.chars().take(80).collect()
}

pub async fn fetch_path(url: &str, retry: RetryPolicy) -> Result<VersionedPlan, ClientError> {
    PathClient::new(url, retry)?.fetch().await
}

#[derive(Debug)]
pub enum PollEvent {
    /// A plan with a version not seen before.
    Updated(VersionedPlan),
    /// A fetch failed after retries; polling continues.
    Failed(ClientError),
}

/// Background poller. Dropping the receiver stops the task at its next send.
pub struct Poller {
    pub events: mpsc::Receiver<PollEvent>,
    task: JoinHandle<()>,
}

impl Poller {
    pub fn stop(&self) {
        self.task.abort();
    }
}

impl Drop for Poller {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// Re-fetches every `interval` and emits an event only when the version
/// header changes. A missing plan (404) is silently waited out.
pub fn spawn_poller(client: PathClient, interval: Duration) -> Poller {
    let (tx, rx) = mpsc::channel(16);
    let task = tokio::spawn(async move {
        let mut last_version: Option<Option<u64>> = None;
        let mut last_plan: Option<PathPlan> = None;
        loop {
            let event = match client.fetch().await {
                Ok(vp) => {
                    // servers without a version header fall back to comparing plans
                    let changed = match vp.version {
                        Some(_) => last_version != Some(vp.version),
                        None => last_plan.as_ref() != Some(&vp.plan),
                    };
                    if changed {
                        last_version = Some(vp.version);
                        last_plan = Some(vp.plan.clone());
                        Some(PollEvent::Updated(vp))
                    } else {
                        None
                    }
                }
                Err(ClientError::NoPlan) => None,
                Err(e) => Some(PollEvent::Failed(e)),
            };
            if let Some(event) = event {
                if tx.send(event).await.is_err() {
                    return;
                }
            }
            tokio::time::sleep(interval).await;
        }
    });
    Poller { events: rx, task }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_backoff_schedule() {
        let schedule = RetryPolicy::default().schedule();
        let secs: Vec<f64> = schedule.iter().map(|d| d.as_secs_f64()).collect();
        assert_eq!(secs, vec![0.5, 1.0, 2.0, 4.0]);
        assert!(schedule.iter().sum::<Duration>() <= Duration::from_secs(16));
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay(4), Duration::from_secs(8));
        assert_eq!(p.delay(10), Duration::from_secs(8));
        assert_eq!(p.delay(40), Duration::from_secs(8));
    }

    #[test]
    fn path_url_appends_route() {
        assert_eq!(path_url("http://127.0.0.1:9000").unwrap().as_str(), "http://127.0.0.1:9000/path");
        assert_eq!(path_url("http://h:1/path").unwrap().as_str(), "http://h:1/path");
        assert!(matches!(path_url("not a url"), Err(ClientError::InvalidUrl(_))));
    }
}
