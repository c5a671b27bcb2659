use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::wire::ErrorBody;
use super::{BackendError, Route, Transport};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
pub const DEFAULT_RETRIES: u32 = 2;

/// Where a service lives and how hard to try reaching it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub base_url: String,
    #[serde(with = "millis", default = "default_timeout", rename = "timeout_ms")]
    pub timeout: Duration,
    /// Transport-level retries on top of the first attempt.
    #[serde(default = "default_retries")]
    pub retries: u32,
}

fn default_timeout() -> Duration {
    DEFAULT_TIMEOUT
}

fn default_retries() -> u32 {
    DEFAULT_RETRIES
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl BackendEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        BackendEndpoint {
            base_url: base_url.into(),
            timeout: DEFAULT_TIMEOUT,
            retries: DEFAULT_RETRIES,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_retries(mut self, retries: u32) -> Self {
        self.retries = retries;
        self
    }

    pub fn url(&self, route: Route) -> String {
        format!("{}{}", self.base_url.trim_end_matches('/'), route.path())
    }
}

/// One endpoint per service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceEndpoints {
    pub captioner: BackendEndpoint,
    pub vqa: BackendEndpoint,
    pub verifier: BackendEndpoint,
    pub llm: BackendEndpoint,
    pub generator: BackendEndpoint,
}

impl ServiceEndpoints {
    pub fn single(endpoint: BackendEndpoint) -> Self {
        ServiceEndpoints {
            captioner: endpoint.clone(),
            vqa: endpoint.clone(),
            verifier: endpoint.clone(),
            llm: endpoint.clone(),
            generator: endpoint,
        }
    }

    /// Applies `STYLEVAR_{CAPTION,VQA,ZEROSHOT,LLM,GENERATE}_URL` overrides.
    pub fn with_env_overrides(mut self) -> Self {
        let slots: [(&str, &mut BackendEndpoint); 5] = [
            ("STYLEVAR_CAPTION_URL", &mut self.captioner),
            ("STYLEVAR_VQA_URL", &mut self.vqa),
            ("STYLEVAR_ZEROSHOT_URL", &mut self.verifier),
            ("STYLEVAR_LLM_URL", &mut self.llm),
            ("STYLEVAR_GENERATE_URL", &mut self.generator),
        ];
        for (var, endpoint) in slots {
            if let Ok(url) = std::env::var(var) {
                endpoint.base_url = url;
            }
        }
        self
    }
}

/// Blocking HTTP transport with a per-call timeout and a bounded number of
/// retries on connection failures, timeouts and 5xx replies.
#[derive(Debug, Clone)]
pub struct HttpTransport {
    endpoint: BackendEndpoint,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(endpoint: BackendEndpoint) -> Result<Self, BackendError> {
        if endpoint.timeout.is_zero() {
            return Err(BackendError::Precondition("endpoint timeout must be positive".into()));
        }
        let mut builder = reqwest::blocking::Client::builder().timeout(endpoint.timeout);
        if is_loopback(&endpoint.base_url) {
            builder = builder.no_proxy();
        }
        let client = builder
            .build()
            .map_err(|e| BackendError::Precondition(format!("http client: {e}")))?;
        Ok(HttpTransport { endpoint, client })
    }

    pub fn endpoint(&self) -> &BackendEndpoint {
        &self.endpoint
    }
}

fn is_loopback(url: &str) -> bool {
    let rest = url.split_once("://").map_or(url, |(_, r)| r);
    rest.starts_with("127.") || rest.starts_with("localhost") || rest.starts_with("[::1]")
}

enum Attempt {
    Done(Result<Value, BackendError>),
    Retry(BackendError),
}

impl HttpTransport {
    fn attempt(&self, route: Route, body: &Value, n: u32) -> Attempt {
        let response = match self.client.post(self.endpoint.url(route)).json(body).send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry(BackendError::Timeout {
                    route: route.path(),
                    attempts: n,
                })
            }
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    route: route.path(),
                    attempts: n,
                    message: e.to_string(),
                })
            }
        };
        let status = response.status();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => {
                return Attempt::Retry(BackendError::Timeout {
                    route: route.path(),
                    attempts: n,
                })
            }
            Err(e) => {
                return Attempt::Retry(BackendError::Transport {
                    route: route.path(),
                    attempts: n,
                    message: e.to_string(),
                })
            }
        };
        if status.is_success() {
            return Attempt::Done(serde_json::from_str(&text).map_err(|e| BackendError::Schema {
                route: route.path(),
                message: format!("reply is not JSON: {e}"),
            }));
        }
        let err = serde_json::from_str::<ErrorBody>(&text)
            .unwrap_or_else(|_| ErrorBody::new(format!("http_{}", status.as_u16()), text));
        let err = BackendError::Service {
            route: route.path(),
            status: status.as_u16(),
            code: err.code,
            message: err.message,
        };
        if status.is_server_error() {
            Attempt::Retry(err)
        } else {
            Attempt::Done(Err(err))
        }
    }
}

impl Transport for HttpTransport {
    fn post(&self, route: Route, body: &Value) -> Result<Value, BackendError> {
        let max_attempts = self.endpoint.retries + 1;
        let mut last = None;
        for n in 1..=max_attempts {
            match self.attempt(route, body, n) {
                Attempt::Done(result) => return result,
                Attempt::Retry(err) => last = Some(err),
            }
        }
        Err(last.expect("at least one attempt"))
    }
}
