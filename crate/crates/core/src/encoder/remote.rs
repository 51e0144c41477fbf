//! Embedding service client: `POST {"texts": [...]}` answered by
//! `{"vectors": [[...], ...]}`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ATTEMPTS: usize = 3;

#[derive(Clone, Debug)]
pub struct RemoteEncoder {
    url: String,
    dim: usize,
    timeout: Duration,
}

#[derive(Serialize)]
struct Request<'a> {
    texts: &'a [String],
}

#[derive(Deserialize)]
struct Response {
    vectors: Vec<Vec<f64>>,
}

impl RemoteEncoder {
    pub fn new(url: impl Into<String>, dim: usize, timeout: Duration) -> Self {
        Self { url: url.into(), dim, timeout }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    /// Sends one request per call; transport failures, timeouts and non-200
    /// statuses are retried up to [`ATTEMPTS`] times.
    pub fn encode_batch(&self, texts: &[String]) -> Result<Vec<Vec<f64>>> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(self.timeout)).build().into();
        let mut last = String::new();
        for attempt in 1..=ATTEMPTS {
            match agent.post(&self.url).send_json(Request { texts }) {
                Ok(mut resp) => {
                    let body: Response = resp
                        .body_mut()
                        .read_json()
                        .map_err(|e| Error::Encoder(format!("malformed response: {e}")))?;
                    return self.check(texts.len(), body.vectors);
                }
                Err(e) => {
                    log::warn!("embedding request {attempt}/{ATTEMPTS} to {} failed: {e}", self.url);
                    last = e.to_string();
                }
            }
        }
        Err(Error::RemoteEncoder { attempts: ATTEMPTS, msg: last })
    }

    fn check(&self, expected: usize, vectors: Vec<Vec<f64>>) -> Result<Vec<Vec<f64>>> {
        if vectors.len() != expected {
            return Err(Error::Encoder(format!("asked for {expected} vectors, got {}", vectors.len())));
        }
        if let Some(v) = vectors.iter().find(|v| v.len() != self.dim) {
            return Err(Error::Shape(format!("remote vector has length {}, expected {}", v.len(), self.dim)));
        }
        if vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Encoder("remote vector has non-finite entries".into()));
        }
        Ok(vectors)
    }
}
