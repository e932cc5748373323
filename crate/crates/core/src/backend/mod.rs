//! Line-delimited JSON protocol spoken by generator and classifier backends.
//!
//! A backend first announces itself:
//!
//! ```text
//! {"protocol": "hybridsum/1", "capabilities": ["generate", "classify"]}
//! ```
//!
//! and then answers requests, one JSON object per line, in any order:
//!
//! ```text
//! → {"id": "s1", "type": "generate", "code": ["get", "x"], "ast": null}
//! ← {"id": "s1", "comment": ["returns", "x"]}
//! → {"id": "s1", "type": "classify", "input_code": [...], "retrieved_code": [...]}
//! ← {"id": "s1", "score": 0.83}
//! ← {"id": "s1", "error": "model not loaded"}
//! ```
//!
//! Every request must get exactly one response. Request ids are sample ids.

mod batch_file;
pub mod mock;
mod subprocess;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use batch_file::BatchFileBackend;
pub use subprocess::SubprocessBackend;

use crate::Tokens;

pub const PROTOCOL: &str = "hybridsum/1";

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("request {id}: backend error: {message}")]
    Remote { id: String, message: String },
    #[error("request {id}: protocol violation: {message}")]
    Protocol { id: String, message: String },
    #[error("request {id}: no response within {timeout:?}")]
    Timeout { id: String, timeout: Duration },
    #[error("handshake failed: {0}")]
    Handshake(String),
    #[error("backend does not support {0}")]
    Unsupported(Capability),
    #[error("backend process: {0}")]
    Process(String),
    #[error("backend io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Capability {
    Generate,
    Classify,
}

impl std::fmt::Display for Capability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Capability::Generate => "generate",
            Capability::Classify => "classify",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub capabilities: Vec<Capability>,
}

impl Handshake {
    pub fn new(capabilities: Vec<Capability>) -> Self {
        Self { protocol: PROTOCOL.to_string(), capabilities }
    }

    fn check(&self, need: Option<Capability>) -> Result<(), BackendError> {
        if self.protocol != PROTOCOL {
            return Err(BackendError::Handshake(format!(
                "expected protocol {PROTOCOL:?}, backend speaks {:?}",
                self.protocol
            )));
        }
        if let Some(cap) = need {
            if !self.capabilities.contains(&cap) {
                return Err(BackendError::Unsupported(cap));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub id: String,
    pub code: Tokens,
    pub ast: Option<Tokens>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyRequest {
    pub id: String,
    pub input_code: Tokens,
    pub retrieved_code: Tokens,
}

/// A request as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Request {
    Generate(GenerateRequest),
    Classify(ClassifyRequest),
}

impl Request {
    pub fn id(&self) -> &str {
        match self {
            Request::Generate(r) => &r.id,
            Request::Classify(r) => &r.id,
        }
    }
}

/// A response as it appears on the wire. Untagged: the payload field decides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Response {
    Comment { id: String, comment: Tokens },
    Score { id: String, score: f64 },
    Error { id: String, error: String },
}

impl Response {
    pub fn id(&self) -> &str {
        match self {
            Response::Comment { id, .. } | Response::Score { id, .. } | Response::Error { id, .. } => id,
        }
    }
}

/// Anything that can answer generate and/or classify requests.
///
/// Results come back in request order regardless of the order in which the
/// backend replied. Implementations may pipeline requests internally.
pub trait Backend: Send {
    fn capabilities(&self) -> &[Capability];

    fn generate_batch(&mut self, requests: &[GenerateRequest]) -> Result<Vec<Tokens>, BackendError>;

    fn classify_batch(&mut self, requests: &[ClassifyRequest]) -> Result<Vec<f64>, BackendError>;

    fn generate(&mut self, request: GenerateRequest) -> Result<Tokens, BackendError> {
        Ok(self.generate_batch(std::slice::from_ref(&request))?.remove(0))
    }

    fn classify(&mut self, request: ClassifyRequest) -> Result<f64, BackendError> {
        Ok(self.classify_batch(std::slice::from_ref(&request))?.remove(0))
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn capabilities(&self) -> &[Capability] {
        (**self).capabilities()
    }
    fn generate_batch(&mut self, requests: &[GenerateRequest]) -> Result<Vec<Tokens>, BackendError> {
        (**self).generate_batch(requests)
    }
    fn classify_batch(&mut self, requests: &[ClassifyRequest]) -> Result<Vec<f64>, BackendError> {
        (**self).classify_batch(requests)
    }
}

/// Converts a wire response into a comment, checking its kind.
pub(crate) fn expect_comment(resp: Response) -> Result<Tokens, BackendError> {
    match resp {
        Response::Comment { comment, .. } => Ok(comment),
        Response::Error { id, error } => Err(BackendError::Remote { id, message: error }),
        Response::Score { id, .. } => Err(BackendError::Protocol { id, message: "expected a comment, got a score".into() }),
    }
}

pub(crate) fn expect_score(resp: Response) -> Result<f64, BackendError> {
    match resp {
        Response::Score { id, score } if !score.is_finite() => {
            Err(BackendError::Protocol { id, message: format!("non-finite score {score}") })
        }
        Response::Score { score, .. } => Ok(score),
        Response::Error { id, error } => Err(BackendError::Remote { id, message: error }),
        Response::Comment { id, .. } => Err(BackendError::Protocol { id, message: "expected a score, got a comment".into() }),
    }
}

/// How to reach a backend. Deserialized from the run config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transport", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Long-running process speaking the protocol on stdin/stdout.
    Subprocess {
        command: Vec<String>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: f64,
        #[serde(default = "default_in_flight")]
        max_in_flight: usize,
    },
    /// Requests written to a file, responses read from another. If `command`
    /// is set it is run with the request file on stdin and stdout redirected
    /// to the response file.
    BatchFile {
        requests_path: std::path::PathBuf,
        responses_path: std::path::PathBuf,
        #[serde(default)]
        command: Option<Vec<String>>,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: f64,
    },
}

fn default_timeout_secs() -> f64 {
    60.0
}

fn default_in_flight() -> usize {
    16
}

impl BackendSpec {
    pub fn timeout(&self) -> Duration {
        let secs = match self {
            BackendSpec::Subprocess { timeout_secs, .. } | BackendSpec::BatchFile { timeout_secs, .. } => *timeout_secs,
        };
        Duration::from_secs_f64(secs)
    }

    /// Checks invariants; returns the offending field name on failure.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        match self {
            BackendSpec::Subprocess { command, timeout_secs, max_in_flight } => {
                if command.is_empty() {
                    return Err(("command", "must name a program".into()));
                }
                if !(timeout_secs.is_finite() && *timeout_secs > 0.0) {
                    return Err(("timeout_secs", format!("must be positive, got {timeout_secs}")));
                }
                if *max_in_flight == 0 {
                    return Err(("max_in_flight", "must be at least 1".into()));
                }
            }
            BackendSpec::BatchFile { command, timeout_secs, .. } => {
                if command.as_ref().is_some_and(Vec::is_empty) {
                    return Err(("command", "must name a program".into()));
                }
                if !(timeout_secs.is_finite() && *timeout_secs > 0.0) {
                    return Err(("timeout_secs", format!("must be positive, got {timeout_secs}")));
                }
            }
        }
        Ok(())
    }

    /// Starts (or prepares) the backend, requiring `need` in its handshake.
    pub fn connect(&self, need: Option<Capability>) -> Result<Box<dyn Backend>, BackendError> {
        match self {
            BackendSpec::Subprocess { command, max_in_flight, .. } => Ok(Box::new(SubprocessBackend::spawn(
                command,
                self.timeout(),
                *max_in_flight,
                need,
            )?)),
            BackendSpec::BatchFile { requests_path, responses_path, command, .. } => Ok(Box::new(BatchFileBackend::new(
                requests_path.clone(),
                responses_path.clone(),
                command.clone(),
                self.timeout(),
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toks;

    #[test]
    fn request_wire_format() {
        let r = Request::Generate(GenerateRequest { id: "s1".into(), code: toks(&["get", "x"]), ast: None });
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            r#"{"type":"generate","id":"s1","code":["get","x"],"ast":null}"#
        );
        let c = Request::Classify(ClassifyRequest { id: "s2".into(), input_code: toks(&["a"]), retrieved_code: toks(&["b"]) });
        let v: serde_json::Value = serde_json::to_value(&c).unwrap();
        assert_eq!(v["type"], "classify");
        assert_eq!(v["retrieved_code"][0], "b");
    }

    #[test]
    fn response_wire_format() {
        let parse = |s: &str| serde_json::from_str::<Response>(s).unwrap();
        assert_eq!(parse(r#"{"id":"a","comment":["x"]}"#), Response::Comment { id: "a".into(), comment: toks(&["x"]) });
        assert_eq!(parse(r#"{"id":"a","score":0.5}"#), Response::Score { id: "a".into(), score: 0.5 });
        assert_eq!(parse(r#"{"id":"a","error":"boom"}"#), Response::Error { id: "a".into(), error: "boom".into() });
        assert!(serde_json::from_str::<Response>(r#"{"id":"a"}"#).is_err());
    }

    #[test]
    fn handshake_checks() {
        let h: Handshake = serde_json::from_str(r#"{"protocol":"hybridsum/1","capabilities":["generate"]}"#).unwrap();
        assert!(h.check(Some(Capability::Generate)).is_ok());
        assert!(matches!(h.check(Some(Capability::Classify)), Err(BackendError::Unsupported(Capability::Classify))));
        let bad = Handshake { protocol: "other/2".into(), capabilities: vec![] };
        assert!(matches!(bad.check(None), Err(BackendError::Handshake(_))));
    }

    #[test]
    fn spec_validation() {
        let s = BackendSpec::Subprocess { command: vec![], timeout_secs: 1.0, max_in_flight: 1 };
        assert_eq!(s.validate().unwrap_err().0, "command");
        let s = BackendSpec::Subprocess { command: vec!["x".into()], timeout_secs: 0.0, max_in_flight: 1 };
        assert_eq!(s.validate().unwrap_err().0, "timeout_secs");
    }
}
