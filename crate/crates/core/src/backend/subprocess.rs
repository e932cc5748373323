use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use super::{
    expect_comment, expect_score, Backend, BackendError, Capability, ClassifyRequest, GenerateRequest, Handshake,
    Request, Response,
};
use crate::Tokens;

/// A backend process driven over stdin/stdout.
///
/// Up to `max_in_flight` requests are outstanding at once; responses are
/// matched by id. A dedicated thread drains the child's stdout so the child
/// never blocks on a full pipe while we are writing.
pub struct SubprocessBackend {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    max_in_flight: usize,
    capabilities: Vec<Capability>,
    poisoned: Option<String>,
}

impl SubprocessBackend {
    pub fn spawn(
        command: &[String],
        timeout: Duration,
        max_in_flight: usize,
        need: Option<Capability>,
    ) -> Result<Self, BackendError> {
        let (program, args) =
            command.split_first().ok_or_else(|| BackendError::Process("empty backend command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Process(format!("cannot start {program:?}: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("backend-reader".into())
            .spawn(move || {
                for line in BufReader::new(stdout).lines() {
                    if tx.send(line).is_err() {
                        break;
                    }
                }
            })
            .map_err(BackendError::Io)?;
        let mut backend = Self {
            stdin: child.stdin.take(),
            child,
            lines: rx,
            timeout,
            max_in_flight: max_in_flight.max(1),
            capabilities: Vec::new(),
            poisoned: None,
        };
        let first = match backend.lines.recv_timeout(timeout) {
            Ok(line) => line?,
            Err(RecvTimeoutError::Timeout) => {
                return Err(BackendError::Handshake(format!("no handshake within {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                return Err(BackendError::Handshake("backend exited before the handshake".into()))
            }
        };
        let hs: Handshake = serde_json::from_str(&first)
            .map_err(|e| BackendError::Handshake(format!("bad handshake line {first:?}: {e}")))?;
        hs.check(need)?;
        backend.capabilities = hs.capabilities;
        Ok(backend)
    }

    fn run(&mut self, requests: Vec<Request>) -> Result<Vec<Response>, BackendError> {
        if let Some(why) = &self.poisoned {
            return Err(BackendError::Process(format!("backend unusable after earlier failure: {why}")));
        }
        let result = self.exchange(requests);
        if let Err(e) = &result {
            if matches!(e, BackendError::Timeout { .. } | BackendError::Protocol { .. } | BackendError::Process(_) | BackendError::Io(_)) {
                self.poisoned = Some(e.to_string());
            }
        }
        result
    }

    fn exchange(&mut self, requests: Vec<Request>) -> Result<Vec<Response>, BackendError> {
        let mut slot_of: HashMap<String, usize> = HashMap::with_capacity(requests.len());
        for (i, r) in requests.iter().enumerate() {
            if slot_of.insert(r.id().to_string(), i).is_some() {
                return Err(BackendError::Protocol {
                    id: r.id().to_string(),
                    message: "duplicate request id in one batch".into(),
                });
            }
        }
        let mut results: Vec<Option<Response>> = vec![None; requests.len()];
        let mut pending: std::collections::BTreeSet<usize> = Default::default();
        let mut next = 0;
        let mut done = 0;
        while done < requests.len() {
            while next < requests.len() && pending.len() < self.max_in_flight {
                let stdin = self.stdin.as_mut().ok_or_else(|| BackendError::Process("stdin closed".into()))?;
                let mut line = serde_json::to_vec(&requests[next]).expect("request serializes");
                line.push(b'\n');
                stdin.write_all(&line).and_then(|_| stdin.flush()).map_err(|e| BackendError::Process(format!(
                    "request {}: cannot write to backend: {e}",
                    requests[next].id()
                )))?;
                pending.insert(next);
                next += 1;
            }
            let oldest = || requests[*pending.first().expect("pending nonempty")].id().to_string();
            let line = match self.lines.recv_timeout(self.timeout) {
                Ok(line) => line?,
                Err(RecvTimeoutError::Timeout) => {
                    return Err(BackendError::Timeout { id: oldest(), timeout: self.timeout })
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(BackendError::Process(format!(
                        "request {}: backend exited with {} request(s) unanswered",
                        oldest(),
                        pending.len()
                    )))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            let resp: Response = serde_json::from_str(&line).map_err(|e| BackendError::Protocol {
                id: line_id(&line).unwrap_or_else(oldest),
                message: format!("unparseable response {line:?}: {e}"),
            })?;
            let slot = slot_of
                .get(resp.id())
                .copied()
                .filter(|s| pending.contains(s))
                .ok_or_else(|| BackendError::Protocol {
                    id: resp.id().to_string(),
                    message: "response to an id that is not pending".into(),
                })?;
            pending.remove(&slot);
            results[slot] = Some(resp);
            done += 1;
        }
        Ok(results.into_iter().map(|r| r.expect("every slot answered")).collect())
    }
}

fn line_id(line: &str) -> Option<String> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    v.get("id")?.as_str().map(str::to_string)
}

impl Backend for SubprocessBackend {
    fn capabilities(&self) -> &[Capability] {
        &self.capabilities
    }

    fn generate_batch(&mut self, requests: &[GenerateRequest]) -> Result<Vec<Tokens>, BackendError> {
        if !self.capabilities.contains(&Capability::Generate) {
            return Err(BackendError::Unsupported(Capability::Generate));
        }
        let wire = requests.iter().cloned().map(Request::Generate).collect();
        self.run(wire)?.into_iter().map(expect_comment).collect()
    }

    fn classify_batch(&mut self, requests: &[ClassifyRequest]) -> Result<Vec<f64>, BackendError> {
        if !self.capabilities.contains(&Capability::Classify) {
            return Err(BackendError::Unsupported(Capability::Classify));
        }
        let wire = requests.iter().cloned().map(Request::Classify).collect();
        self.run(wire)?.into_iter().map(expect_score).collect()
    }
}

impl Drop for SubprocessBackend {
    fn drop(&mut self) {
        // Closing stdin asks a well-behaved backend to exit.
        drop(self.stdin.take());
        for _ in 0..50 {
            match self.child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
                Err(_) => break,
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
