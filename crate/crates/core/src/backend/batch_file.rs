use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{
    expect_comment, expect_score, Backend, BackendError, Capability, ClassifyRequest, GenerateRequest, Handshake,
    Request, Response,
};
use crate::Tokens;

/// File-based transport for backends that run elsewhere.
///
/// Each batch is written to `requests_path`. With a `command`, the command is
/// run with the request file on stdin and its stdout captured into
/// `responses_path`; without one, `responses_path` must already hold the
/// answers (produced offline from a previous request file). An optional
/// handshake line at the top of the response file is checked.
pub struct BatchFileBackend {
    requests_path: PathBuf,
    responses_path: PathBuf,
    command: Option<Vec<String>>,
    timeout: Duration,
}

const CAPS: &[Capability] = &[Capability::Generate, Capability::Classify];

impl BatchFileBackend {
    pub fn new(requests_path: PathBuf, responses_path: PathBuf, command: Option<Vec<String>>, timeout: Duration) -> Self {
        Self { requests_path, responses_path, command, timeout }
    }

    fn run(&mut self, requests: Vec<Request>) -> Result<Vec<Response>, BackendError> {
        {
            let mut w = BufWriter::new(File::create(&self.requests_path)?);
            for r in &requests {
                serde_json::to_writer(&mut w, r).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
        if let Some(cmd) = &self.command {
            self.run_command(cmd)?;
        }
        let file = File::open(&self.responses_path).map_err(|e| {
            BackendError::Process(format!(
                "cannot read responses {}: {e}; requests were written to {}",
                self.responses_path.display(),
                self.requests_path.display()
            ))
        })?;
        let mut by_id: HashMap<String, Response> = HashMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if n == 0 {
                if let Ok(hs) = serde_json::from_str::<Handshake>(&line) {
                    hs.check(None)?;
                    continue;
                }
            }
            let resp: Response = serde_json::from_str(&line).map_err(|e| BackendError::Protocol {
                id: format!("line {}", n + 1),
                message: format!("unparseable response: {e}"),
            })?;
            by_id.insert(resp.id().to_string(), resp);
        }
        requests
            .iter()
            .map(|r| {
                by_id.remove(r.id()).ok_or_else(|| BackendError::Protocol {
                    id: r.id().to_string(),
                    message: format!("no response in {}", self.responses_path.display()),
                })
            })
            .collect()
    }

    fn run_command(&self, cmd: &[String]) -> Result<(), BackendError> {
        let (program, args) = cmd.split_first().ok_or_else(|| BackendError::Process("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(File::open(&self.requests_path)?)
            .stdout(File::create(&self.responses_path)?)
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BackendError::Process(format!("cannot start {program:?}: {e}")))?;
        let start = Instant::now();
        loop {
            if let Some(status) = child.try_wait()? {
                if !status.success() {
                    return Err(BackendError::Process(format!("{program:?} exited with {status}")));
                }
                return Ok(());
            }
            if start.elapsed() > self.timeout {
                let _ = child.kill();
                let _ = child.wait();
                return Err(BackendError::Timeout { id: "batch".into(), timeout: self.timeout });
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }
}

impl Backend for BatchFileBackend {
    fn capabilities(&self) -> &[Capability] {
        CAPS
    }

    fn generate_batch(&mut self, requests: &[GenerateRequest]) -> Result<Vec<Tokens>, BackendError> {
        let wire = requests.iter().cloned().map(Request::Generate).collect();
        self.run(wire)?.into_iter().map(expect_comment).collect()
    }

    fn classify_batch(&mut self, requests: &[ClassifyRequest]) -> Result<Vec<f64>, BackendError> {
        let wire = requests.iter().cloned().map(Request::Classify).collect();
        self.run(wire)?.into_iter().map(expect_score).collect()
    }
}
