//! Scripted in-process backends and a protocol server loop.
//!
//! These ship with the library so tests, examples and the
//! `hybridsum-mock-backend` binary can exercise the pipeline without a
//! trained model.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use super::{Backend, BackendError, Capability, ClassifyRequest, GenerateRequest, Handshake, Request, Response};
use crate::corpus::Corpus;
use crate::metrics::{sentence_bleu, BleuConfig};
use crate::Tokens;

type GenerateFn = Box<dyn FnMut(&GenerateRequest) -> Result<Tokens, String> + Send>;
type ClassifyFn = Box<dyn FnMut(&ClassifyRequest) -> Result<f64, String> + Send>;

/// Token emitted by [`ScriptedBackend::junk`]; never produced by preprocessing
/// because it contains a digit.
pub const JUNK_TOKEN: &str = "junk0";

/// Backend whose answers come from closures, with call counters.
pub struct ScriptedBackend {
    generate: Option<GenerateFn>,
    classify: Option<ClassifyFn>,
    capabilities: Vec<Capability>,
    generate_calls: Arc<AtomicUsize>,
    classify_calls: Arc<AtomicUsize>,
}

impl Default for ScriptedBackend {
    fn default() -> Self {
        Self {
            generate: None,
            classify: None,
            capabilities: Vec::new(),
            generate_calls: Arc::new(AtomicUsize::new(0)),
            classify_calls: Arc::new(AtomicUsize::new(0)),
        }
    }
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_generate(mut self, f: impl FnMut(&GenerateRequest) -> Result<Tokens, String> + Send + 'static) -> Self {
        self.generate = Some(Box::new(f));
        if !self.capabilities.contains(&Capability::Generate) {
            self.capabilities.push(Capability::Generate);
        }
        self
    }

    pub fn with_classify(mut self, f: impl FnMut(&ClassifyRequest) -> Result<f64, String> + Send + 'static) -> Self {
        self.classify = Some(Box::new(f));
        if !self.capabilities.contains(&Capability::Classify) {
            self.capabilities.push(Capability::Classify);
        }
        self
    }

    /// Counter of generate requests answered so far (shared handle).
    pub fn generate_calls(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.generate_calls)
    }

    pub fn classify_calls(&self) -> Arc<AtomicUsize> {
        Arc::clone(&self.classify_calls)
    }

    /// Generator that returns each sample's ground-truth comment.
    pub fn oracle(corpus: &Corpus) -> Self {
        let truth = comments_by_id(corpus);
        Self::new().with_generate(move |r| {
            truth.get(&r.id).cloned().ok_or_else(|| format!("unknown sample {}", r.id))
        })
    }

    /// Generator whose output shares no token with any preprocessed comment.
    pub fn junk() -> Self {
        Self::new().with_generate(|_| Ok(vec![JUNK_TOKEN.to_string(); 3]))
    }

    /// Generator that returns the ground truth with each token independently
    /// replaced by junk with probability `rate`, deterministically per
    /// (seed, id, position).
    pub fn noisy(corpus: &Corpus, rate: f64, seed: u64) -> Self {
        let truth = comments_by_id(corpus);
        Self::new().with_generate(move |r| {
            let gt = truth.get(&r.id).ok_or_else(|| format!("unknown sample {}", r.id))?;
            Ok(noisy_copy(gt, &r.id, rate, seed))
        })
    }

    /// Classifier returning a fixed score.
    pub fn constant_score(score: f64) -> Self {
        Self::new().with_classify(move |_| Ok(score))
    }

    /// Classifier scoring sentence BLEU of input vs retrieved code.
    pub fn lexical_classifier() -> Self {
        let cfg = BleuConfig::default();
        Self::new().with_classify(move |r| {
            if r.retrieved_code.is_empty() {
                return Ok(0.0);
            }
            sentence_bleu(&r.input_code, &r.retrieved_code, &cfg).map_err(|e| e.to_string())
        })
    }
}

fn comments_by_id(corpus: &Corpus) -> HashMap<String, Tokens> {
    corpus.samples.iter().map(|s| (s.id.clone(), s.comment_tokens.clone())).collect()
}

/// Deterministic token corruption used by the noisy generator.
pub fn noisy_copy(tokens: &[String], id: &str, rate: f64, seed: u64) -> Tokens {
    tokens
        .iter()
        .enumerate()
        .map(|(pos, t)| {
            let mut h = std::collections::hash_map::DefaultHasher::new();
            (seed, id, pos).hash(&mut h);
            let u = (h.finish() >> 11) as f64 / (1u64 << 53) as f64;
            if u < rate {
                JUNK_TOKEN.to_string()
            } else {
                t.clone()
            }
        })
        .collect()
}

impl Backend for ScriptedBackend {
    fn capabilities(&self) -> &[Capability] {
        &self.capabilities
    }

    fn generate_batch(&mut self, requests: &[GenerateRequest]) -> Result<Vec<Tokens>, BackendError> {
        let f = self.generate.as_mut().ok_or(BackendError::Unsupported(Capability::Generate))?;
        requests
            .iter()
            .map(|r| {
                self.generate_calls.fetch_add(1, Ordering::SeqCst);
                f(r).map_err(|message| BackendError::Remote { id: r.id.clone(), message })
            })
            .collect()
    }

    fn classify_batch(&mut self, requests: &[ClassifyRequest]) -> Result<Vec<f64>, BackendError> {
        let f = self.classify.as_mut().ok_or(BackendError::Unsupported(Capability::Classify))?;
        requests
            .iter()
            .map(|r| {
                self.classify_calls.fetch_add(1, Ordering::SeqCst);
                f(r).map_err(|message| BackendError::Remote { id: r.id.clone(), message })
            })
            .collect()
    }
}

/// Serves the wire protocol on `input`/`output` until EOF, answering with
/// `backend`. Malformed lines get an error response (id `"?"` when none can
/// be recovered) and serving continues.
pub fn serve<B: Backend, R: BufRead, W: Write>(backend: &mut B, input: R, mut output: W) -> std::io::Result<()> {
    let hs = Handshake::new(backend.capabilities().to_vec());
    serde_json::to_writer(&mut output, &hs)?;
    output.write_all(b"\n")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<Request>(&line) {
            Ok(Request::Generate(r)) => match backend.generate(r.clone()) {
                Ok(comment) => Response::Comment { id: r.id, comment },
                Err(e) => Response::Error { id: r.id, error: remote_message(e) },
            },
            Ok(Request::Classify(r)) => match backend.classify(r.clone()) {
                Ok(score) => Response::Score { id: r.id, score },
                Err(e) => Response::Error { id: r.id, error: remote_message(e) },
            },
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&line)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_string))
                    .unwrap_or_else(|| "?".to_string());
                Response::Error { id, error: format!("malformed request: {e}") }
            }
        };
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
    }
    Ok(())
}

fn remote_message(e: BackendError) -> String {
    match e {
        BackendError::Remote { message, .. } => message,
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toks;

    #[test]
    fn counts_calls() {
        let mut b = ScriptedBackend::junk();
        let calls = b.generate_calls();
        let reqs: Vec<GenerateRequest> =
            (0..3).map(|i| GenerateRequest { id: i.to_string(), code: toks(&["x"]), ast: None }).collect();
        let out = b.generate_batch(&reqs).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
        assert!(matches!(b.classify_batch(&[]), Err(BackendError::Unsupported(_))));
    }

    #[test]
    fn serve_survives_malformed_lines() {
        let mut b = ScriptedBackend::junk().with_classify(|_| Ok(0.25));
        let input = concat!(
            r#"{"id":"a","type":"generate","code":["x"],"ast":null}"#, "\n",
            "not json\n",
            r#"{"id":"b","type":"explode"}"#, "\n",
            r#"{"id":"c","type":"classify","input_code":["x"],"retrieved_code":["y"]}"#, "\n",
        );
        let mut out = Vec::new();
        serve(&mut b, input.as_bytes(), &mut out).unwrap();
        let lines: Vec<serde_json::Value> =
            String::from_utf8(out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines[0]["protocol"], "hybridsum/1");
        assert_eq!(lines[1]["comment"][0], JUNK_TOKEN);
        assert_eq!(lines[2]["id"], "?");
        assert!(lines[2]["error"].is_string());
        assert_eq!(lines[3]["id"], "b");
        assert!(lines[3]["error"].is_string());
        assert_eq!(lines[4]["score"], 0.25);
    }

    #[test]
    fn noisy_is_deterministic() {
        let t = toks(&["a", "b", "c", "d", "e", "f"]);
        assert_eq!(noisy_copy(&t, "x", 0.5, 1), noisy_copy(&t, "x", 0.5, 1));
        assert_eq!(noisy_copy(&t, "x", 0.0, 1), t);
        assert!(noisy_copy(&t, "x", 1.0, 1).iter().all(|w| w == JUNK_TOKEN));
    }
}
