//! Stand-in generator/classifier speaking the backend protocol on stdio.
//!
//! ```text
//! hybridsum-mock-backend [--generate oracle|junk|noisy|echo] [--corpus FILE]
//!     [--rate R] [--seed N] [--classify lexical|constant:X]
//!     [--log FILE] [--fail-on ID] [--crash-on ID] [--delay-ms MS]
//! ```

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use hybridsum::backend::mock::{noisy_copy, serve, ScriptedBackend, JUNK_TOKEN};
use hybridsum::backend::{ClassifyRequest, GenerateRequest};
use hybridsum::corpus::{load_corpus, PreprocessConfig};
use hybridsum::metrics::{sentence_bleu, BleuConfig};

#[derive(Default)]
struct Args {
    generate: Option<String>,
    corpus: Option<PathBuf>,
    rate: f64,
    seed: u64,
    classify: Option<String>,
    log: Option<PathBuf>,
    fail_on: Vec<String>,
    crash_on: Vec<String>,
    delay: Duration,
}

fn parse_args() -> Result<Args, String> {
    let mut a = Args { rate: 0.5, ..Default::default() };
    let mut it = std::env::args().skip(1);
    while let Some(flag) = it.next() {
        let mut val = || it.next().ok_or_else(|| format!("{flag} needs a value"));
        match flag.as_str() {
            "--generate" => a.generate = Some(val()?),
            "--corpus" => a.corpus = Some(PathBuf::from(val()?)),
            "--rate" => a.rate = val()?.parse().map_err(|e| format!("--rate: {e}"))?,
            "--seed" => a.seed = val()?.parse().map_err(|e| format!("--seed: {e}"))?,
            "--classify" => a.classify = Some(val()?),
            "--log" => a.log = Some(PathBuf::from(val()?)),
            "--fail-on" => a.fail_on.push(val()?),
            "--crash-on" => a.crash_on.push(val()?),
            "--delay-ms" => {
                a.delay = Duration::from_millis(val()?.parse().map_err(|e| format!("--delay-ms: {e}"))?)
            }
            other => return Err(format!("unknown flag {other}")),
        }
    }
    if a.generate.is_none() && a.classify.is_none() {
        return Err("give --generate and/or --classify".into());
    }
    Ok(a)
}

type GenFn = Box<dyn FnMut(&GenerateRequest) -> Result<Vec<String>, String> + Send>;

fn generator(mode: &str, args: &Args) -> Result<GenFn, String> {
    let truth = || -> Result<std::collections::HashMap<String, Vec<String>>, String> {
        let path = args.corpus.as_ref().ok_or_else(|| format!("--generate {mode} needs --corpus"))?;
        let c = load_corpus(path, &PreprocessConfig::default()).map_err(|e| e.to_string())?;
        Ok(c.samples.into_iter().map(|s| (s.id, s.comment_tokens)).collect())
    };
    Ok(match mode {
        "junk" => Box::new(|_| Ok(vec![JUNK_TOKEN.to_string(); 3])),
        "echo" => Box::new(|r| Ok(r.code.clone())),
        "oracle" => {
            let t = truth()?;
            Box::new(move |r| t.get(&r.id).cloned().ok_or_else(|| format!("unknown sample {}", r.id)))
        }
        "noisy" => {
            let t = truth()?;
            let (rate, seed) = (args.rate, args.seed);
            Box::new(move |r| {
                let gt = t.get(&r.id).ok_or_else(|| format!("unknown sample {}", r.id))?;
                Ok(noisy_copy(gt, &r.id, rate, seed))
            })
        }
        other => return Err(format!("unknown generator {other:?}")),
    })
}

type ClsFn = Box<dyn FnMut(&ClassifyRequest) -> Result<f64, String> + Send>;

fn classifier(mode: &str) -> Result<ClsFn, String> {
    if mode == "lexical" {
        let cfg = BleuConfig::default();
        return Ok(Box::new(move |r| {
            if r.retrieved_code.is_empty() {
                return Ok(0.0);
            }
            sentence_bleu(&r.input_code, &r.retrieved_code, &cfg).map_err(|e| e.to_string())
        }));
    }
    if let Some(x) = mode.strip_prefix("constant:") {
        let v: f64 = x.parse().map_err(|e| format!("--classify {mode}: {e}"))?;
        return Ok(Box::new(move |_| Ok(v)));
    }
    Err(format!("unknown classifier {mode:?}"))
}

/// Applies logging, injected failures and delays around a request handler.
fn hooks(args: &Args) -> impl FnMut(&str) -> Result<(), String> + Send + Clone {
    let log = args.log.clone();
    let fail_on = args.fail_on.clone();
    let crash_on = args.crash_on.clone();
    let delay = args.delay;
    move |id: &str| {
        if let Some(path) = &log {
            let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| e.to_string())?;
            writeln!(f, "{id}").map_err(|e| e.to_string())?;
        }
        if crash_on.iter().any(|c| c == id) {
            std::process::exit(3);
        }
        if !delay.is_zero() {
            std::thread::sleep(delay);
        }
        if fail_on.iter().any(|c| c == id) {
            return Err(format!("injected failure for {id}"));
        }
        Ok(())
    }
}

fn run() -> Result<(), String> {
    let args = parse_args()?;
    let mut backend = ScriptedBackend::new();
    if let Some(mode) = &args.generate {
        let mut g = generator(mode, &args)?;
        let mut h = hooks(&args);
        backend = backend.with_generate(move |r| {
            h(&r.id)?;
            g(r)
        });
    }
    if let Some(mode) = &args.classify {
        let mut c = classifier(mode)?;
        let mut h = hooks(&args);
        backend = backend.with_classify(move |r| {
            h(&r.id)?;
            c(r)
        });
    }
    let stdin = std::io::stdin().lock();
    let stdout = std::io::stdout().lock();
    serve(&mut backend, stdin, stdout).map_err(|e| e.to_string())?;
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hybridsum-mock-backend: {e}");
            ExitCode::from(2)
        }
    }
}
