use std::time::{Duration, Instant};

use hybridsum::backend::{
    Backend, BackendError, BackendSpec, BatchFileBackend, Capability, ClassifyRequest, GenerateRequest,
    SubprocessBackend,
};
use hybridsum::toks;

const MOCK: &str = env!("CARGO_BIN_EXE_hybridsum-mock-backend");

fn cmd(args: &[&str]) -> Vec<String> {
    std::iter::once(MOCK).chain(args.iter().copied()).map(str::to_string).collect()
}

fn gen(id: &str, code: &[&str]) -> GenerateRequest {
    GenerateRequest { id: id.into(), code: toks(code), ast: None }
}

fn spawn(args: &[&str], timeout: Duration, in_flight: usize) -> SubprocessBackend {
    SubprocessBackend::spawn(&cmd(args), timeout, in_flight, None).unwrap()
}

#[test]
fn generate_and_classify_round_trip() {
    let mut b = spawn(&["--generate", "echo", "--classify", "constant:0.25"], Duration::from_secs(10), 4);
    assert_eq!(b.capabilities(), [Capability::Generate, Capability::Classify]);
    let reqs: Vec<GenerateRequest> = (0..25).map(|i| gen(&format!("s{i:02}"), &["get", &format!("x{i}")])).collect();
    let out = b.generate_batch(&reqs).unwrap();
    assert_eq!(out.len(), 25);
    for (r, o) in reqs.iter().zip(&out) {
        assert_eq!(&r.code, o);
    }
    let score = b
        .classify(ClassifyRequest { id: "c".into(), input_code: toks(&["a"]), retrieved_code: toks(&["b"]) })
        .unwrap();
    assert_eq!(score, 0.25);
}

#[test]
fn remote_error_names_the_request() {
    let mut b = spawn(&["--generate", "echo", "--fail-on", "s2"], Duration::from_secs(10), 8);
    let reqs: Vec<GenerateRequest> = (0..4).map(|i| gen(&format!("s{i}"), &["x"])).collect();
    let err = b.generate_batch(&reqs).unwrap_err();
    match &err {
        BackendError::Remote { id, message } => {
            assert_eq!(id, "s2");
            assert!(message.contains("injected"), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
    // a per-request error does not kill the session
    assert_eq!(b.generate(gen("s9", &["y"])).unwrap(), toks(&["y"]));
}

#[test]
fn crash_is_reported_with_pending_id_and_poisons() {
    let mut b = spawn(&["--generate", "echo", "--crash-on", "s1"], Duration::from_secs(10), 1);
    let reqs: Vec<GenerateRequest> = (0..3).map(|i| gen(&format!("s{i}"), &["x"])).collect();
    let err = b.generate_batch(&reqs).unwrap_err().to_string();
    assert!(err.contains("s1"), "{err}");
    let again = b.generate(gen("s5", &["x"])).unwrap_err().to_string();
    assert!(again.contains("unusable"), "{again}");
}

#[test]
fn timeout_names_the_oldest_request() {
    let mut b = spawn(&["--generate", "echo", "--delay-ms", "1500"], Duration::from_millis(200), 2);
    let start = Instant::now();
    let err = b.generate_batch(&[gen("slow", &["x"]), gen("later", &["y"])]).unwrap_err();
    assert!(start.elapsed() < Duration::from_secs(5));
    match err {
        BackendError::Timeout { id, .. } => assert_eq!(id, "slow"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn handshake_checks() {
    let need_classify = SubprocessBackend::spawn(&cmd(&["--generate", "echo"]), Duration::from_secs(10), 1, Some(Capability::Classify));
    assert!(matches!(need_classify, Err(BackendError::Unsupported(Capability::Classify))));

    let wrong = ["sh", "-c", r#"echo '{"protocol":"other/9","capabilities":["generate"]}'; cat >/dev/null"#];
    let wrong: Vec<String> = wrong.iter().map(|s| s.to_string()).collect();
    let err = SubprocessBackend::spawn(&wrong, Duration::from_secs(10), 1, None).err().unwrap();
    assert!(matches!(err, BackendError::Handshake(_)), "{err}");

    let silent: Vec<String> = ["sh", "-c", "exit 0"].iter().map(|s| s.to_string()).collect();
    assert!(matches!(SubprocessBackend::spawn(&silent, Duration::from_secs(10), 1, None), Err(BackendError::Handshake(_))));

    let missing = vec!["/nonexistent/backend".to_string()];
    assert!(matches!(SubprocessBackend::spawn(&missing, Duration::from_secs(1), 1, None), Err(BackendError::Process(_))));
}

#[test]
fn garbage_response_is_a_protocol_error() {
    let script = r#"echo '{"protocol":"hybridsum/1","capabilities":["generate"]}'; read line; echo 'not json'"#;
    let c: Vec<String> = ["sh", "-c", script].iter().map(|s| s.to_string()).collect();
    let mut b = SubprocessBackend::spawn(&c, Duration::from_secs(10), 1, None).unwrap();
    let err = b.generate(gen("q1", &["x"])).unwrap_err();
    assert!(matches!(&err, BackendError::Protocol { id, .. } if id == "q1"), "{err}");
}

#[test]
fn unknown_response_id_is_a_protocol_error() {
    let script = r#"echo '{"protocol":"hybridsum/1","capabilities":["generate"]}'; read line; echo '{"id":"zz","comment":["a"]}'"#;
    let c: Vec<String> = ["sh", "-c", script].iter().map(|s| s.to_string()).collect();
    let mut b = SubprocessBackend::spawn(&c, Duration::from_secs(10), 1, None).unwrap();
    let err = b.generate(gen("q1", &["x"])).unwrap_err();
    assert!(matches!(&err, BackendError::Protocol { id, .. } if id == "zz"), "{err}");
}

#[test]
fn batch_file_with_command() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = BatchFileBackend::new(
        dir.path().join("req.jsonl"),
        dir.path().join("resp.jsonl"),
        Some(cmd(&["--generate", "echo", "--classify", "constant:0.5"])),
        Duration::from_secs(10),
    );
    let out = b.generate_batch(&[gen("a", &["x", "y"]), gen("b", &["z"])]).unwrap();
    assert_eq!(out, vec![toks(&["x", "y"]), toks(&["z"])]);
    let req = std::fs::read_to_string(dir.path().join("req.jsonl")).unwrap();
    assert_eq!(req.lines().count(), 2);
    assert!(req.contains(r#""type":"generate""#));
}

#[test]
fn batch_file_without_command_reads_offline_answers() {
    let dir = tempfile::tempdir().unwrap();
    let resp = dir.path().join("resp.jsonl");
    std::fs::write(&resp, "{\"id\":\"b\",\"score\":0.9}\n{\"id\":\"a\",\"score\":0.1}\n").unwrap();
    let mut b = BatchFileBackend::new(dir.path().join("req.jsonl"), resp, None, Duration::from_secs(1));
    let reqs: Vec<ClassifyRequest> = ["a", "b"]
        .iter()
        .map(|id| ClassifyRequest { id: id.to_string(), input_code: toks(&["x"]), retrieved_code: toks(&["y"]) })
        .collect();
    assert_eq!(b.classify_batch(&reqs).unwrap(), vec![0.1, 0.9]);
    let missing = ClassifyRequest { id: "c".into(), input_code: toks(&["x"]), retrieved_code: toks(&["y"]) };
    assert!(matches!(b.classify(missing), Err(BackendError::Protocol { id, .. }) if id == "c"));
}

#[test]
fn spec_connects_subprocess() {
    let spec = BackendSpec::Subprocess { command: cmd(&["--generate", "junk"]), timeout_secs: 10.0, max_in_flight: 3 };
    let mut b = spec.connect(Some(Capability::Generate)).unwrap();
    assert_eq!(b.generate(gen("a", &["x"])).unwrap(), toks(&["junk0", "junk0", "junk0"]));
}
