mod common;

use std::sync::atomic::Ordering;

use common::{fixture_corpus, fixture_path, ref_corpus_bleu};
use hybridsum::backend::mock::ScriptedBackend;
use hybridsum::corpus::{split_by_project, Split, SplitRatios};
use hybridsum::labeler::Candidates;
use hybridsum::metrics::{sentence_bleu, BleuConfig};
use hybridsum::pipeline::{
    generate_comment, partition_analysis, prepare_corpus, run_experiment, Backends, PartitionInput, RunConfig, System,
};
use hybridsum::retrieval::Bm25Index;
use hybridsum::router::{route, sweep_grid, sweep_threshold, Choice, RouterConfig, RouterKind};
use hybridsum::{split_tokens, Tokens};

fn config(extra: &str) -> RunConfig {
    let text = format!(
        "seed = 5\n{extra}\n[corpus]\npath = {:?}\n[generator]\ntransport = \"subprocess\"\ncommand = [\"unused\"]\n",
        fixture_path()
    );
    RunConfig::from_toml(&text).unwrap()
}

#[test]
fn reference_bleu_agrees_with_nltk() {
    let pairs: Vec<(Tokens, Tokens)> = [
        ("returns the user name", "returns the name of the user"),
        ("sets the file size to the given value", "sets the size of the file"),
        ("adds a new item to the list", "adds an item to the list"),
    ]
    .iter()
    .map(|(c, r)| (split_tokens(c), split_tokens(r)))
    .collect();
    assert!((ref_corpus_bleu(&pairs) - 0.26537486354444767).abs() < 1e-12);
}

const PARTITION: [(&str, &str, &str); 10] = [
    ("returns the name of the user", "returns the name of the user", "gets the user"),
    ("sets the size of the buffer", "sets the size of the file", "set buffer size"),
    ("adds a new item to the list", "adds a new item to the queue", "adds item"),
    ("removes the given node from the graph", "removes the given edge from the graph", "remove node"),
    ("loads the cache value from a file", "loads the cache value from a file", "loads cache"),
    ("computes the total price of all orders", "returns the order", "computes the total price of orders"),
    ("resets the timer to its default state", "closes the socket", "resets the timer to default state"),
    ("checks whether the session has an owner", "formats the date", "checks whether the session has owner"),
    ("formats the record title as a string", "sets the record id", "formats the record title as string"),
    ("returns true if the token is set", "parses the image", "returns true if token is set"),
];

#[test]
fn partition_ten_samples() {
    let rows: Vec<[Tokens; 3]> =
        PARTITION.iter().map(|(r, i, n)| [split_tokens(r), split_tokens(i), split_tokens(n)]).collect();
    let eps = BleuConfig::with_epsilon(0.1);
    // NLTK sentence_bleu with SmoothingFunction(epsilon=0.1).method1, rounded.
    // Only comparable for candidates of 4+ tokens: shorter ones drop the
    // unreachable orders here, while NLTK keeps them.
    let nltk_ir = [1.0, 0.7598, 0.8091, 0.2749, 1.0, 0.03, 0.03, 0.03, 0.0803, 0.03];
    let nltk_nmt = [0.0884, 0.0497, 0.0146, 0.0123, 0.0146, 0.6732, 0.5115, 0.6732, 0.6732, 0.2876];
    let inputs: Vec<PartitionInput<'_>> = rows
        .iter()
        .enumerate()
        .map(|(k, [r, i, n])| {
            let bleu_ir = sentence_bleu(i, r, &eps).unwrap();
            let bleu_nmt = sentence_bleu(n, r, &eps).unwrap();
            if i.len() >= 4 {
                assert!((bleu_ir - nltk_ir[k]).abs() < 5e-5, "{k}: {bleu_ir}");
            }
            if n.len() >= 4 {
                assert!((bleu_nmt - nltk_nmt[k]).abs() < 5e-5, "{k}: {bleu_nmt}");
            }
            PartitionInput { bleu_ir, bleu_nmt, reference: r, outputs: vec![i.as_slice(), n.as_slice()] }
        })
        .collect();
    // "gets the user": p1 = 2/3, p2 = 1/2, p3 = 0.1/1 smoothed, BP = e^(1 - 6/3)
    let by_hand = (-1.0f64).exp() * (2.0 / 3.0 * 0.5 * 0.1f64).powf(1.0 / 3.0);
    assert!((inputs[0].bleu_nmt - by_hand).abs() < 1e-12);
    // "returns the order": p1 = 1/3, p2 = 0.1/2, p3 = 0.1/1, BP = e^(1 - 7/3)
    let by_hand = (1.0f64 - 7.0 / 3.0).exp() * (1.0 / 3.0 * 0.05 * 0.1f64).powf(1.0 / 3.0);
    assert!((inputs[5].bleu_ir - by_hand).abs() < 1e-12);
    let p = partition_analysis(&inputs, &["IR", "NMT"], &BleuConfig::default()).unwrap();
    assert_eq!(p.ir_better.count, 5);
    assert_eq!(p.nmt_better.count, 5);
    // NLTK corpus_bleu on each half
    assert!((p.ir_better.bleu[0].bleu - 0.7985065516266612).abs() < 1e-12);
    assert_eq!(p.ir_better.bleu[1].bleu, 0.0);
    assert_eq!(p.nmt_better.bleu[0].bleu, 0.0);
    assert!((p.nmt_better.bleu[1].bleu - 0.5941144529001952).abs() < 1e-12);
}

fn sweep_fixture() -> (Vec<Candidates>, Vec<f64>) {
    let refs = [
        "returns the name of the user", "sets the size of the buffer", "adds a new item to the list",
        "removes the node from the graph", "loads the value from a file", "computes the total price of all orders",
        "resets the timer to its default", "checks whether the session is open", "formats the title as a string",
        "returns true if the token is set",
    ];
    let mut dev = Vec::new();
    let mut scores = Vec::new();
    for k in 0..20 {
        let r = split_tokens(refs[k % 10]);
        let (ir, nmt) = if k % 3 == 0 {
            (r.clone(), r[..r.len() - 2].to_vec())
        } else if k % 3 == 1 {
            (split_tokens("closes the socket now"), r[1..].to_vec())
        } else {
            (r[..4].to_vec(), split_tokens("parses the image header"))
        };
        dev.push(Candidates {
            id: format!("d{k:02}"),
            input_code: split_tokens("x"),
            retrieved_code: split_tokens("x"),
            ir_comment: ir,
            nmt_comment: nmt,
            reference: r,
        });
        scores.push(((k * 7) % 20) as f64 / 19.0);
    }
    (dev, scores)
}

#[test]
fn sweep_twenty_samples_matches_brute_force() {
    let (dev, scores) = sweep_fixture();
    let r = sweep_threshold(&dev, &scores, &BleuConfig::default()).unwrap();
    assert_eq!(r.curve.len(), 21);
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (i, point) in r.curve.iter().enumerate() {
        let t = i as f64 * 0.05;
        assert!((point.threshold - t).abs() < 1e-12);
        let pairs: Vec<(Tokens, Tokens)> = dev
            .iter()
            .zip(&scores)
            .map(|(c, &s)| (if s >= point.threshold { c.ir_comment.clone() } else { c.nmt_comment.clone() }, c.reference.clone()))
            .collect();
        let want = ref_corpus_bleu(&pairs);
        assert!((point.bleu - want).abs() < 1e-12, "t={t}: {} vs {want}", point.bleu);
        assert_eq!(point.ir_count, scores.iter().filter(|&&s| s >= point.threshold).count());
        if want > best.0 {
            best = (want, point.threshold);
        }
    }
    assert_eq!(r.best_threshold, best.1);
    assert_eq!(r.best_bleu, best.0);
}

#[test]
fn generate_comment_calls_generator_only_for_nmt() {
    let corpus = split_by_project(&fixture_corpus(), SplitRatios::default(), 1).unwrap();
    let index = Bm25Index::build(&corpus, Default::default()).unwrap();
    let mut gen = ScriptedBackend::junk();
    let calls = gen.generate_calls();
    let router = RouterConfig::default();
    let bleu = BleuConfig::default();
    let mut nmt_routed = 0;
    for s in corpus.samples_in(Split::Test) {
        let d = generate_comment(s, &corpus, &index, &router, &mut gen, None, &bleu).unwrap();
        assert_eq!(d.choice, route(d.score, router.threshold));
        if d.choice == Choice::Nmt {
            nmt_routed += 1;
        }
    }
    assert!(nmt_routed > 0);
    assert_eq!(calls.load(Ordering::SeqCst), nmt_routed);
}

#[test]
fn external_router_without_classifier_fails() {
    let corpus = split_by_project(&fixture_corpus(), SplitRatios::default(), 1).unwrap();
    let index = Bm25Index::build(&corpus, Default::default()).unwrap();
    let s = corpus.samples_in(Split::Test)[0];
    let router = RouterConfig { kind: RouterKind::External, threshold: 0.4 };
    let err = generate_comment(s, &corpus, &index, &router, &mut ScriptedBackend::junk(), None, &BleuConfig::default());
    assert!(err.is_err());
}

#[test]
fn run_is_deterministic_and_accounts_for_effort() {
    let cfg = config("");
    let corpus = prepare_corpus(&cfg).unwrap();
    let go = || {
        let mut gen = ScriptedBackend::noisy(&corpus, 0.4, 9);
        let calls = gen.generate_calls();
        let out = run_experiment(&corpus, &cfg, Backends { generator: &mut gen, classifier: None }).unwrap();
        (out, calls.load(Ordering::SeqCst))
    };
    let (a, calls_a) = go();
    let (b, _) = go();
    assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    assert_eq!(a.predictions, b.predictions);

    let test_size = corpus.samples_in(Split::Test).len();
    assert_eq!(a.report.test_size, test_size);
    // NMT and oracle need every sample once; memoization means no repeats
    assert_eq!(calls_a, test_size);
    let nmt_routed = a.decisions.iter().filter(|d| d.choice == Choice::Nmt).count();
    assert_eq!(a.report.combined_backend_calls, nmt_routed);
    assert_eq!(a.report.effort.skipped_nmt, test_size - nmt_routed);
    assert_eq!(a.report.effort.fraction, (test_size - nmt_routed) as f64 / test_size as f64);
    let part = a.report.partition.as_ref().unwrap();
    assert_eq!(part.ir_better.count + part.nmt_better.count, test_size);
    assert_eq!(a.predictions.len(), 4);
    assert!(a.report.classifier.is_some());
}

#[test]
fn combined_only_run_calls_backend_for_nmt_routed_samples() {
    let cfg = config("[experiment]\nsystems = [\"ir\", \"combined\"]");
    let corpus = prepare_corpus(&cfg).unwrap();
    let mut gen = ScriptedBackend::noisy(&corpus, 0.4, 9);
    let calls = gen.generate_calls();
    let out = run_experiment(&corpus, &cfg, Backends { generator: &mut gen, classifier: None }).unwrap();
    let nmt_routed = out.decisions.iter().filter(|d| d.choice == Choice::Nmt).count();
    assert_eq!(calls.load(Ordering::SeqCst), nmt_routed);
    assert!(out.report.partition.is_none());
    assert_eq!(out.predictions.keys().copied().collect::<Vec<_>>(), vec![System::Ir, System::Combined]);
}

#[test]
fn external_router_uses_classifier_scores() {
    let cfg = config("[router]\nkind = \"external\"\nthreshold = 0.5\n[classifier]\ntransport = \"subprocess\"\ncommand = [\"unused\"]");
    let corpus = prepare_corpus(&cfg).unwrap();
    let mut gen = ScriptedBackend::junk();
    let mut cls = ScriptedBackend::constant_score(1.3);
    let cls_calls = cls.classify_calls();
    let out = run_experiment(&corpus, &cfg, Backends { generator: &mut gen, classifier: Some(&mut cls) }).unwrap();
    let n = out.report.test_size;
    assert_eq!(cls_calls.load(Ordering::SeqCst), n);
    // 1.3 clamps to 1.0, so everything is reused
    assert!(out.decisions.iter().all(|d| d.choice == Choice::Ir && d.score == 1.0));
    assert_eq!(out.report.combined_backend_calls, 0);
    assert_eq!(out.report.effort.fraction, 1.0);
}

#[test]
fn backend_failure_names_the_sample() {
    let cfg = config("[router]\nkind = \"always_nmt\"");
    let corpus = prepare_corpus(&cfg).unwrap();
    let victim = corpus.samples_in(Split::Test)[3].id.clone();
    let v = victim.clone();
    let mut gen = ScriptedBackend::new().with_generate(move |r| {
        if r.id == v {
            Err("model crashed".into())
        } else {
            Ok(r.code.clone())
        }
    });
    let err = run_experiment(&corpus, &cfg, Backends { generator: &mut gen, classifier: None }).unwrap_err();
    assert!(err.to_string().contains(&victim), "{err}");
    assert_eq!(err.kind(), "backend");
}

#[test]
fn oracle_router_matches_oracle_system() {
    let cfg = config("[router]\nkind = \"oracle\"");
    let corpus = prepare_corpus(&cfg).unwrap();
    let mut gen = ScriptedBackend::noisy(&corpus, 0.5, 2);
    let out = run_experiment(&corpus, &cfg, Backends { generator: &mut gen, classifier: None }).unwrap();
    assert_eq!(out.predictions[&System::Combined], out.predictions[&System::Oracle]);
    assert!(out.report.classifier.is_none());
    let grid = sweep_grid();
    assert_eq!(grid.len(), 21);
}
