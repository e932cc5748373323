//! Frozen values computed outside this crate: NLTK for BLEU, SciPy for the
//! Wilcoxon test, a standalone C program enumerating all 2^30 sign
//! assignments, and short hand-written Python for BM25, METEOR, ROUGE-L and
//! CIDEr.

use hybridsum::metrics::{
    cider, cider_per_sample, corpus_bleu, evaluate, meteor, rouge_l, sentence_bleu, wilcoxon_signed_rank, BleuConfig,
    BleuMode, MeteorConfig, MetricOptions, Prediction, WilcoxonMethod,
};
use hybridsum::retrieval::{Bm25Index, Bm25Params};
use hybridsum::{split_tokens, toks};

mod common;
use common::{N30_EXACT_P, X30, Y30};

fn close(got: f64, want: f64, tol: f64) {
    assert!((got - want).abs() <= tol, "got {got}, want {want} (tol {tol})");
}

#[test]
fn bm25_three_docs() {
    let docs = [
        ("a", split_tokens("get user name")),
        ("b", split_tokens("set user name value value")),
        ("c", split_tokens("get file size")),
    ];
    let index = Bm25Index::from_docs(docs.iter().map(|(i, t)| (*i, t.as_slice())), Bm25Params::default()).unwrap();
    let q = split_tokens("get user size");
    close(index.score(&q, "a").unwrap(), 1.0155435560488217, 1e-12);
    close(index.score(&q, "b").unwrap(), 0.40913984991894975, 1e-12);
    close(index.score(&q, "c").unwrap(), 1.5674176674388653, 1e-12);
    assert_eq!(index.top1(&q, None).map(|(id, _)| id), Some("c"));
    assert_eq!(index.top1(&q, Some("c")).map(|(id, _)| id), Some("a"));

    close(index.score(&toks(&["value"]), "b").unwrap(), 1.2235086558187513, 1e-12);
    close(index.idf("get"), 0.47000362924573563, 1e-12);
    close(index.idf("value"), 0.9808292530117263, 1e-12);
    close(index.idf("zzz"), 2.0794415416798357, 1e-12);
}

const PAIRS: [(&str, &str); 3] = [
    ("returns the user name", "returns the name of the user"),
    ("sets the file size to the given value", "sets the size of the file"),
    ("adds a new item to the list", "adds an item to the list"),
];

fn pairs() -> Vec<(Vec<String>, Vec<String>)> {
    PAIRS.iter().map(|(c, r)| (split_tokens(c), split_tokens(r))).collect()
}

#[test]
fn corpus_bleu_matches_nltk() {
    let owned = pairs();
    let p: Vec<(&[String], &[String])> = owned.iter().map(|(c, r)| (c.as_slice(), r.as_slice())).collect();
    let cfg = BleuConfig { mode: BleuMode::Corpus, ..BleuConfig::default() };
    let b = corpus_bleu(&p, &cfg).unwrap();
    close(b.composite, 0.26537486354444767, 1e-12);
    let per_n = [0.7368421052631579, 0.4375, 0.15384615384615385, 0.10000000000000002];
    for (got, want) in b.per_n.iter().zip(per_n) {
        close(*got, want, 1e-12);
    }
    close(b.brevity_penalty, 1.0, 0.0);
}

#[test]
fn sentence_bleu_epsilon_matches_nltk_method1() {
    let owned = pairs();
    let (c, r) = &owned[0];
    let got = sentence_bleu(c, r, &BleuConfig::with_epsilon(0.1)).unwrap();
    close(got, 0.1457378792180198, 1e-12);
    // without smoothing the zero 4-gram precision zeroes the score
    assert_eq!(sentence_bleu(c, r, &BleuConfig::default()).unwrap(), 0.0);
}

#[test]
fn rouge_l_fixtures() {
    let want = [0.5571428571428572, 0.5494505494505494, 0.7602862254025046];
    for ((c, r), w) in pairs().iter().zip(want) {
        close(rouge_l(c, r).unwrap(), w, 1e-12);
    }
}

#[test]
fn meteor_fixtures() {
    let cfg = MeteorConfig::default();
    let want = [0.5441810344827586, 0.6000000000000001, 0.7934426229508196];
    for ((c, r), w) in pairs().iter().zip(want) {
        close(meteor(c, r, &cfg).unwrap(), w, 1e-12);
    }
    // repeated tokens: the best alignment needs search, not left-to-right greed
    let got = meteor(&split_tokens("the cat the cat sat"), &split_tokens("the cat sat on the mat"), &cfg).unwrap();
    close(got, 0.635593220338983, 1e-12);
}

#[test]
fn cider_fixtures() {
    let owned = pairs();
    let p: Vec<(&[String], &[String])> = owned.iter().map(|(c, r)| (c.as_slice(), r.as_slice())).collect();
    let per = cider_per_sample(&p).unwrap();
    let want = [0.38645172640589376, 0.26581738807173433, 0.5034770077350395];
    for (g, w) in per.iter().zip(want) {
        close(*g, w, 1e-12);
    }
    close(cider(&p).unwrap(), 0.3852487074042225, 1e-12);
}

#[test]
fn evaluate_agrees_with_the_parts() {
    let preds: Vec<Prediction> = pairs()
        .into_iter()
        .enumerate()
        .map(|(i, (candidate, reference))| Prediction { id: format!("s{i}"), candidate, reference })
        .collect();
    let r = evaluate(&preds, &MetricOptions::default(), false).unwrap();
    close(r.bleu, 0.26537486354444767, 1e-12);
    close(r.bleu_2, 0.4375, 1e-12);
    close(r.rouge_l, (0.5571428571428572 + 0.5494505494505494 + 0.7602862254025046) / 3.0, 1e-12);
    close(r.meteor, (0.5441810344827586 + 0.6000000000000001 + 0.7934426229508196) / 3.0, 1e-12);
    close(r.cider, 0.3852487074042225, 1e-12);
}

#[test]
fn wilcoxon_exact_matches_scipy() {
    let a = [0.81, 0.40, 0.62, 0.15, 0.93, 0.55, 0.71, 0.30, 0.48, 0.66];
    let b = [0.60, 0.45, 0.20, 0.05, 0.50, 0.52, 0.11, 0.38, 0.07, 0.26];
    let paired: Vec<(f64, f64)> = a.into_iter().zip(b).collect();
    let r = wilcoxon_signed_rank(&paired).unwrap();
    assert_eq!(r.method, WilcoxonMethod::Exact);
    assert_eq!(r.statistic, 5.0);
    close(r.p_value, 0.01953125, 1e-12);
}

#[test]
fn wilcoxon_normal_branch_at_thirty() {
    let paired: Vec<(f64, f64)> = X30.into_iter().zip(Y30).collect();
    let r = wilcoxon_signed_rank(&paired).unwrap();
    assert_eq!(r.n, 30);
    assert_eq!(r.method, WilcoxonMethod::Normal);
    assert_eq!(r.statistic, 217.5);
    // SciPy, method="approx", correction=True
    close(r.p_value, 0.7651754966533304, 1e-9);
    close(r.p_value, N30_EXACT_P, 0.02);
}
