//! End-to-end dynamic combination: retrieve, route, then reuse or generate.
//!
//! [`run_experiment`] produces predictions for each configured system
//! (IR-only, NMT-only, the routed combination, and the oracle router) and an
//! [`EvaluationReport`] with metric rows, classifier quality, the
//! IR-better / NMT-better partition, effort saved and paired significance
//! tests.

mod config;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub use config::{ConfigError, CorpusSection, ExperimentSection, RunConfig, System, ENV_BACKEND_TIMEOUT, ENV_CLASSIFIER_CMD, ENV_GENERATOR_CMD};

use crate::backend::{Backend, BackendError, ClassifyRequest, GenerateRequest};
use crate::corpus::{filter_auto_generated, load_corpus, split_by_project, Corpus, Sample, Split};
use crate::labeler::{label_sample, LabelConfig};
use crate::metrics::{
    classification_metrics, corpus_bleu, evaluate, sentence_bleu, wilcoxon_signed_rank, BleuConfig, BleuMode,
    ClassificationMetrics, Confusion, MetricOptions, MetricReport, Prediction, WilcoxonResult,
};
use crate::retrieval::{retrieve_all, retrieve_top1, Bm25Index, RetrievalResult, SelfExclusion};
use crate::router::{clamp_score, lexical_score, oracle_route, route, Choice, RouterConfig, RouterKind, RoutingDecision};
use crate::{Error, Result, Tokens};

/// Routes one sample and produces its comment.
///
/// The generator is called only when the router picks NMT (or when the
/// oracle router needs the NMT output to compare against the ground truth).
pub fn generate_comment(
    sample: &Sample,
    corpus: &Corpus,
    index: &Bm25Index,
    router: &RouterConfig,
    generator: &mut dyn Backend,
    classifier: Option<&mut dyn Backend>,
    bleu: &BleuConfig,
) -> Result<RoutingDecision> {
    let exclusion = if corpus.split_of(&sample.id) == Some(Split::Train) { SelfExclusion::On } else { SelfExclusion::Off };
    let retrieved = retrieve_top1(index, corpus, sample, exclusion)?;
    let retrieved_code = &corpus.get(&retrieved.retrieved_id).expect("indexed sample in corpus").code_tokens;
    let mut nmt = None;
    let (score, choice) = match router.kind {
        RouterKind::AlwaysIr => (1.0, Choice::Ir),
        RouterKind::AlwaysNmt => (0.0, Choice::Nmt),
        RouterKind::Lexical => {
            let s = lexical_score(&sample.code_tokens, retrieved_code, bleu).map_err(|e| Error::for_sample(&sample.id, e))?;
            (s, route(s, router.threshold))
        }
        RouterKind::External => {
            let c = classifier.ok_or_else(|| Error::Invalid("external router needs a classifier backend".into()))?;
            let s = c
                .classify(ClassifyRequest {
                    id: sample.id.clone(),
                    input_code: sample.code_tokens.clone(),
                    retrieved_code: retrieved_code.clone(),
                })
                .map_err(|e| Error::for_sample(&sample.id, e))?;
            let s = clamp_score(&sample.id, s);
            (s, route(s, router.threshold))
        }
        RouterKind::Oracle => {
            let out = generator.generate(request_for(sample)).map_err(|e| Error::for_sample(&sample.id, e))?;
            let ir = sentence_bleu(&retrieved.retrieved_comment, &sample.comment_tokens, bleu)
                .map_err(|e| Error::for_sample(&sample.id, e))?;
            let nm = sentence_bleu(&out, &sample.comment_tokens, bleu).map_err(|e| Error::for_sample(&sample.id, e))?;
            nmt = Some(out);
            (ir, oracle_route(ir, nm))
        }
    };
    let emitted_comment = match choice {
        Choice::Ir => retrieved.retrieved_comment,
        Choice::Nmt => match nmt {
            Some(c) => c,
            None => generator.generate(request_for(sample)).map_err(|e| Error::for_sample(&sample.id, e))?,
        },
    };
    Ok(RoutingDecision { sample_id: sample.id.clone(), score, choice, emitted_comment })
}

fn request_for(sample: &Sample) -> GenerateRequest {
    GenerateRequest { id: sample.id.clone(), code: sample.code_tokens.clone(), ast: sample.ast_tokens.clone() }
}

/// Skipped generator calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Effort {
    /// Samples routed to IR, i.e. never sent to the generator.
    pub skipped_nmt: usize,
    pub total: usize,
    pub fraction: f64,
}

pub fn effort_saved(decisions: &[RoutingDecision]) -> Result<Effort> {
    if decisions.is_empty() {
        return Err(Error::Invalid("effort accounting needs at least one decision".into()));
    }
    let skipped = decisions.iter().filter(|d| d.choice == Choice::Ir).count();
    Ok(Effort { skipped_nmt: skipped, total: decisions.len(), fraction: skipped as f64 / decisions.len() as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBleu {
    pub system: String,
    pub bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionRow {
    pub count: usize,
    /// Corpus BLEU of each system restricted to this partition; empty when
    /// the partition is empty.
    pub bleu: Vec<SystemBleu>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub ir_better: PartitionRow,
    pub nmt_better: PartitionRow,
}

/// Per-sample inputs to [`partition_analysis`].
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionInput<'a> {
    pub bleu_ir: f64,
    pub bleu_nmt: f64,
    pub reference: &'a [String],
    /// Output of every system for this sample, same order as `systems`.
    pub outputs: Vec<&'a [String]>,
}

/// Splits samples into IR-better (`bleu_ir > bleu_nmt`) and NMT-better
/// (everything else) and recomputes corpus BLEU of each system per part.
pub fn partition_analysis(samples: &[PartitionInput<'_>], systems: &[&str], bleu: &BleuConfig) -> Result<Partition> {
    let cfg = BleuConfig { mode: BleuMode::Corpus, ..bleu.clone() };
    let row = |pred: &dyn Fn(&PartitionInput<'_>) -> bool| -> Result<PartitionRow> {
        let part: Vec<&PartitionInput<'_>> = samples.iter().filter(|s| pred(s)).collect();
        let mut rows = Vec::new();
        if !part.is_empty() {
            for (k, name) in systems.iter().enumerate() {
                let pairs: Vec<(&[String], &[String])> = part.iter().map(|s| (s.outputs[k], s.reference)).collect();
                rows.push(SystemBleu { system: name.to_string(), bleu: corpus_bleu(&pairs, &cfg)?.composite });
            }
        }
        Ok(PartitionRow { count: part.len(), bleu: rows })
    };
    Ok(Partition {
        ir_better: row(&|s| s.bleu_ir > s.bleu_nmt)?,
        nmt_better: row(&|s| s.bleu_ir <= s.bleu_nmt)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRow {
    pub system: String,
    pub metrics: MetricReport,
}

/// How well the configured router agrees with the oracle labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierRow {
    pub confusion: Confusion,
    pub metrics: ClassificationMetrics,
    pub combined_bleu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceRow {
    pub system_a: String,
    pub system_b: String,
    /// Absent when there were too few non-zero differences.
    pub result: Option<WilcoxonResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub test_size: usize,
    pub router: RouterConfig,
    pub systems: Vec<SystemRow>,
    pub classifier: Option<ClassifierRow>,
    pub partition: Option<Partition>,
    pub effort: Effort,
    /// Generate requests issued for the combined system.
    pub combined_backend_calls: usize,
    pub significance: Vec<SignificanceRow>,
}

impl EvaluationReport {
    pub fn system(&self, name: &str) -> Option<&MetricReport> {
        self.systems.iter().find(|r| r.system == name).map(|r| &r.metrics)
    }
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: EvaluationReport,
    pub predictions: BTreeMap<System, Vec<Prediction>>,
    pub decisions: Vec<RoutingDecision>,
    pub retrievals: Vec<RetrievalResult>,
}

/// Loads, filters and (unless presplit) splits the corpus named by the config.
pub fn prepare_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let mut corpus = load_corpus(&cfg.corpus.path, &cfg.corpus.preprocess)?;
    if cfg.corpus.filter_auto_generated {
        corpus = filter_auto_generated(&corpus, &cfg.corpus.preprocess);
    }
    if cfg.corpus.presplit {
        if !corpus.is_split() {
            return Err(crate::corpus::CorpusError::Unsplit.into());
        }
        Ok(corpus)
    } else {
        Ok(split_by_project(&corpus, cfg.corpus.ratios, cfg.seed)?)
    }
}

/// Backends used by a run.
pub struct Backends<'a> {
    pub generator: &'a mut dyn Backend,
    pub classifier: Option<&'a mut dyn Backend>,
}

/// Runs every configured system on the test split of an already split corpus.
pub fn run_experiment(corpus: &Corpus, cfg: &RunConfig, backends: Backends<'_>) -> Result<ExperimentOutput> {
    let Backends { generator, mut classifier } = backends;
    let index = Bm25Index::build(corpus, cfg.bm25)?;
    let test = corpus.require_split(Split::Test)?;
    let retrievals = retrieve_all(&index, corpus, &test)?;
    let by_id: HashMap<&str, &Sample> = corpus.samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let sent_bleu = BleuConfig { mode: BleuMode::Sentence, ..cfg.metrics.bleu.clone() };
    let batch = cfg.experiment.batch_size;
    let wants = |s: System| cfg.experiment.systems.contains(&s);
    let need_all_nmt = wants(System::Nmt) || wants(System::Oracle) || cfg.router.kind == RouterKind::Oracle;

    // Router scores for the combined system.
    let retrieved_code: Vec<&Tokens> = retrievals.iter().map(|r| &by_id[r.retrieved_id.as_str()].code_tokens).collect();
    let scores: Vec<f64> = match cfg.router.kind {
        RouterKind::AlwaysIr => vec![1.0; test.len()],
        RouterKind::AlwaysNmt | RouterKind::Oracle => vec![0.0; test.len()],
        RouterKind::Lexical => test
            .iter()
            .zip(&retrieved_code)
            .map(|(s, rc)| lexical_score(&s.code_tokens, rc, &sent_bleu).map_err(|e| Error::for_sample(&s.id, e)))
            .collect::<Result<_>>()?,
        RouterKind::External => {
            let c = classifier
                .as_deref_mut()
                .ok_or_else(|| Error::Invalid("external router needs a classifier backend".into()))?;
            let mut out = Vec::with_capacity(test.len());
            for (chunk, codes) in test.chunks(batch).zip(retrieved_code.chunks(batch)) {
                let reqs: Vec<ClassifyRequest> = chunk
                    .iter()
                    .zip(codes)
                    .map(|(s, rc)| ClassifyRequest {
                        id: s.id.clone(),
                        input_code: s.code_tokens.clone(),
                        retrieved_code: (*rc).clone(),
                    })
                    .collect();
                let got = c.classify_batch(&reqs).map_err(|e| backend_err(e, &chunk[0].id))?;
                out.extend(chunk.iter().zip(got).map(|(s, v)| clamp_score(&s.id, v)));
            }
            out
        }
    };

    // Oracle needs NMT everywhere before it can decide, so generate first.
    let mut nmt: HashMap<String, Tokens> = HashMap::new();
    let mut combined_backend_calls = 0;
    let mut choices: Vec<Choice> = match cfg.router.kind {
        RouterKind::Oracle => Vec::new(),
        _ => scores
            .iter()
            .map(|&s| match cfg.router.kind {
                RouterKind::AlwaysIr => Choice::Ir,
                RouterKind::AlwaysNmt => Choice::Nmt,
                _ => route(s, cfg.router.threshold),
            })
            .collect(),
    };
    if cfg.router.kind != RouterKind::Oracle {
        let routed: Vec<&Sample> =
            test.iter().zip(&choices).filter(|(_, c)| **c == Choice::Nmt).map(|(s, _)| *s).collect();
        combined_backend_calls = routed.len();
        generate_into(generator, &routed, batch, &mut nmt)?;
    }
    if need_all_nmt {
        let missing: Vec<&Sample> = test.iter().filter(|s| !nmt.contains_key(&s.id)).copied().collect();
        if cfg.router.kind == RouterKind::Oracle {
            combined_backend_calls = missing.len();
        }
        generate_into(generator, &missing, batch, &mut nmt)?;
    }

    // Per-sample sentence BLEU for both sources, when NMT output is complete.
    let both: Option<Vec<SourcePair<'_>>> = if need_all_nmt {
        Some(
            test.iter()
                .zip(&retrievals)
                .map(|(s, r)| {
                    let ir = r.retrieved_comment.as_slice();
                    let nm = nmt[&s.id].as_slice();
                    Ok(SourcePair {
                        ir,
                        nmt: nm,
                        bleu_ir: sentence_bleu(ir, &s.comment_tokens, &sent_bleu)?,
                        bleu_nmt: sentence_bleu(nm, &s.comment_tokens, &sent_bleu)?,
                    })
                })
                .collect::<Result<_, crate::metrics::MetricError>>()?,
        )
    } else {
        None
    };
    let mut oracle_scores = Vec::new();
    if cfg.router.kind == RouterKind::Oracle {
        let pairs = both.as_ref().expect("oracle computes both scores");
        choices = pairs.iter().map(|p| oracle_route(p.bleu_ir, p.bleu_nmt)).collect();
        oracle_scores = pairs.iter().map(|p| p.bleu_ir).collect();
    }

    let decisions: Vec<RoutingDecision> = test
        .iter()
        .zip(&retrievals)
        .enumerate()
        .map(|(i, (s, r))| RoutingDecision {
            sample_id: s.id.clone(),
            score: if cfg.router.kind == RouterKind::Oracle { oracle_scores[i] } else { scores[i] },
            choice: choices[i],
            emitted_comment: match choices[i] {
                Choice::Ir => r.retrieved_comment.clone(),
                Choice::Nmt => nmt[&s.id].clone(),
            },
        })
        .collect();

    // Predictions per system.
    let mut predictions: BTreeMap<System, Vec<Prediction>> = BTreeMap::new();
    for system in System::ALL.into_iter().filter(|s| wants(*s)) {
        let preds = test
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let candidate = match system {
                    System::Ir => retrievals[i].retrieved_comment.clone(),
                    System::Nmt => nmt[&s.id].clone(),
                    System::Combined => decisions[i].emitted_comment.clone(),
                    System::Oracle => {
                        let p = &both.as_ref().expect("oracle system needs NMT output")[i];
                        match oracle_route(p.bleu_ir, p.bleu_nmt) {
                            Choice::Ir => p.ir.to_vec(),
                            Choice::Nmt => p.nmt.to_vec(),
                        }
                    }
                };
                Prediction { id: s.id.clone(), candidate, reference: s.comment_tokens.clone() }
            })
            .collect();
        predictions.insert(system, preds);
    }

    let report = build_report(cfg, &test, &decisions, &predictions, both.as_deref(), combined_backend_calls)?;
    Ok(ExperimentOutput { report, predictions, decisions, retrievals })
}

/// Both candidate comments for one test sample and their sentence BLEU.
struct SourcePair<'a> {
    ir: &'a [String],
    nmt: &'a [String],
    bleu_ir: f64,
    bleu_nmt: f64,
}

fn backend_err(e: BackendError, fallback_id: &str) -> Error {
    let id = match &e {
        BackendError::Remote { id, .. } | BackendError::Protocol { id, .. } | BackendError::Timeout { id, .. } => id.clone(),
        _ => fallback_id.to_string(),
    };
    Error::for_sample(&id, e)
}

fn generate_into(
    generator: &mut dyn Backend,
    samples: &[&Sample],
    batch: usize,
    out: &mut HashMap<String, Tokens>,
) -> Result<()> {
    for chunk in samples.chunks(batch.max(1)) {
        let reqs: Vec<GenerateRequest> = chunk.iter().map(|s| request_for(s)).collect();
        let got = generator.generate_batch(&reqs).map_err(|e| backend_err(e, &chunk[0].id))?;
        for (s, c) in chunk.iter().zip(got) {
            out.insert(s.id.clone(), c);
        }
    }
    Ok(())
}

fn build_report(
    cfg: &RunConfig,
    test: &[&Sample],
    decisions: &[RoutingDecision],
    predictions: &BTreeMap<System, Vec<Prediction>>,
    both: Option<&[SourcePair<'_>]>,
    combined_backend_calls: usize,
) -> Result<EvaluationReport> {
    let opts: &MetricOptions = &cfg.metrics;
    let mut systems = Vec::new();
    let mut per_sample_bleu: BTreeMap<System, Vec<f64>> = BTreeMap::new();
    for (system, preds) in predictions {
        let mut m = evaluate(preds, opts, true)?;
        let ps = m.per_sample.take().expect("per-sample kept");
        per_sample_bleu.insert(*system, ps.iter().map(|s| s.bleu).collect());
        systems.push(SystemRow { system: system.name().to_string(), metrics: m });
    }

    let classifier = match (both, cfg.router.kind) {
        (Some(sources), RouterKind::Lexical | RouterKind::External) => {
            // Labels use the same definition as the triplet labeler.
            let label_cfg = LabelConfig {
                bleu: BleuConfig { mode: BleuMode::Sentence, ..cfg.metrics.bleu.clone() },
                ..cfg.labeling.clone()
            };
            let mut confusion = Confusion::default();
            for (i, s) in test.iter().enumerate() {
                let label = label_sample(&s.comment_tokens, sources[i].ir, sources[i].nmt, &label_cfg)?;
                confusion.record(decisions[i].choice == Choice::Ir, label.label.is_positive());
            }
            let metrics = classification_metrics(confusion)?;
            let combined_bleu = systems
                .iter()
                .find(|r| r.system == System::Combined.name())
                .map_or(0.0, |r| r.metrics.bleu);
            Some(ClassifierRow { confusion, metrics, combined_bleu })
        }
        _ => None,
    };

    let partition = match both {
        Some(pairs) => {
            let names: Vec<&str> = predictions.keys().map(|s| s.name()).collect();
            let inputs: Vec<PartitionInput<'_>> = test
                .iter()
                .enumerate()
                .map(|(i, s)| PartitionInput {
                    bleu_ir: pairs[i].bleu_ir,
                    bleu_nmt: pairs[i].bleu_nmt,
                    reference: &s.comment_tokens,
                    outputs: predictions.values().map(|p| p[i].candidate.as_slice()).collect(),
                })
                .collect();
            Some(partition_analysis(&inputs, &names, &cfg.metrics.bleu)?)
        }
        None => None,
    };

    let mut significance = Vec::new();
    if let Some(combined) = per_sample_bleu.get(&System::Combined) {
        for (system, scores) in per_sample_bleu.iter().filter(|(s, _)| **s != System::Combined) {
            let paired: Vec<(f64, f64)> = combined.iter().copied().zip(scores.iter().copied()).collect();
            significance.push(SignificanceRow {
                system_a: System::Combined.name().to_string(),
                system_b: system.name().to_string(),
                result: wilcoxon_signed_rank(&paired).ok(),
            });
        }
    }

    Ok(EvaluationReport {
        test_size: test.len(),
        router: cfg.router.clone(),
        systems,
        classifier,
        partition,
        effort: effort_saved(decisions)?,
        combined_backend_calls,
        significance,
    })
}
