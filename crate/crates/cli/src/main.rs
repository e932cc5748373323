use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hybridsum::backend::{Backend, Capability};
use hybridsum::corpus::{
    filter_auto_generated, load_corpus, split_by_project, write_corpus, write_records, Corpus, CorpusError,
    PreprocessConfig, Split, SplitRatios,
};
use hybridsum::labeler::{build_triplet_dataset, read_candidates, write_candidates, write_triplets, Subset};
use hybridsum::metrics::{evaluate, wilcoxon_signed_rank, MetricOptions, Prediction};
use hybridsum::pipeline::{prepare_corpus, run_experiment, Backends, ConfigError, RunConfig};
use hybridsum::report::{parse_report, render_report, ReportFormat, ReportRendering};
use hybridsum::retrieval::{retrieve_top1, Bm25Index, Bm25Params, SelfExclusion};
use hybridsum::router::{lexical_scores, sweep_threshold, RouterKind};
use hybridsum::synthetic::{generate, SyntheticConfig};

/// Hybrid retrieval / neural code comment generation.
#[derive(Parser)]
#[command(name = "hybridsum", version)]
struct Cli {
    /// Seed for splits, shuffles and synthetic data (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "HYBRIDSUM_CONFIG")]
    config: Option<PathBuf>,
    /// Only log errors.
    #[arg(long, short, global = true, conflicts_with = "verbose")]
    quiet: bool,
    /// More logging; repeat for trace output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus preparation.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// BM25 index over the training split.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Build labeled triplets for training a routing classifier.
    Label(LabelArgs),
    /// Router tuning.
    #[command(subcommand)]
    Router(RouterCmd),
    /// Run the full experiment described by --config.
    Run(RunArgs),
    /// Score a predictions file.
    Evaluate(EvaluateArgs),
    /// Report rendering.
    #[command(subcommand)]
    Report(ReportCmd),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Preprocess, filter auto-generated comments and split by project.
    Prepare(PrepareArgs),
    /// Write a synthetic raw corpus.
    Synth(SynthArgs),
}

#[derive(Args)]
struct PrepareArgs {
    /// Raw corpus (JSONL); defaults to corpus.path from the config.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Train/validation/test fractions, comma separated.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Keep comments that look tool-generated.
    #[arg(long)]
    keep_auto_generated: bool,
    /// Keep the split stored in the input instead of re-splitting.
    #[arg(long)]
    presplit: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 12)]
    projects: usize,
    #[arg(long, default_value_t = 6)]
    min_samples: usize,
    #[arg(long, default_value_t = 30)]
    max_samples: usize,
    #[arg(long, default_value_t = 0.3)]
    duplicate_rate: f64,
}

#[derive(Subcommand)]
enum IndexCmd {
    /// Index the training split of a prepared corpus.
    Build(IndexBuildArgs),
    /// Retrieve the most similar training sample.
    Query(IndexQueryArgs),
}

#[derive(Args)]
struct IndexBuildArgs {
    /// Prepared (split) corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
}

#[derive(Args)]
struct IndexQueryArgs {
    #[arg(long)]
    index: PathBuf,
    /// Prepared corpus the index was built from.
    #[arg(long)]
    corpus: PathBuf,
    /// Query with the code of this corpus sample.
    #[arg(long, conflicts_with = "code", required_unless_present = "code")]
    id: Option<String>,
    /// Query with raw source code.
    #[arg(long)]
    code: Option<String>,
}

#[derive(Args)]
struct LabelArgs {
    /// Directory for triplets.jsonl and candidates_dev.jsonl.
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Subcommand)]
enum RouterCmd {
    /// Try thresholds 0.00..1.00 on dev candidates and report the best.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// Candidates file written by `label`.
    #[arg(long)]
    candidates: PathBuf,
    /// Score with the config's classifier backend instead of lexical similarity.
    #[arg(long)]
    external: bool,
    /// Write the curve as CSV here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    output_dir: PathBuf,
    /// Override router.threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Report format written to stdout.
    #[arg(long, default_value = "text")]
    format: String,
    /// Show proportions as percentages.
    #[arg(long)]
    percent: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Predictions JSONL (id, candidate, reference).
    #[arg(long)]
    predictions: PathBuf,
    /// Second predictions file; adds a paired Wilcoxon test on sentence BLEU.
    #[arg(long)]
    baseline: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ReportCmd {
    /// Convert a JSON or CSV report to another format.
    Render(RenderArgs),
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text")]
    format: String,
    #[arg(long)]
    percent: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

enum CliError {
    Config(ConfigError),
    Usage(String),
    Core(hybridsum::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Core(hybridsum::Error::Config(_)) => 2,
            _ => 1,
        }
    }

    /// `error[kind]: message` on one line.
    fn line(&self) -> String {
        let (kind, msg) = match self {
            CliError::Config(e) | CliError::Core(hybridsum::Error::Config(e)) => {
                ("config", format!("{}: {}", e.key, e.message))
            }
            CliError::Usage(m) => ("usage", m.clone()),
            CliError::Core(e) => (e.kind(), e.to_string()),
            CliError::Io { path, source } => ("io", format!("{}: {source}", path.display())),
        };
        format!("error[{kind}]: {}", msg.replace('\n', " "))
    }
}

impl From<hybridsum::Error> for CliError {
    fn from(e: hybridsum::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

macro_rules! core_err {
    ($e:expr) => {
        CliError::Core(hybridsum::Error::from($e))
    };
}

type CliResult<T> = Result<T, CliError>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })?;
    }
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

struct Ctx {
    seed: Option<u64>,
    config: Option<RunConfig>,
}

impl Ctx {
    fn require_config(&self, what: &str) -> CliResult<&RunConfig> {
        self.config.as_ref().ok_or_else(|| CliError::Usage(format!("{what} needs --config")))
    }

    fn preprocess(&self) -> PreprocessConfig {
        self.config.as_ref().map(|c| c.corpus.preprocess.clone()).unwrap_or_default()
    }

    fn seed(&self) -> u64 {
        self.seed.or(self.config.as_ref().map(|c| c.seed)).unwrap_or(0)
    }
}

fn connect(spec: &hybridsum::backend::BackendSpec, need: Capability) -> CliResult<Box<dyn Backend>> {
    spec.connect(Some(need)).map_err(|e| core_err!(e))
}

fn load_split_corpus(path: &Path, pre: &PreprocessConfig) -> CliResult<Corpus> {
    let corpus = load_corpus(path, pre).map_err(|e| core_err!(e))?;
    if !corpus.is_split() {
        return Err(core_err!(CorpusError::Unsplit));
    }
    Ok(corpus)
}

fn corpus_prepare(ctx: &Ctx, a: PrepareArgs) -> CliResult<()> {
    let pre = ctx.preprocess();
    let input = match (&a.input, &ctx.config) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.corpus.path.clone(),
        (None, None) => return Err(CliError::Usage("corpus prepare needs --input or --config".into())),
    };
    let ratios = match (&a.ratios, &ctx.config) {
        (Some(r), _) => match r[..] {
            [a, b, c] => SplitRatios([a, b, c]),
            _ => return Err(ConfigError::new("corpus.ratios", format!("expected 3 values, got {}", r.len())).into()),
        },
        (None, Some(c)) => c.corpus.ratios,
        (None, None) => SplitRatios::default(),
    };
    ratios.validate().map_err(|e| ConfigError::new("corpus.ratios", e.to_string()))?;
    let mut corpus = load_corpus(&input, &pre).map_err(|e| core_err!(e))?;
    let filter = !a.keep_auto_generated && ctx.config.as_ref().is_none_or(|c| c.corpus.filter_auto_generated);
    if filter {
        corpus = filter_auto_generated(&corpus, &pre);
    }
    if a.presplit {
        if !corpus.is_split() {
            return Err(core_err!(CorpusError::Unsplit));
        }
    } else {
        corpus = split_by_project(&corpus, ratios, ctx.seed()).map_err(|e| core_err!(e))?;
    }
    let mut out = create(&a.output)?;
    write_corpus(&corpus, &mut out).map_err(io_at(&a.output))?;
    out.flush().map_err(io_at(&a.output))?;
    let d = corpus.dropped;
    log::info!(
        "{} samples kept (train {}, validation {}, test {}); dropped {} empty comments, {} empty code, {} auto-generated",
        corpus.len(),
        corpus.samples_in(Split::Train).len(),
        corpus.samples_in(Split::Validation).len(),
        corpus.samples_in(Split::Test).len(),
        d.empty_comment,
        d.empty_code,
        d.auto_generated
    );
    Ok(())
}

fn corpus_synth(ctx: &Ctx, a: SynthArgs) -> CliResult<()> {
    if a.min_samples == 0 || a.min_samples > a.max_samples {
        return Err(CliError::Usage("need 0 < --min-samples <= --max-samples".into()));
    }
    if !(0.0..=1.0).contains(&a.duplicate_rate) {
        return Err(CliError::Usage("--duplicate-rate must lie in [0,1]".into()));
    }
    let cfg = SyntheticConfig {
        projects: a.projects,
        min_samples: a.min_samples,
        max_samples: a.max_samples,
        duplicate_rate: a.duplicate_rate,
        seed: ctx.seed(),
        ..Default::default()
    };
    let recs = generate(&cfg);
    let mut out = create(&a.output)?;
    write_records(&recs, &mut out).map_err(io_at(&a.output))?;
    out.flush().map_err(io_at(&a.output))?;
    log::info!("wrote {} records from {} projects", recs.len(), cfg.projects);
    Ok(())
}

fn index_build(ctx: &Ctx, a: IndexBuildArgs) -> CliResult<()> {
    let mut params = ctx.config.as_ref().map(|c| c.bm25).unwrap_or_default();
    if let Some(k1) = a.k1 {
        params.k1 = k1;
    }
    if let Some(b) = a.b {
        params.b = b;
    }
    if !(params.k1.is_finite() && params.k1 >= 0.0) {
        return Err(ConfigError::new("bm25.k1", format!("must be non-negative, got {}", params.k1)).into());
    }
    if !(0.0..=1.0).contains(&params.b) {
        return Err(ConfigError::new("bm25.b", format!("must lie in [0,1], got {}", params.b)).into());
    }
    let corpus = load_split_corpus(&a.corpus, &ctx.preprocess())?;
    let index = Bm25Index::build(&corpus, Bm25Params { k1: params.k1, b: params.b }).map_err(|e| core_err!(e))?;
    let mut out = create(&a.output)?;
    index.to_writer(&mut out).map_err(|e| core_err!(e))?;
    out.flush().map_err(io_at(&a.output))?;
    log::info!("indexed {} training samples, avg length {:.2}", index.doc_count(), index.avg_doc_len());
    Ok(())
}

fn index_query(ctx: &Ctx, a: IndexQueryArgs) -> CliResult<()> {
    let pre = ctx.preprocess();
    let index = Bm25Index::from_reader(open(&a.index)?).map_err(|e| core_err!(e))?;
    let corpus = load_corpus(&a.corpus, &pre).map_err(|e| core_err!(e))?;
    let query = match (&a.id, &a.code) {
        (Some(id), _) => corpus
            .get(id)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("no sample with id {id:?} in {}", a.corpus.display())))?,
        (None, Some(code)) => hybridsum::corpus::Sample {
            id: String::new(),
            project_id: String::new(),
            code_tokens: hybridsum::corpus::preprocess(code, &pre),
            ast_tokens: None,
            comment_tokens: Vec::new(),
        },
        (None, None) => unreachable!("clap requires --id or --code"),
    };
    let exclusion = if index.contains(&query.id) { SelfExclusion::On } else { SelfExclusion::Off };
    let r = retrieve_top1(&index, &corpus, &query, exclusion).map_err(|e| core_err!(e))?;
    let line = serde_json::json!({
        "query_id": r.query_id,
        "retrieved_id": r.retrieved_id,
        "score": r.score,
        "comment": r.retrieved_comment.join(" "),
    });
    println!("{line}");
    Ok(())
}

fn label(ctx: &Ctx, a: LabelArgs) -> CliResult<()> {
    let cfg = ctx.require_config("label")?;
    let corpus = prepare_corpus(cfg)?;
    let index = Bm25Index::build(&corpus, cfg.bm25).map_err(|e| core_err!(e))?;
    let mut generator = connect(&cfg.generator, Capability::Generate)?;
    let mut lcfg = cfg.labeling.clone();
    lcfg.seed = ctx.seed();
    let data = build_triplet_dataset(&corpus, &index, generator.as_mut(), &lcfg)?;
    let tpath = a.output_dir.join("triplets.jsonl");
    let mut t = create(&tpath)?;
    write_triplets(&data.triplets, &mut t).map_err(io_at(&tpath))?;
    t.flush().map_err(io_at(&tpath))?;
    let dev_ids: std::collections::HashSet<&str> =
        data.subset(Subset::Dev).map(|t| t.input_id.as_str()).collect();
    let dev: Vec<_> = data.candidates.iter().filter(|c| dev_ids.contains(c.id.as_str())).cloned().collect();
    let cpath = a.output_dir.join("candidates_dev.jsonl");
    let mut c = create(&cpath)?;
    write_candidates(&dev, &mut c).map_err(io_at(&cpath))?;
    c.flush().map_err(io_at(&cpath))?;
    log::info!(
        "{} triplets ({} positive), {} train / {} dev",
        data.triplets.len(),
        data.positives(),
        data.subset(Subset::Train).count(),
        dev.len()
    );
    Ok(())
}

fn router_sweep(ctx: &Ctx, a: SweepArgs) -> CliResult<()> {
    let dev = read_candidates(open(&a.candidates)?)?;
    let bleu = ctx.config.as_ref().map(|c| c.metrics.bleu.clone()).unwrap_or_default();
    let scores = if a.external {
        let cfg = ctx.require_config("router sweep --external")?;
        let spec = cfg
            .classifier
            .as_ref()
            .ok_or_else(|| ConfigError::new("classifier", "required for --external"))?;
        let mut backend = connect(spec, Capability::Classify)?;
        let reqs: Vec<_> = dev
            .iter()
            .map(|c| hybridsum::backend::ClassifyRequest {
                id: c.id.clone(),
                input_code: c.input_code.clone(),
                retrieved_code: c.retrieved_code.clone(),
            })
            .collect();
        let raw = backend.classify_batch(&reqs).map_err(|e| core_err!(e))?;
        dev.iter().zip(raw).map(|(c, s)| hybridsum::router::clamp_score(&c.id, s)).collect()
    } else {
        lexical_scores(&dev, &bleu).map_err(|e| core_err!(e))?
    };
    let result = sweep_threshold(&dev, &scores, &bleu).map_err(|e| core_err!(e))?;
    let mut csv = String::from("threshold,bleu,ir_count\n");
    for p in &result.curve {
        csv.push_str(&format!("{:.2},{},{}\n", p.threshold, p.bleu, p.ir_count));
    }
    let best = format!("best threshold {:.2} (BLEU {:.4})", result.best_threshold, result.best_bleu);
    match &a.output {
        Some(path) => {
            let mut f = create(path)?;
            f.write_all(csv.as_bytes()).map_err(io_at(path))?;
            f.flush().map_err(io_at(path))?;
            println!("{best}");
        }
        None => {
            print!("{csv}");
            eprintln!("{best}");
        }
    }
    Ok(())
}

fn write_jsonl<T: serde::Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut f = create(path)?;
    for it in items {
        serde_json::to_writer(&mut f, it).map_err(|e| io_at(path)(e.into()))?;
        f.write_all(b"\n").map_err(io_at(path))?;
    }
    f.flush().map_err(io_at(path))
}

fn run(ctx: &Ctx, a: RunArgs) -> CliResult<()> {
    let mut cfg = ctx.require_config("run")?.clone();
    cfg.seed = ctx.seed();
    if let Some(t) = a.threshold {
        cfg.router.threshold = t;
    }
    cfg.validate()?;
    let format: ReportFormat = a.format.parse().map_err(|e: hybridsum::Error| CliError::Usage(e.to_string()))?;
    let corpus = prepare_corpus(&cfg)?;
    let mut generator = connect(&cfg.generator, Capability::Generate)?;
    let mut classifier = match (&cfg.classifier, cfg.router.kind) {
        (Some(spec), RouterKind::External) => Some(connect(spec, Capability::Classify)?),
        _ => None,
    };
    let out = run_experiment(
        &corpus,
        &cfg,
        Backends { generator: generator.as_mut(), classifier: classifier.as_deref_mut().map(|c| c as &mut dyn Backend) },
    )?;
    let dir = &a.output_dir;
    for (system, preds) in &out.predictions {
        write_jsonl(&dir.join(format!("predictions_{}.jsonl", system.file_stem())), preds)?;
    }
    write_jsonl(&dir.join("decisions.jsonl"), &out.decisions)?;
    let json = render_report(&out.report, &ReportRendering { format: ReportFormat::Json, percent: false })?;
    let text = render_report(&out.report, &ReportRendering { format: ReportFormat::Text, percent: a.percent })?;
    for (name, body) in [("report.json", &json), ("report.txt", &text)] {
        let p = dir.join(name);
        let mut f = create(&p)?;
        f.write_all(body.as_bytes()).map_err(io_at(&p))?;
        f.flush().map_err(io_at(&p))?;
    }
    print!("{}", render_report(&out.report, &ReportRendering { format, percent: a.percent })?);
    Ok(())
}

fn read_predictions(path: &Path) -> CliResult<Vec<Prediction>> {
    use std::io::BufRead;
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(io_at(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: Prediction = serde_json::from_str(&line).map_err(|e| {
            core_err!(hybridsum::Error::Invalid(format!("{} line {}: {e}", path.display(), i + 1)))
        })?;
        out.push(p);
    }
    Ok(out)
}

fn evaluate_cmd(ctx: &Ctx, a: EvaluateArgs) -> CliResult<()> {
    let opts = ctx.config.as_ref().map(|c| c.metrics.clone()).unwrap_or_else(MetricOptions::default);
    let preds = read_predictions(&a.predictions)?;
    let mut report = evaluate(&preds, &opts, a.baseline.is_some()).map_err(|e| core_err!(e))?;
    let mut value = serde_json::json!({});
    if let Some(base) = &a.baseline {
        let other = read_predictions(base)?;
        let mut b = evaluate(&other, &opts, true).map_err(|e| core_err!(e))?;
        let (xs, ys) = (report.per_sample.take().unwrap_or_default(), b.per_sample.take().unwrap_or_default());
        if xs.len() != ys.len() || xs.iter().zip(&ys).any(|(x, y)| x.id != y.id) {
            return Err(CliError::Usage("--baseline must cover the same sample ids".into()));
        }
        let paired: Vec<(f64, f64)> = xs.iter().zip(&ys).map(|(x, y)| (x.bleu, y.bleu)).collect();
        let w = wilcoxon_signed_rank(&paired).map_err(|e| core_err!(e))?;
        value["baseline"] = serde_json::to_value(&b).expect("plain data");
        value["wilcoxon"] = serde_json::to_value(w).expect("plain data");
    }
    value["metrics"] = serde_json::to_value(&report).expect("plain data");
    println!("{}", serde_json::to_string_pretty(&value).expect("plain data"));
    Ok(())
}

fn report_render(a: RenderArgs) -> CliResult<()> {
    let format: ReportFormat = a.format.parse().map_err(|e: hybridsum::Error| CliError::Usage(e.to_string()))?;
    let text = std::fs::read_to_string(&a.input).map_err(io_at(&a.input))?;
    let report = parse_report(&text)?;
    let body = render_report(&report, &ReportRendering { format, percent: a.percent })?;
    match &a.output {
        Some(p) => {
            let mut f = create(p)?;
            f.write_all(body.as_bytes()).map_err(io_at(p))?;
            f.flush().map_err(io_at(p))?;
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let config = match &cli.config {
        Some(p) => Some(RunConfig::from_path(p)?),
        None => None,
    };
    let ctx = Ctx { seed: cli.seed, config };
    match cli.command {
        Command::Corpus(CorpusCmd::Prepare(a)) => corpus_prepare(&ctx, a),
        Command::Corpus(CorpusCmd::Synth(a)) => corpus_synth(&ctx, a),
        Command::Index(IndexCmd::Build(a)) => index_build(&ctx, a),
        Command::Index(IndexCmd::Query(a)) => index_query(&ctx, a),
        Command::Label(a) => label(&ctx, a),
        Command::Router(RouterCmd::Sweep(a)) => router_sweep(&ctx, a),
        Command::Run(a) => run(&ctx, a),
        Command::Evaluate(a) => evaluate_cmd(&ctx, a),
        Command::Report(ReportCmd::Render(a)) => report_render(a),
    }
}

/// Help and version go through clap; every other parse failure becomes a
/// single `error[usage]` line.
fn parse_cli() -> Result<Cli, ExitCode> {
    use clap::error::ErrorKind;
    match Cli::try_parse() {
        Ok(cli) => Ok(cli),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            eprintln!("error[usage]: missing subcommand (see --help)");
            Err(ExitCode::from(2))
        }
        Err(e) => {
            let rendered = e.to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            Err(ExitCode::from(2))
        }
    }
}

fn main() -> ExitCode {
    let cli = match parse_cli() {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("HYBRIDSUM_LOG")
        .target(env_logger::Target::Stderr)
        .format_timestamp(None)
        .init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.exit_code())
        }
    }
}
