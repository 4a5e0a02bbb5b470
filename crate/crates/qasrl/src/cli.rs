//! `qasrl` subcommands.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 provider error.
//! Errors go to stderr as `error[usage]: ...`, `error[data]: ...` or
//! `error[provider]: ...`.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use qasrl_core::analysis::{
    calibrate_iou_threshold, calibrate_semantic_threshold, threshold_sensitivity, CalibrationCurve, LabeledMatchSample,
    Metric, Sweep,
};
use qasrl_core::corpus::{candidate_predicates, PredicatePolicy};
use qasrl_core::dataset::{compute_stats, emit_icl_prompt, emit_training_examples, split_dataset, IclTemplates, TrainingTemplate};
use qasrl_core::evaluation::{aggregate, EvalError, MatchReport};
use qasrl_core::projection::Provenance;
use qasrl_core::record::{record_id, PredicateField, Record};
use qasrl_core::PredicateKind;
use serde_json::json;

use crate::config::{build_embedder, ProviderSet, ProviderSource, ProvidersConfig, RunConfig, SetupError};
use crate::curate::{system_clock, PersistentStore, StoreError};
use crate::io::{read_conllu, read_jsonl, read_records, read_text, write_jsonl, write_records, write_text, DataError};
use crate::run::{bootstrap_parallel, evaluate_parallel, project_corpus};
use crate::server::{serve, AppState};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Provider(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error[usage]: {m}"),
            CliError::Data(m) => write!(f, "error[data]: {m}"),
            CliError::Provider(m) => write!(f, "error[provider]: {m}"),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SetupError> for CliError {
    fn from(e: SetupError) -> Self {
        match e {
            SetupError::Data(d) => d.into(),
            SetupError::Provider(p) => CliError::Provider(p.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Embedder(p) => CliError::Provider(p.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Data(e.to_string())
    }
}

type CliResult = Result<(), CliError>;

fn data(msg: impl ToString) -> CliError {
    CliError::Data(msg.to_string())
}

fn usage(msg: impl ToString) -> CliError {
    CliError::Usage(msg.to_string())
}

#[derive(Parser, Debug)]
#[command(name = "qasrl", version, about = "Cross-lingual QA-SRL projection, evaluation and curation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Read CoNLL-U files into predicate records with no QAs.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        language: String,
        #[arg(short, long)]
        output: PathBuf,
        /// Treat AUX tokens as verbal predicate candidates.
        #[arg(long)]
        include_aux: bool,
    },
    /// Project English QA-SRL onto CoNLL-U sentences.
    Project {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Overrides the config's language.
        #[arg(long)]
        language: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Serve every provider role from this fixture directory.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        audit: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Save every provider exchange of this run as fixtures here.
        #[arg(long)]
        record_fixtures: Option<PathBuf>,
    },
    /// Sentence, predicate and QA counts per record file.
    Stats {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Split a record file into train/dev/test by sentence.
    Split {
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        /// train,dev,test
        #[arg(long, default_value = "0.8,0.1,0.1")]
        ratios: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Seq2seq training pairs as JSON lines {input, output}.
    EmitTrain {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// One in-context-learning prompt per record, as JSON lines {id, prompt}.
    EmitIcl {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Extra template as LANG:KIND:FILE (KIND is verbal or nominal).
        #[arg(long = "template")]
        templates: Vec<String>,
        /// Template language; defaults to each record's language.
        #[arg(long)]
        template_language: Option<String>,
    },
    /// Score predicted records against gold.
    Evaluate {
        predicted: PathBuf,
        gold: PathBuf,
        #[arg(long)]
        tau: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Serve question embeddings from this fixture directory.
        #[arg(long)]
        embed_fixtures: Option<PathBuf>,
        /// Per-predicate match reports (JSON lines).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Summary JSON; printed to stdout when omitted.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Sweep a threshold over human-labelled match samples.
    Calibrate {
        samples: PathBuf,
        #[arg(long, value_enum, default_value = "semantic")]
        kind: CalibrationKind,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        step: Option<f64>,
        /// Writes curve.tsv and summary.json; otherwise the summary is printed.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Paired bootstrap between two match-report files.
    Bootstrap {
        report_a: PathBuf,
        report_b: PathBuf,
        #[arg(long, default_value = "semantic")]
        metric: Metric,
        #[arg(long, default_value_t = 10_000)]
        iterations: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Semantic F1 of each system over a theta sweep, as TSV.
    Sensitivity {
        /// Report files, optionally as NAME=PATH.
        #[arg(required = true)]
        reports: Vec<String>,
        #[arg(long, default_value_t = Sweep::SENSITIVITY_DEFAULT.lo)]
        lo: f64,
        #[arg(long, default_value_t = Sweep::SENSITIVITY_DEFAULT.hi)]
        hi: f64,
        #[arg(long, default_value_t = Sweep::SENSITIVITY_DEFAULT.step)]
        step: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the curation HTTP service.
    Serve {
        #[arg(long, env = "QASRL_DATA_DIR")]
        data_dir: PathBuf,
        #[arg(long, env = "QASRL_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "QASRL_HOST", default_value = "127.0.0.1")]
        host: IpAddr,
        /// Built UI bundle, served under /ui.
        #[arg(long, env = "QASRL_UI_DIR")]
        ui_dir: Option<PathBuf>,
        /// Environment variable holding a shared bearer token.
        #[arg(long)]
        token_env: Option<String>,
        #[arg(long, default_value_t = PersistentStore::DEFAULT_SNAPSHOT_EVERY)]
        snapshot_every: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibrationKind {
    Iou,
    Semantic,
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let msg = rendered.trim_start_matches("error: ").trim_end();
            eprintln!("error[usage]: {msg}");
            return 1;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Ingest { inputs, language, output, include_aux } => ingest(&inputs, &language, &output, include_aux),
        Command::Project { inputs, language, config, fixtures, output, audit, jobs, record_fixtures } => project(
            &inputs,
            language,
            config.as_deref(),
            fixtures,
            &output,
            audit.as_deref(),
            jobs,
            record_fixtures.as_deref(),
        ),
        Command::Stats { inputs } => stats(&inputs),
        Command::Split { input, seed, ratios, out_dir } => split(&input, seed, &ratios, &out_dir),
        Command::EmitTrain { input, output } => emit_train(&input, &output),
        Command::EmitIcl { input, output, templates, template_language } => {
            emit_icl(&input, &output, &templates, template_language.as_deref())
        }
        Command::Evaluate { predicted, gold, tau, theta, config, embed_fixtures, report, summary, jobs } => evaluate(
            &predicted,
            &gold,
            tau,
            theta,
            config.as_deref(),
            embed_fixtures,
            report.as_deref(),
            summary.as_deref(),
            jobs,
        ),
        Command::Calibrate { samples, kind, beta, lo, hi, step, out_dir } => {
            calibrate(&samples, kind, beta, lo, hi, step, out_dir.as_deref())
        }
        Command::Bootstrap { report_a, report_b, metric, iterations, seed, jobs, output } => {
            bootstrap(&report_a, &report_b, metric, iterations, seed, jobs, output.as_deref())
        }
        Command::Sensitivity { reports, lo, hi, step, output } => {
            sensitivity(&reports, Sweep { lo, hi, step }, output.as_deref())
        }
        Command::Serve { data_dir, port, host, ui_dir, token_env, snapshot_every } => {
            serve_cmd(&data_dir, SocketAddr::new(host, port), ui_dir, token_env.as_deref(), snapshot_every)
        }
    }
}

fn emit(output: Option<&Path>, text: &str) -> CliResult {
    match output {
        Some(p) => Ok(write_text(p, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn ingest(inputs: &[PathBuf], language: &str, output: &Path, include_aux: bool) -> CliResult {
    let policy = PredicatePolicy { include_aux };
    let mut records = Vec::new();
    for path in inputs {
        for s in read_conllu(path, language)? {
            for p in candidate_predicates(&s, policy) {
                records.push(Record {
                    id: record_id(&s.id, p.token_index),
                    language: s.language.clone(),
                    tokens: s.tokens.iter().map(|t| t.surface.clone()).collect(),
                    pos: s.tokens.iter().map(|t| t.upos).collect(),
                    english: None,
                    predicate: PredicateField { index: p.token_index, kind: p.kind, lemma: p.lemma },
                    alignment: None,
                    qas: Vec::new(),
                    provenance: Provenance::Manual,
                    curation: None,
                });
            }
        }
    }
    write_records(output, &records)?;
    eprintln!("wrote {} predicate records", records.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn project(
    inputs: &[PathBuf],
    language: Option<String>,
    config: Option<&Path>,
    fixtures: Option<PathBuf>,
    output: &Path,
    audit: Option<&Path>,
    jobs: Option<usize>,
    record_fixtures: Option<&Path>,
) -> CliResult {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = fixtures {
        cfg.providers = ProvidersConfig::all_fixtures(dir);
    } else if config.is_none() {
        return Err(usage("project needs --config or --fixtures"));
    }
    let language = language
        .or(cfg.language.clone())
        .ok_or_else(|| usage("no language given (use --language or set language in the config)"))?;
    let mut sentences = Vec::new();
    for path in inputs {
        sentences.extend(read_conllu(path, &language)?);
    }
    let providers = ProviderSet::build(&cfg.providers, record_fixtures.is_some())?;
    let run = project_corpus(&sentences, &providers, &cfg.projection, jobs.or(cfg.jobs).unwrap_or(0));
    if let Some(dir) = record_fixtures {
        providers.recorded().save(dir)?;
    }
    write_records(output, &run.records)?;
    if let Some(path) = audit {
        write_jsonl(path, &run.audit)?;
    }
    eprintln!(
        "projected {} records from {} sentences ({} audit entries)",
        run.records.len(),
        run.sentences,
        run.audit.len()
    );
    if run.provider_outage() {
        let first = run.audit.first().map(|a| format!("{:?}", a.reason)).unwrap_or_default();
        return Err(CliError::Provider(format!(
            "every sentence failed at a provider call; first failure: {first}"
        )));
    }
    Ok(())
}

fn stats(inputs: &[PathBuf]) -> CliResult {
    let mut out = String::from("file\tsentences\tpredicates\tqas\n");
    let mut all = Vec::new();
    for path in inputs {
        let records = read_records(path)?;
        let s = compute_stats(&records);
        let _ = writeln!(out, "{}\t{}\t{}\t{}", path.display(), s.sentences, s.predicates, s.qas);
        all.extend(records);
    }
    if inputs.len() > 1 {
        let s = compute_stats(&all);
        let _ = writeln!(out, "total\t{}\t{}\t{}", s.sentences, s.predicates, s.qas);
    }
    emit(None, &out)
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64), CliError> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--ratios {s:?}: expected three comma-separated numbers")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(usage(format!("--ratios {s:?}: expected three comma-separated numbers"))),
    }
}

fn split(input: &Path, seed: u64, ratios: &str, out_dir: &Path) -> CliResult {
    let ratios = parse_ratios(ratios)?;
    let records = read_records(input)?;
    let parts = split_dataset(records, ratios, seed).map_err(usage)?;
    for (name, rs) in [("train", &parts.train), ("dev", &parts.dev), ("test", &parts.test)] {
        write_records(&out_dir.join(format!("{name}.jsonl")), rs)?;
    }
    eprintln!("train {} / dev {} / test {} records", parts.train.len(), parts.dev.len(), parts.test.len());
    Ok(())
}

fn emit_train(input: &Path, output: &Path) -> CliResult {
    let records = read_records(input)?;
    let examples = emit_training_examples(&records, &TrainingTemplate::default());
    Ok(write_jsonl(output, &examples)?)
}

fn emit_icl(input: &Path, output: &Path, extra: &[String], template_language: Option<&str>) -> CliResult {
    let mut templates = IclTemplates::builtin();
    for spec in extra {
        let mut it = spec.splitn(3, ':');
        let (Some(lang), Some(kind), Some(file)) = (it.next(), it.next(), it.next()) else {
            return Err(usage(format!("--template {spec:?}: expected LANG:KIND:FILE")));
        };
        let kind: PredicateKind = kind.parse().map_err(usage)?;
        templates.insert(lang, kind, &read_text(Path::new(file))?);
    }
    let records = read_records(input)?;
    let mut lines = Vec::with_capacity(records.len());
    for r in &records {
        let lang = template_language.unwrap_or(&r.language);
        let prompt = emit_icl_prompt(&r.tokens, r.predicate.index, r.predicate.kind, lang, &templates)
            .map_err(|e| data(format!("{}: {e}", r.id)))?;
        lines.push(json!({ "id": r.id, "prompt": prompt }));
    }
    Ok(write_jsonl(output, &lines)?)
}

#[allow(clippy::too_many_arguments)]
fn evaluate(
    predicted: &Path,
    gold: &Path,
    tau: Option<f64>,
    theta: Option<f64>,
    config: Option<&Path>,
    embed_fixtures: Option<PathBuf>,
    report: Option<&Path>,
    summary: Option<&Path>,
    jobs: Option<usize>,
) -> CliResult {
    let mut cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = tau {
        cfg.evaluation.tau = t;
    }
    if let Some(t) = theta {
        cfg.evaluation.theta = t;
    }
    cfg.evaluation.validate().map_err(usage)?;
    if let Some(dir) = embed_fixtures {
        cfg.providers.embedder = Some(ProviderSource::fixture(dir));
    }
    let pred = read_records(predicted)?;
    let gold = read_records(gold)?;
    let embedder = build_embedder(&cfg.providers)?;
    let reports = evaluate_parallel(&pred, &gold, &cfg.evaluation, &*embedder, jobs.or(cfg.jobs).unwrap_or(0))?;
    if let Some(p) = report {
        write_jsonl(p, &reports)?;
    }
    let out = json!({
        "tau": cfg.evaluation.tau,
        "theta": cfg.evaluation.theta,
        "summary": aggregate(&reports),
    });
    emit(summary, &pretty(&out))
}

fn curve_tsv(curve: &CalibrationCurve) -> String {
    let mut out = String::from("threshold\ttp\tfp\tfn\ttn\tprecision\trecall\tf_score\ttpr\tfpr\n");
    for p in &curve.points {
        let _ = writeln!(
            out,
            "{:.2}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            p.threshold, p.tp, p.fp, p.fn_, p.tn, p.precision, p.recall, p.f_score, p.tpr, p.fpr
        );
    }
    out
}

fn calibrate(
    samples: &Path,
    kind: CalibrationKind,
    beta: f64,
    lo: Option<f64>,
    hi: Option<f64>,
    step: Option<f64>,
    out_dir: Option<&Path>,
) -> CliResult {
    let default = match kind {
        CalibrationKind::Iou => Sweep::IOU_DEFAULT,
        CalibrationKind::Semantic => Sweep::SEMANTIC_DEFAULT,
    };
    let sweep = Sweep { lo: lo.unwrap_or(default.lo), hi: hi.unwrap_or(default.hi), step: step.unwrap_or(default.step) };
    let samples: Vec<LabeledMatchSample> = read_jsonl(samples)?;
    let curve = match kind {
        CalibrationKind::Iou => calibrate_iou_threshold(&samples, sweep),
        CalibrationKind::Semantic => calibrate_semantic_threshold(&samples, beta, sweep),
    }
    .map_err(data)?;
    let summary = json!({
        "kind": match kind { CalibrationKind::Iou => "iou", CalibrationKind::Semantic => "semantic" },
        "beta": curve.beta,
        "sweep": sweep,
        "samples": samples.len(),
        "selected": curve.selected,
        "selected_point": curve.selected_point(),
        "roc": curve.roc,
    });
    match out_dir {
        Some(dir) => {
            write_text(&dir.join("curve.tsv"), &curve_tsv(&curve))?;
            write_text(&dir.join("summary.json"), &pretty(&summary))?;
            Ok(())
        }
        None => emit(None, &pretty(&summary)),
    }
}

fn bootstrap(
    a: &Path,
    b: &Path,
    metric: Metric,
    iterations: usize,
    seed: u64,
    jobs: Option<usize>,
    output: Option<&Path>,
) -> CliResult {
    let ra: Vec<MatchReport> = read_jsonl(a)?;
    let rb: Vec<MatchReport> = read_jsonl(b)?;
    let result = bootstrap_parallel(&ra, &rb, metric, iterations, seed, jobs.unwrap_or(0)).map_err(data)?;
    emit(output, &pretty(&result))
}

fn sensitivity(reports: &[String], sweep: Sweep, output: Option<&Path>) -> CliResult {
    let mut systems = Vec::new();
    for spec in reports {
        let (name, path) = match spec.split_once('=') {
            Some((n, p)) => (n.to_string(), PathBuf::from(p)),
            None => {
                let p = PathBuf::from(spec);
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| spec.clone());
                (stem, p)
            }
        };
        if systems.iter().any(|(n, _)| *n == name) {
            return Err(usage(format!("duplicate system name {name:?}")));
        }
        let rs: Vec<MatchReport> = read_jsonl(&path)?;
        systems.push((name, rs));
    }
    let grid = sweep.grid().map_err(usage)?;
    let rows = threshold_sensitivity(&systems, &grid);
    let mut out = String::from("theta");
    for (name, _) in &systems {
        let _ = write!(out, "\t{name}_p\t{name}_r\t{name}_f1");
    }
    if let Some(first) = rows.first() {
        for g in &first.gaps {
            let _ = write!(out, "\tgap({},{})", g.a, g.b);
        }
    }
    out.push('\n');
    for row in &rows {
        let _ = write!(out, "{:.2}", row.theta);
        for s in &row.systems {
            let _ = write!(out, "\t{:.6}\t{:.6}\t{:.6}", s.semantic.precision, s.semantic.recall, s.semantic.f1);
        }
        for g in &row.gaps {
            let _ = write!(out, "\t{:.6}", g.delta);
        }
        out.push('\n');
    }
    emit(output, &out)
}

fn serve_cmd(
    data_dir: &Path,
    addr: SocketAddr,
    ui_dir: Option<PathBuf>,
    token_env: Option<&str>,
    snapshot_every: u64,
) -> CliResult {
    let token = match token_env {
        Some(var) => Some(Arc::<str>::from(
            std::env::var(var).map_err(|_| usage(format!("token variable {var} is not set")))?,
        )),
        None => None,
    };
    if let Some(dir) = &ui_dir {
        if !dir.is_dir() {
            return Err(usage(format!("UI directory {} does not exist", dir.display())));
        }
    }
    let store = PersistentStore::open(data_dir, snapshot_every, system_clock())?;
    let state = AppState { store: Arc::new(store), token };
    let rt = tokio::runtime::Runtime::new().map_err(data)?;
    rt.block_on(serve(state, ui_dir, addr)).map_err(data)
}
