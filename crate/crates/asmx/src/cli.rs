//! The `asmx` command line.
//!
//! Exit codes: 0 success, 1 when evaluated candidates failed, 2 for usage
//! and infrastructure errors.

use std::path::{Path, PathBuf};
use std::time::Duration;

use asmx_core::asmtext::{normalize, parse_assembly, NormalizationPolicy};
use asmx_core::eval::confusion_matrix;
use asmx_core::segment::{align_pairs, segment_unit, DEFAULT_BUDGET};
use asmx_core::stats::{compare_modes, BenchSummary};
use asmx_core::tokenizer::{
    build_vocab, parse_vocab_file, to_vocab_file, token_reduction_ratio, tokenize, Fallback, TokenizerSpec,
    DEFAULT_TOP_K,
};
use asmx_core::{GenerationParams, IsaName};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::backends::{
    Backend, IdentityBackend, RemoteBackend, RemoteConfig, ReplayBackend, RuleBackend, TranspileRequest,
};
use crate::bench::{bench_run, BenchOptions, DEFAULT_WARMUP};
use crate::config::{load_config, ToolchainConfig};
use crate::dataset::{self, BuildOptions, ToolFingerprint};
use crate::functional::evaluate_suite;
use crate::report::{self, SummaryRecord};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_INFRA: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "asmx", version, about = "Cross-ISA assembly transpilation harness")]
pub struct Cli {
    /// Toolchain config (TOML). Defaults to $ASMX_CONFIG, then the built-in clang + uemu setup.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every sampled choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for compiling and evaluating.
    #[arg(long, global = true, default_value_t = 4)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build or inspect paired corpora.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Build, apply or measure tokenizer vocabularies.
    #[command(subcommand)]
    Tokenizer(TokenizerCmd),
    /// Translate one x86-64 assembly file.
    Transpile(TranspileArgs),
    /// Evaluate a backend over a test suite.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Split an assembly file into token-budgeted segments.
    Segment(SegmentArgs),
    /// Measure or compare execution modes.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Render result files as tables.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum DatasetCmd {
    Build {
        #[arg(long)]
        src: PathBuf,
        #[arg(long, value_parser = parse_isa)]
        target: IsaName,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    Inspect { store: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FallbackArg {
    Byte,
    CharClass,
}

impl From<FallbackArg> for Fallback {
    fn from(f: FallbackArg) -> Self {
        match f {
            FallbackArg::Byte => Fallback::ByteLevel,
            FallbackArg::CharClass => Fallback::CharClass,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum TokenizerCmd {
    /// Derive a vocabulary from a corpus store (both sides of every pair).
    Build {
        #[arg(long)]
        store: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOP_K)]
        top_k: usize,
        #[arg(long, value_enum, default_value = "byte")]
        fallback: FallbackArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the tokens of a text, one JSON array.
    Tokenize {
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, conflicts_with = "text")]
        file: Option<PathBuf>,
        text: Option<String>,
    },
    /// Token reduction of a vocabulary against its own fallback over a store.
    Stats {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Identity,
    Rule,
    Replay,
    Remote,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub backend: BackendKind,
    #[arg(long, default_value_t = 1)]
    pub beams: u32,
    #[arg(long, default_value_t = 4096)]
    pub max_new_tokens: u32,
    #[arg(long, default_value_t = GenerationParams::DEFAULT_CONTEXT_WINDOW)]
    pub context_window: u32,
    /// Completions server base URL (remote backend).
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Per-request timeout in seconds (remote backend).
    #[arg(long, default_value_t = 120.0)]
    pub request_timeout: f64,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
    /// Vocabulary used for context-window checks.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
}

impl BackendArgs {
    fn params(&self) -> GenerationParams {
        GenerationParams {
            num_beams: self.beams,
            max_new_tokens: self.max_new_tokens,
            sampling_enabled: false,
            context_window: self.context_window,
        }
    }
}

#[derive(Debug, Args)]
pub struct TranspileArgs {
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, value_parser = parse_isa)]
    pub target: IsaName,
    #[arg(long = "in")]
    pub input: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCmd {
    Run {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long, value_parser = parse_isa)]
        target: IsaName,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, value_enum, default_value = "normalized")]
        policy: PolicyArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PolicyArg {
    Normalized,
    Raw,
}

impl From<PolicyArg> for NormalizationPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Normalized => NormalizationPolicy::Normalized,
            PolicyArg::Raw => NormalizationPolicy::Raw,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_isa)]
    pub isa: IsaName,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Second file to align against, segment by segment.
    #[arg(long, requires = "align_isa")]
    pub align_with: Option<PathBuf>,
    #[arg(long, value_parser = parse_isa)]
    pub align_isa: Option<IsaName>,
}

#[derive(Debug, Subcommand)]
pub enum BenchCmd {
    Run {
        #[arg(long)]
        bin: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = DEFAULT_WARMUP)]
        warmup: usize,
        #[arg(long)]
        mode: String,
        /// Energy sampler command, whitespace separated.
        #[arg(long)]
        energy_hook: Option<String>,
        #[arg(long)]
        out: PathBuf,
        /// Arguments for the benchmarked binary.
        #[arg(last = true)]
        args: Vec<String>,
    },
    Compare {
        #[arg(long)]
        baseline: String,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, value_enum, default_value = "table")]
    pub format: ReportFormat,
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
}

fn parse_isa(s: &str) -> Result<IsaName, String> {
    s.parse().map_err(|e: asmx_core::isa::UnknownIsa| e.to_string())
}

/// Infrastructure failure, reported on stderr with exit code 2.
#[derive(Debug)]
pub struct Fatal(pub String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

pub const RUN_SCHEMA: &str = "asmx.run/1";

#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub schema: &'static str,
    pub command_line: Vec<String>,
    pub config_fingerprint: String,
    pub tool_versions: Vec<ToolFingerprint>,
    pub started_unix: u64,
    pub ended_unix: u64,
    pub outputs: Vec<PathBuf>,
}

pub fn run_record_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".run.json");
    PathBuf::from(s)
}

struct Ctx {
    argv: Vec<String>,
    cfg: ToolchainConfig,
    seed: u64,
    jobs: usize,
    started: u64,
}

impl Ctx {
    fn record(&self, tools: Vec<ToolFingerprint>, out: &Path) -> Result<(), Fatal> {
        let rec = RunRecord {
            schema: RUN_SCHEMA,
            command_line: self.argv.clone(),
            config_fingerprint: self.cfg.fingerprint(),
            tool_versions: tools,
            started_unix: self.started,
            ended_unix: crate::unix_now(),
            outputs: vec![out.to_path_buf()],
        };
        let body = serde_json::to_string_pretty(&rec)? + "\n";
        crate::atomic_write(&run_record_path(out), body.as_bytes())?;
        Ok(())
    }
}

fn default_config() -> ToolchainConfig {
    let emulator = std::env::current_exe()
        .ok()
        .and_then(|p| p.parent().map(|d| d.join("uemu")))
        .filter(|p| p.is_file())
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "uemu".into());
    ToolchainConfig::clang_default(&emulator)
}

fn load_spec(vocab: Option<&Path>) -> Result<TokenizerSpec, Fatal> {
    match vocab {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Fatal(format!("{}: {e}", p.display())))?;
            Ok(parse_vocab_file(&text).map_err(|e| Fatal(format!("{}: {e}", p.display())))?)
        }
        None => Ok(TokenizerSpec::fallback_only(Fallback::ByteLevel)),
    }
}

fn json_line<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INFRA } else { EXIT_OK };
        }
    };
    let cfg = match cli.config.clone().or_else(|| std::env::var_os("ASMX_CONFIG").map(PathBuf::from)) {
        Some(p) => match load_config(&p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("asmx: {e}");
                return EXIT_INFRA;
            }
        },
        None => default_config(),
    };
    let ctx = Ctx { argv, cfg, seed: cli.seed, jobs: cli.jobs.max(1), started: crate::unix_now() };
    match dispatch(&ctx, cli.command) {
        Ok(code) => code,
        Err(Fatal(msg)) => {
            eprintln!("asmx: {msg}");
            EXIT_INFRA
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: Command) -> Result<i32, Fatal> {
    match cmd {
        Command::Dataset(c) => dataset_cmd(ctx, c),
        Command::Tokenizer(c) => tokenizer_cmd(ctx, c),
        Command::Transpile(a) => transpile_cmd(ctx, a),
        Command::Eval(EvalCmd::Run { suite, target, backend, policy, out }) => {
            eval_cmd(ctx, &suite, target, &backend, policy.into(), &out)
        }
        Command::Segment(a) => segment_cmd(a),
        Command::Bench(c) => bench_cmd(ctx, c),
        Command::Report(a) => report_cmd(a),
    }
}

fn dataset_cmd(ctx: &Ctx, c: DatasetCmd) -> Result<i32, Fatal> {
    match c {
        DatasetCmd::Build { src, target, sample, vocab, out } => {
            let spec = load_spec(vocab.as_deref())?;
            let opts = BuildOptions { sample, seed: ctx.seed, jobs: ctx.jobs };
            let report = dataset::build_corpus(&src, target, &ctx.cfg, &spec, &opts, &out)?;
            for (path, why) in &report.failures {
                eprintln!("asmx: skipped {}: {}", path.display(), why.lines().next().unwrap_or(""));
            }
            println!("{}", json_line(&report.manifest));
            ctx.record(report.manifest.toolchains.clone(), &out)?;
            Ok(EXIT_OK)
        }
        DatasetCmd::Inspect { store } => {
            let pairs = dataset::read_store(&store)?;
            println!("{}", json_line(&dataset::store_stats(&pairs)));
            Ok(EXIT_OK)
        }
    }
}

fn tokenizer_cmd(ctx: &Ctx, c: TokenizerCmd) -> Result<i32, Fatal> {
    match c {
        TokenizerCmd::Build { store, top_k, fallback, out } => {
            let pairs = dataset::read_store(&store)?;
            let units: Vec<_> = pairs
                .iter()
                .flat_map(|p| {
                    [
                        parse_assembly(&p.x86.normalized, &IsaName::X86_64.isa(), &p.pair_id),
                        parse_assembly(&p.target.normalized, &p.target_isa.isa(), &p.pair_id),
                    ]
                })
                .collect();
            let spec = build_vocab(units.iter(), top_k, fallback.into()).map_err(|e| Fatal(e.to_string()))?;
            crate::atomic_write(&out, to_vocab_file(&spec).as_bytes())?;
            println!("{}", json_line(&serde_json::json!({"version": spec.version(), "entries": spec.extended_entries().len()})));
            ctx.record(Vec::new(), &out)?;
            Ok(EXIT_OK)
        }
        TokenizerCmd::Tokenize { vocab, file, text } => {
            let spec = load_spec(vocab.as_deref())?;
            let text = match (file, text) {
                (Some(f), _) => std::fs::read_to_string(&f).map_err(|e| Fatal(format!("{}: {e}", f.display())))?,
                (None, Some(t)) => t,
                (None, None) => return Err(Fatal("give a text argument or --file".into())),
            };
            println!("{}", json_line(&tokenize(&text, &spec).tokens));
            Ok(EXIT_OK)
        }
        TokenizerCmd::Stats { vocab, store } => {
            let spec = load_spec(Some(&vocab))?;
            let base = TokenizerSpec::fallback_only(spec.base_fallback());
            let pairs = dataset::read_store(&store)?;
            let texts: Vec<&str> =
                pairs.iter().flat_map(|p| [p.x86.normalized.as_str(), p.target.normalized.as_str()]).collect();
            let ratio =
                token_reduction_ratio(texts.iter().copied(), &base, &spec).map_err(|e| Fatal(e.to_string()))?;
            println!(
                "{}",
                json_line(&serde_json::json!({"version": spec.version(), "texts": texts.len(), "token_reduction": ratio}))
            );
            Ok(EXIT_OK)
        }
    }
}

fn make_backend(
    ctx: &Ctx,
    args: &BackendArgs,
    pairs: &[dataset::TranspilePair],
) -> Result<Box<dyn Backend>, Fatal> {
    Ok(match args.backend {
        BackendKind::Identity => Box::new(IdentityBackend),
        BackendKind::Rule => Box::new(RuleBackend),
        BackendKind::Replay => Box::new(ReplayBackend::new(pairs)),
        BackendKind::Remote => {
            let endpoint = args.endpoint.clone().ok_or_else(|| Fatal("--endpoint is required for remote".into()))?;
            let mut rc = RemoteConfig::new(endpoint);
            rc.model = args.model.clone();
            rc.timeout = Duration::from_secs_f64(args.request_timeout.max(0.001));
            rc.max_retries = args.retries;
            rc.max_in_flight = ctx.jobs;
            Box::new(RemoteBackend::new(rc, ctx.cfg.prompt.clone(), load_spec(args.vocab.as_deref())?))
        }
    })
}

fn transpile_cmd(ctx: &Ctx, a: TranspileArgs) -> Result<i32, Fatal> {
    if a.backend.backend == BackendKind::Replay {
        return Err(Fatal("the replay backend needs a suite; use `eval run`".into()));
    }
    let raw = std::fs::read_to_string(&a.input).map_err(|e| Fatal(format!("{}: {e}", a.input.display())))?;
    let unit = parse_assembly(&raw, &IsaName::X86_64.isa(), &a.input.display().to_string());
    let source = normalize(&unit, NormalizationPolicy::Normalized);
    let backend = make_backend(ctx, &a.backend, &[])?;
    let req = TranspileRequest::new(source, a.target, a.backend.params());
    match backend.transpile(&req) {
        Ok(resp) => {
            for (i, c) in resp.candidates.iter().enumerate() {
                println!(
                    "{}",
                    json_line(&serde_json::json!({"schema": "asmx.candidate/1", "index": i, "backend_id": resp.backend_id, "text": c.text}))
                );
            }
            Ok(EXIT_OK)
        }
        Err(e) => {
            eprintln!("asmx: {e}");
            Ok(EXIT_FAILURES)
        }
    }
}

fn eval_cmd(
    ctx: &Ctx,
    suite: &Path,
    target: IsaName,
    args: &BackendArgs,
    policy: NormalizationPolicy,
    out: &Path,
) -> Result<i32, Fatal> {
    let spec = load_spec(args.vocab.as_deref())?;
    let pairs = dataset::load_eval_suite(suite, target, &ctx.cfg, &spec, ctx.jobs)?;
    let backend = make_backend(ctx, args, &pairs)?;
    let params = args.params();
    let (results, summary) = evaluate_suite(&pairs, backend.as_ref(), &params, &ctx.cfg, policy, ctx.jobs)?;
    let record =
        SummaryRecord { backend_id: backend.id().to_string(), target_isa: target, num_beams: params.num_beams, policy, summary };
    report::write_results(out, &results, &record)?;
    println!("{}", json_line(&record));
    let tools = vec![dataset::fingerprint(&ctx.cfg, IsaName::X86_64)?, dataset::fingerprint(&ctx.cfg, target)?];
    ctx.record(tools, out)?;
    Ok(if record.summary.passes == record.summary.n { EXIT_OK } else { EXIT_FAILURES })
}

fn segment_cmd(a: SegmentArgs) -> Result<i32, Fatal> {
    if a.budget == 0 {
        return Err(Fatal("--budget must be positive".into()));
    }
    let spec = load_spec(a.vocab.as_deref())?;
    let read = |p: &Path, isa: IsaName| -> Result<_, Fatal> {
        let text = std::fs::read_to_string(p).map_err(|e| Fatal(format!("{}: {e}", p.display())))?;
        Ok(segment_unit(&parse_assembly(&text, &isa.isa(), &p.display().to_string()), &spec, a.budget))
    };
    let segs = read(&a.input, a.isa)?;
    match (&a.align_with, a.align_isa) {
        (Some(other), Some(isa)) => {
            let alignment = align_pairs(&segs, &read(other, isa)?);
            for p in &alignment.pairs {
                println!(
                    "{}",
                    json_line(&serde_json::json!({"schema": "asmx.aligned/1", "function": p.function_name, "index": p.index,
                        "source_tokens": p.source.token_count, "target_tokens": p.target.token_count}))
                );
            }
            for t in &alignment.unmatched {
                println!("{}", json_line(&serde_json::json!({"schema": "asmx.unmatched/1", "tail": t})));
            }
        }
        _ => {
            for s in &segs {
                println!(
                    "{}",
                    json_line(&serde_json::json!({"schema": "asmx.segment/1", "function": s.function_name, "index": s.index,
                        "token_count": s.token_count, "leading_label": s.leading_label, "trailing_label": s.trailing_label,
                        "violation": s.violation, "text": s.text()}))
                );
            }
        }
    }
    Ok(EXIT_OK)
}

fn bench_cmd(ctx: &Ctx, c: BenchCmd) -> Result<i32, Fatal> {
    match c {
        BenchCmd::Run { bin, runs, warmup, mode, energy_hook, out, args } => {
            let opts = BenchOptions {
                mode,
                runs,
                warmup,
                energy_hook: energy_hook.map(|h| h.split_whitespace().map(str::to_string).collect()),
            };
            let summary = bench_run(&bin, &args, &opts)?;
            let line = json_line(&summary);
            crate::atomic_write(&out, format!("{line}\n").as_bytes())?;
            println!("{line}");
            ctx.record(Vec::new(), &out)?;
            Ok(EXIT_OK)
        }
        BenchCmd::Compare { baseline, files } => {
            let mut summaries = Vec::new();
            for f in &files {
                let text = std::fs::read_to_string(f).map_err(|e| Fatal(format!("{}: {e}", f.display())))?;
                for line in text.lines().filter(|l| !l.trim().is_empty()) {
                    let s: BenchSummary = serde_json::from_str(line).map_err(|e| Fatal(format!("{}: {e}", f.display())))?;
                    summaries.push(s);
                }
            }
            for r in compare_modes(&summaries, &baseline)? {
                println!("{}", json_line(&r));
            }
            Ok(EXIT_OK)
        }
    }
}

fn report_cmd(a: ReportArgs) -> Result<i32, Fatal> {
    let mut runs = Vec::new();
    for f in &a.files {
        let (results, summary) = report::read_results(f)?;
        if !report::summary_consistent(&results, &summary.summary) {
            eprintln!("asmx: warning: {} summary does not match its results", f.display());
        }
        let label = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        runs.push((label, results, summary));
    }
    match a.format {
        ReportFormat::Json => {
            for (label, _, s) in &runs {
                println!("{}", json_line(&serde_json::json!({"run": label, "summary": s})));
            }
        }
        ReportFormat::Table => {
            let rows: Vec<(String, SummaryRecord)> = runs.iter().map(|(l, _, s)| (l.clone(), s.clone())).collect();
            print!("{}", report::render_table(&rows));
            if runs.len() == 2 {
                let m = confusion_matrix(&runs[0].1, &runs[1].1)?;
                println!();
                print!("{}", report::render_confusion(&runs[0].0, &runs[1].0, &m));
            }
        }
    }
    Ok(EXIT_OK)
}
