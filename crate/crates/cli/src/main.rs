//! `tsqa`: ingest market data, ask questions, run the benchmark, render reports.

mod config;

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use tsqa_core::agent::{
    chat_repl, Agent, AgentConfig, Backend, ChatCompletionsClient, MockBackend, MockScript, QueryFailure, QueryRouter,
};
use tsqa_core::eval::{
    emit_report, load_benchmark, replay_script, run_benchmark, stub_table, write_reports, BenchmarkItem, EvalMode,
    Judge, ReportFormat, RunConfig, RunReport, Scoring,
};
use tsqa_core::{MarketStore, StubTable, ToolRegistry};

use config::{BackendKind, CliConfig, Mode};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tsqa",
    version,
    about = "Tool-grounded question answering over market time series"
)]
struct Cli {
    /// TOML settings file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print tool calls and results.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a market data directory and summarise its series.
    Ingest {
        #[arg(long)]
        data_dir: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Answer one question.
    Query {
        #[arg(long)]
        nlq: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Interactive session; `/quit` exits.
    Chat {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the benchmark and write report files.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated seeds, one run each.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip SPQ measurement so report files are reproducible.
        #[arg(long)]
        no_timing: bool,
        #[arg(long)]
        workers: Option<usize>,
        /// Restrict the run to these item ids (repeatable).
        #[arg(long = "item")]
        items: Vec<String>,
        /// Score LA and HR with the backend model.
        #[arg(long)]
        judge: bool,
    },
    /// Render a saved report.json.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Markdown)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the tool declarations sent to the model.
    Tools,
}

#[derive(Args, Default)]
struct RunArgs {
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Evaluate tools as of this UTC epoch second instead of the last bar.
    #[arg(long)]
    as_of: Option<i64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Tsv,
    Markdown,
    Json,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

type CliResult<T> = Result<T, Failure>;

trait WithCode<T> {
    fn code(self, code: u8) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> CliResult<T> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

fn fail<T>(code: u8, message: String) -> CliResult<T> {
    Err(Failure {
        code,
        error: anyhow!(message),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => CliConfig::load(path).code(EXIT_USAGE)?,
        None => CliConfig::default(),
    };
    match cli.command {
        Command::Ingest { data_dir, manifest } => {
            cfg.data_dir = data_dir.or(cfg.data_dir);
            cfg.manifest = manifest.or(cfg.manifest);
            cmd_ingest(&cfg)
        }
        Command::Query { nlq, run } => {
            let as_of = apply(&mut cfg, &run);
            cmd_query(&cfg, &nlq, as_of, cli.verbose)
        }
        Command::Chat { run } => {
            let as_of = apply(&mut cfg, &run);
            cmd_chat(&cfg, as_of, cli.verbose)
        }
        Command::Bench {
            run,
            seeds,
            out,
            no_timing,
            workers,
            items,
            judge,
        } => {
            let as_of = apply(&mut cfg, &run);
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            cfg.out_dir = out.unwrap_or(cfg.out_dir);
            cfg.workers = workers.unwrap_or(cfg.workers);
            cfg.judge |= judge;
            cmd_bench(&cfg, as_of, !no_timing, &items)
        }
        Command::Report { input, format, out } => cmd_report(&input, format, out.as_deref()),
        Command::Tools => {
            let decls = ToolRegistry::standard().export_schemas();
            println!("{}", serde_json::to_string_pretty(&decls).code(EXIT_DATA)?);
            Ok(())
        }
    }
}

/// Applies flag overrides; returns `--as-of`.
fn apply(cfg: &mut CliConfig, run: &RunArgs) -> Option<i64> {
    if let Some(m) = run.mode {
        cfg.mode = m;
    }
    if let Some(b) = run.backend {
        cfg.backend = b;
    }
    let paths = [
        (&run.mock_script, &mut cfg.mock_script),
        (&run.data_dir, &mut cfg.data_dir),
        (&run.manifest, &mut cfg.manifest),
        (&run.benchmark, &mut cfg.benchmark),
    ];
    for (flag, slot) in paths {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(t) = run.temperature {
        cfg.agent.temperature = t;
    }
    if let Some(e) = &run.endpoint {
        cfg.agent.backend.endpoint = e.clone();
    }
    if let Some(m) = &run.model {
        cfg.agent.backend.model = m.clone();
    }
    run.as_of
}

fn load_store(cfg: &CliConfig) -> CliResult<MarketStore> {
    let store = match (&cfg.manifest, &cfg.data_dir) {
        (Some(manifest), _) => MarketStore::load_with_manifest(manifest),
        (None, Some(dir)) => MarketStore::load_data_dir(dir),
        (None, None) => return fail(EXIT_USAGE, "--data-dir or --manifest is required".into()),
    };
    store.code(EXIT_DATA)
}

fn load_items(cfg: &CliConfig, registry: &ToolRegistry) -> CliResult<Option<Vec<BenchmarkItem>>> {
    cfg.benchmark
        .as_deref()
        .map(|p| load_benchmark(p, registry))
        .transpose()
        .code(EXIT_DATA)
}

fn make_backend(cfg: &CliConfig, items: Option<&[BenchmarkItem]>) -> CliResult<Box<dyn Backend>> {
    match cfg.backend {
        BackendKind::Http => Ok(Box::new(ChatCompletionsClient::new(&cfg.agent.backend))),
        BackendKind::Mock => {
            let script = match (&cfg.mock_script, items) {
                (Some(path), _) => {
                    let file = File::open(path)
                        .with_context(|| format!("opening {}", path.display()))
                        .code(EXIT_DATA)?;
                    MockScript::from_reader(BufReader::new(file)).code(EXIT_DATA)?
                }
                (None, Some(items)) => replay_script(items),
                (None, None) => return fail(EXIT_USAGE, "the mock backend needs --mock-script or --benchmark".into()),
            };
            Ok(Box::new(MockBackend::new(script)))
        }
    }
}

struct Session {
    registry: ToolRegistry,
    items: Option<Vec<BenchmarkItem>>,
    store: Option<MarketStore>,
    stubs: Option<StubTable>,
}

impl Session {
    fn open(cfg: &CliConfig, needs_seeds: bool) -> CliResult<Self> {
        cfg.check(needs_seeds).code(EXIT_USAGE)?;
        let registry = ToolRegistry::standard();
        let items = load_items(cfg, &registry)?;
        let (store, stubs) = match cfg.mode {
            Mode::Real => (Some(load_store(cfg)?), None),
            Mode::Stub => {
                let items = items.as_deref().unwrap_or_default();
                (None, Some(stub_table(items).code(EXIT_DATA)?))
            }
        };
        Ok(Session {
            registry,
            items,
            store,
            stubs,
        })
    }

    fn router(&self, as_of: Option<i64>) -> QueryRouter<'_> {
        match (&self.store, &self.stubs) {
            (Some(store), _) => QueryRouter::Real { store, as_of },
            (None, Some(table)) => {
                let items = self.items.as_deref().unwrap_or_default();
                QueryRouter::stub(table, items.iter().map(|i| (i.item_id.as_str(), i.nlq.as_str())))
            }
            (None, None) => unreachable!("session has neither store nor stubs"),
        }
    }
}

fn cmd_ingest(cfg: &CliConfig) -> CliResult<()> {
    let store = load_store(cfg)?;
    println!("{} series", store.len());
    for series in store.series() {
        let span = match (series.first_timestamp(), series.last_timestamp()) {
            (Some(a), Some(b)) => format!("{a}..{b}"),
            _ => "empty".into(),
        };
        let filled = if series.filled.is_empty() {
            String::new()
        } else {
            format!(" ({} forward-filled)", series.filled.len())
        };
        println!(
            "{}\t{} candles\tinterval {}s\t{span}{filled}",
            series.key,
            series.len(),
            series.candle_interval
        );
    }
    Ok(())
}

fn cmd_query(cfg: &CliConfig, nlq: &str, as_of: Option<i64>, verbose: bool) -> CliResult<()> {
    let session = Session::open(cfg, false)?;
    let backend = make_backend(cfg, session.items.as_deref())?;
    let agent = Agent::new(&session.registry, backend.as_ref(), cfg.agent.clone()).code(EXIT_USAGE)?;
    let router = session.router(as_of);
    let (grounding, item_id) = router.route(nlq).map_err(anyhow::Error::msg).code(EXIT_DATA)?;
    let outcome = agent.answer(nlq, &grounding, item_id.as_deref());
    for (call, result) in outcome.calls.iter().zip(&outcome.results) {
        if let Some(message) = call.error.as_ref() {
            tracing::warn!("invalid call {}: {message}", call.tool_name);
        } else if let tsqa_core::agent::ToolOutcome::Error { message, .. } = result {
            tracing::warn!("tool {} failed: {message}", call.tool_name);
        }
        if verbose {
            println!("[tool] {} -> {}", call.signature(), result.content());
        }
    }
    match outcome.failure {
        Some(QueryFailure::Transport { message }) => fail(EXIT_TRANSPORT, message),
        Some(f @ QueryFailure::EmptyOutput { .. }) => fail(EXIT_TRANSPORT, f.to_string()),
        None => {
            println!("{}", outcome.nlr.trim());
            Ok(())
        }
    }
}

fn cmd_chat(cfg: &CliConfig, as_of: Option<i64>, verbose: bool) -> CliResult<()> {
    let session = Session::open(cfg, false)?;
    let backend = make_backend(cfg, session.items.as_deref())?;
    let agent = Agent::new(&session.registry, backend.as_ref(), cfg.agent.clone()).code(EXIT_USAGE)?;
    let router = session.router(as_of);
    chat_repl(&agent, &router, io::stdin().lock(), io::stdout().lock(), verbose).code(EXIT_DATA)
}

fn cmd_bench(cfg: &CliConfig, as_of: Option<i64>, timing: bool, only: &[String]) -> CliResult<()> {
    if cfg.benchmark.is_none() {
        return fail(EXIT_USAGE, "bench needs --benchmark".into());
    }
    let session = Session::open(cfg, true)?;
    let mut items = session.items.clone().unwrap_or_default();
    if !only.is_empty() {
        let known: BTreeSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
        if let Some(bad) = only.iter().find(|id| !known.contains(id.as_str())) {
            return fail(EXIT_USAGE, format!("unknown item id '{bad}'"));
        }
        items.retain(|i| only.contains(&i.item_id));
    }
    let backend = make_backend(cfg, Some(&items))?;
    let judge_config = AgentConfig {
        temperature: 0.0,
        ..cfg.agent.clone()
    };
    let scoring = if cfg.judge {
        if cfg.backend == BackendKind::Mock {
            return fail(EXIT_USAGE, "--judge needs the http backend".into());
        }
        Scoring::Judge(Judge::new(backend.as_ref(), judge_config))
    } else {
        Scoring::Fallback
    };
    let mode = match (&session.store, &session.stubs) {
        (Some(store), _) => EvalMode::Real { store, as_of },
        (None, Some(table)) => EvalMode::Stub(table),
        (None, None) => unreachable!("session has neither store nor stubs"),
    };
    let run_config = RunConfig {
        agent: cfg.agent.clone(),
        seeds: cfg.seeds.clone(),
        timing,
        workers: cfg.workers,
    };
    let report =
        run_benchmark(&items, &session.registry, backend.as_ref(), mode, &scoring, &run_config).code(EXIT_USAGE)?;
    let files = write_reports(&report, &cfg.out_dir).code(EXIT_DATA)?;
    print!("{}", emit_report(&report, ReportFormat::Markdown));
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    let records: Vec<_> = report.runs.iter().flat_map(|r| &r.records).collect();
    let transport = records
        .iter()
        .filter(|r| matches!(r.outcome.failure, Some(QueryFailure::Transport { .. })))
        .count();
    if transport > 0 && transport == records.len() {
        return fail(EXIT_TRANSPORT, "every query failed to reach the backend".into());
    }
    Ok(())
}

fn cmd_report(input: &Path, format: Format, out: Option<&Path>) -> CliResult<()> {
    let text = std::fs::read_to_string(input)
        .with_context(|| format!("reading {}", input.display()))
        .code(EXIT_DATA)?;
    let report: RunReport = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", input.display()))
        .code(EXIT_DATA)?;
    let format = match format {
        Format::Tsv => ReportFormat::Tsv,
        Format::Markdown => ReportFormat::Markdown,
        Format::Json => ReportFormat::Json,
    };
    let rendered = emit_report(&report, format);
    match out {
        Some(path) => std::fs::write(path, rendered)
            .with_context(|| format!("writing {}", path.display()))
            .code(EXIT_DATA),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}
