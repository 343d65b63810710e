use std::io::{self, Write};
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use leakwatch::cache::DEFAULT_CACHE_CAPACITY;
use leakwatch::classify::{ClassifierKind, ClassifierSpec, DEFAULT_THRESHOLD};
use leakwatch::commands::{self, OutputFormat, EXIT_ERROR};
use leakwatch::evaluation::LabeledCorpus;
use leakwatch::service::http::{self, BackgroundServer};
use leakwatch::service::{Analyzer, ServiceConfig, DEFAULT_PORT};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassifierArg {
    Heuristic,
    Remote,
}

/// Detects leaked secrets in issue-report text before it is submitted.
#[derive(Debug, Parser)]
#[command(name = "leakwatch", version)]
struct Cli {
    /// Rule catalog (TOML). Defaults to the bundled seed catalog.
    #[arg(long, global = true, env = "LEAKWATCH_CATALOG")]
    catalog: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value = "heuristic", env = "LEAKWATCH_CLASSIFIER")]
    classifier: ClassifierArg,

    /// Scoring endpoint of a remote model server (with --classifier remote).
    #[arg(long, global = true, env = "LEAKWATCH_ENDPOINT")]
    endpoint: Option<String>,

    #[arg(long, global = true, default_value_t = DEFAULT_THRESHOLD, env = "LEAKWATCH_THRESHOLD")]
    threshold: f64,

    /// Remote classifier timeout in milliseconds.
    #[arg(long, global = true, default_value_t = 2000, env = "LEAKWATCH_TIMEOUT_MS")]
    timeout_ms: u64,

    #[arg(long, global = true, default_value_t = DEFAULT_CACHE_CAPACITY, env = "LEAKWATCH_CACHE_CAPACITY")]
    cache_capacity: usize,

    #[arg(long, global = true, default_value_t = DEFAULT_PORT, env = "LEAKWATCH_PORT")]
    port: u16,

    #[arg(long, global = true, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST), env = "LEAKWATCH_HOST")]
    host: IpAddr,

    /// Maximum document size in bytes.
    #[arg(long, global = true, default_value_t = leakwatch::scan::DEFAULT_MAX_DOCUMENT_BYTES, env = "LEAKWATCH_MAX_DOCUMENT_BYTES")]
    max_document_bytes: usize,

    #[arg(long, global = true, value_enum, default_value = "text", env = "LEAKWATCH_FORMAT")]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the local analysis service.
    Serve,
    /// Scan files or directories and report findings.
    Scan {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Evaluate regex-only and full pipeline against a labeled corpus.
    Eval {
        /// Corpus JSON. Defaults to the bundled desk corpus.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Measure /analyze latency over a corpus.
    Bench {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Base URL of a running service. Without it an in-process service
        /// is started on an ephemeral port.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value_t = 1)]
        repetitions: usize,
    },
}

impl Cli {
    fn config(&self) -> ServiceConfig {
        let classifier = ClassifierSpec {
            kind: match self.classifier {
                ClassifierArg::Heuristic => ClassifierKind::Heuristic,
                ClassifierArg::Remote => ClassifierKind::Remote,
            },
            endpoint: self.endpoint.clone(),
            threshold: self.threshold,
            timeout: Duration::from_millis(self.timeout_ms),
            ..ClassifierSpec::heuristic()
        };
        ServiceConfig {
            bind: SocketAddr::new(self.host, self.port),
            catalog_path: self.catalog.clone(),
            classifier,
            cache_capacity: self.cache_capacity,
            max_document_bytes: self.max_document_bytes,
        }
    }
}

fn load_corpus(path: &Option<PathBuf>) -> anyhow::Result<LabeledCorpus> {
    Ok(match path {
        Some(p) => LabeledCorpus::load(p)?,
        None => LabeledCorpus::desk(),
    })
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    let config = cli.config();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match &cli.command {
        Command::Serve => {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(http::serve(config))?;
            Ok(0)
        }
        Command::Scan { paths } => {
            let analyzer = Analyzer::from_config(&config)?;
            let report = commands::scan_paths(paths, &analyzer);
            commands::write_scan_report(&report, cli.format, &mut out)?;
            Ok(report.exit_code())
        }
        Command::Eval { corpus } => {
            let corpus = load_corpus(corpus)?;
            let analyzer = Analyzer::from_config(&config)?;
            Ok(commands::run_eval(&corpus, &analyzer, cli.format, &mut out)?)
        }
        Command::Bench {
            corpus,
            target,
            repetitions,
        } => {
            let corpus = load_corpus(corpus)?;
            let report = match target {
                Some(t) => commands::run_bench(&corpus, t, *repetitions)?,
                None => {
                    let analyzer = Arc::new(Analyzer::from_config(&config)?);
                    let server = BackgroundServer::start(analyzer).context("starting in-process service")?;
                    commands::run_bench(&corpus, &server.base_url(), *repetitions)?
                }
            };
            commands::write_latency_report(&report, cli.format, &mut out)?;
            out.flush()?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if matches!(cli.command, Command::Serve) { "info" } else { "warn" };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)))
        .with_writer(io::stderr)
        .init();

    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
