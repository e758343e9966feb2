//! Command line entry point.
//!
//! Exit status is 0 on success, 1 for usage errors (bad flags, unknown
//! scheme or analysis names) and 2 for data errors (unreadable or corrupt
//! inputs, infeasible simulations).

use crate::api::{self, AppState};
use clap::{Parser, Subcommand};
use crowdgate_core::aggregation::{aggregate_state, WeightScheme, WeightSchemeConfig};
use crowdgate_core::config::{ConfigError, ConfigFile};
use crowdgate_core::events::{read_log, write_log, Clock, EventLog, LogError};
use crowdgate_core::export::{aggregates_csv, analysis_tables, full_export, summary_csv, write_tables, Analysis, ExportError, Table};
use crowdgate_core::ingest::{ingest_corpus, IngestError};
use crowdgate_core::simulation::{run_experiment, ExperimentOutcome, SimulationError};
use crowdgate_core::workflow::{Engine, WorkflowError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub const CONFIG_ENV: &str = "CROWDGATE_CONFIG";
const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, Parser)]
#[command(name = "crowdgate", version, about = "Quality-controlled crowdsourced emotion annotation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a seeded simulated experiment and write its log and tables.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Replay a log and write aggregates.csv for one weighting scheme.
    Aggregate {
        #[arg(long, value_parser = parse_scheme)]
        scheme: WeightScheme,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Replay a log and write the tables of one analysis.
    Analyze {
        analysis: Analysis,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_parser = parse_scheme, default_value = "equal")]
        scheme: WeightScheme,
    },
    /// Serve the worker lifecycle over HTTP.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        listen: Option<String>,
    },
    /// Replay a log and write votes, workers, items and aggregates tables.
    Export {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn parse_scheme(s: &str) -> Result<WeightScheme, String> {
    s.parse().map_err(|e: crowdgate_core::aggregation::AggregationError| e.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Log { path: PathBuf, source: LogError },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            _ => 2,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate { config, seed, out } => simulate(config, seed, &out),
        Command::Aggregate { scheme, log, out } => {
            let engine = replay(&log)?;
            let aggregate = aggregate_state(engine.state(), &WeightSchemeConfig::from_system(scheme, engine.config()));
            write(&[aggregates_csv(&[aggregate])?], &out)
        }
        Command::Analyze { analysis, log, out, scheme } => {
            let engine = replay(&log)?;
            write(&analysis_tables(engine.state(), analysis, scheme)?, &out)
        }
        Command::Export { log, out } => write(&full_export(replay(&log)?.state())?, &out),
        Command::Serve { config, listen } => serve(config, listen),
    }
}

/// The config path in effect: the environment variable wins over the flag.
fn config_path(flag: Option<PathBuf>) -> Option<PathBuf> {
    std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from).or(flag)
}

fn load_config(flag: Option<PathBuf>) -> Result<ConfigFile, CliError> {
    match config_path(flag) {
        Some(path) => Ok(ConfigFile::load(&path)?),
        None => Ok(ConfigFile::default()),
    }
}

pub fn replay(path: &Path) -> Result<Engine, CliError> {
    let records = read_log(path).map_err(|source| CliError::Log { path: path.to_path_buf(), source })?;
    Ok(Engine::replay(records)?)
}

fn write(tables: &[Table], out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    for path in write_tables(tables, out)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn simulate(config: Option<PathBuf>, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    let mut file = load_config(config)?;
    if let Some(seed) = seed {
        file.set("seed", seed.to_string())?;
    }
    let experiment = file.experiment_config()?;
    match run_experiment(&experiment) {
        Ok(outcome) => write_outcome(&outcome, out),
        Err(SimulationError::Infeasible { unfilled_slots, partial }) => {
            write_outcome(&partial, out)?;
            Err(SimulationError::Infeasible { unfilled_slots, partial }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn write_outcome(outcome: &ExperimentOutcome, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|source| CliError::Io { path: out.to_path_buf(), source })?;
    let log_path = out.join("events.jsonl");
    let io = |source| CliError::Io { path: log_path.clone(), source };
    let mut file = BufWriter::new(File::create(&log_path).map_err(io)?);
    write_log(outcome.engine.records(), &mut file).map_err(io)?;
    file.flush().map_err(io)?;
    println!("wrote {}", log_path.display());
    let mut tables = vec![summary_csv(&outcome.summary)?];
    tables.extend(full_export(outcome.engine.state())?);
    write(&tables, out)
}

/// Builds the engine for `serve`: resumes `log.path` when it already holds
/// records, otherwise starts fresh and ingests `corpus.path`.
pub fn service_engine(file: &ConfigFile) -> Result<(Engine, ChaCha8Rng), CliError> {
    let seed = file.seed()?.unwrap_or(0);
    let log_path = file.get("log.path").map(PathBuf::from);
    let log_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Log { path, source }
    };
    let existing = match &log_path {
        Some(path) if path.exists() => read_log(path).map_err(log_err(path))?,
        _ => Vec::new(),
    };
    let engine = if existing.is_empty() {
        let log = match &log_path {
            Some(path) => EventLog::to_file(Clock::System, path).map_err(log_err(path))?,
            None => EventLog::new(Clock::System),
        };
        let mut engine = Engine::new(file.system_config()?, log)?;
        let corpus = file
            .get("corpus.path")
            .ok_or_else(|| CliError::Usage("serve needs `corpus.path` in the config".into()))?;
        engine.load_corpus(ingest_corpus(Path::new(corpus))?)?;
        engine
    } else {
        let path = log_path.as_deref().expect("records come from a log file");
        Engine::from_log(EventLog::resume_file(Clock::System, path, existing).map_err(log_err(path))?)?
    };
    // a resumed service must not replay the random draws of the previous run
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(engine.records().len() as u64 + 1);
    Ok((engine, rng))
}

fn serve(config: Option<PathBuf>, listen: Option<String>) -> Result<(), CliError> {
    let file = load_config(config)?;
    let (engine, rng) = service_engine(&file)?;
    let addr = listen.or_else(|| file.get("listen").map(str::to_string)).unwrap_or_else(|| DEFAULT_LISTEN.into());
    let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: PathBuf::new(), source })?;
    runtime.block_on(async move {
        let io = |source| CliError::Io { path: PathBuf::from(&addr), source };
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(io)?;
        let local = listener.local_addr().map_err(io)?;
        println!("listening on {local}");
        std::io::stdout().flush().map_err(io)?;
        axum::serve(listener, api::router(AppState::new(engine, rng)))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(io)
    })
}

/// State digest of a log, as printed by tests and tools comparing replays.
pub fn log_digest(path: &Path) -> Result<String, CliError> {
    Ok(replay(path)?.state().digest())
}
