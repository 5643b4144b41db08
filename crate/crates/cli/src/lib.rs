//! Batch driver for `ibound-core`.
//!
//! `ibound <command> --config <path> [--seed U64] [--out <path>] [--workers K] [key=value...]`
//!
//! Each invocation writes one CSV whose leading `#` lines record the
//! resolved configuration and seed. Exit status: 0 success, 1 bad
//! configuration, 2 internal contract violation, 3 results written but some
//! rows carry a convergence flag.

pub mod commands;
pub mod config;
pub mod output;
pub mod parse;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::config::ConfigFile;

/// Default worker count when `--workers` is absent.
pub const WORKERS_ENV: &str = "IBOUND_WORKERS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_CONTRACT: i32 = 2;
pub const EXIT_FLAGGED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum Command {
    /// Gibbs averages over eigenstates on a temperature grid.
    Vnte,
    /// Sphere-ensemble Monte Carlo averages on a temperature grid.
    Ste,
    /// Localized vs superposed energy comparison along a w grid.
    Classify,
    /// Constrained energy minimizer along a w grid.
    Ground,
    /// Classification and low-temperature P_A over a (w, T) grid.
    ScanBoundary,
    /// Histograms of conversion fraction and optical rotation.
    Detect,
    /// Order parameter of the magnet over a (T, w) grid.
    Magnet,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Vnte,
        Command::Ste,
        Command::Classify,
        Command::Ground,
        Command::ScanBoundary,
        Command::Detect,
        Command::Magnet,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Vnte => "vnte",
            Self::Ste => "ste",
            Self::Classify => "classify",
            Self::Ground => "ground",
            Self::ScanBoundary => "scan-boundary",
            Self::Detect => "detect",
            Self::Magnet => "magnet",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("contract violation: {0}")]
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Contract(_) => EXIT_CONTRACT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ibound", version, about = "Thermal ensembles of wavefunctions vs eigenstates")]
pub struct Args {
    pub command: Command,
    /// Flat key = value file; `[command]` sections scope keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV; defaults to `<command>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to $IBOUND_WORKERS, else one per CPU.
    #[arg(long)]
    pub workers: Option<usize>,
    /// `key=value` overrides, applied after the config file.
    pub overrides: Vec<String>,
}

/// Everything a run needs, resolved and validated.
pub struct Prepared {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub params: commands::Params,
    pub job: commands::Job,
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

pub fn prepare(args: &Args) -> Result<Prepared, CliError> {
    let mut file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            ConfigFile::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };
    file.apply_overrides(&args.overrides).map_err(CliError::Config)?;
    let resolved = file.resolve(args.command);

    let seed = match (args.seed, resolved.get("seed").map(|e| &e.value)) {
        (Some(s), _) => s,
        (None, Some(s)) => s.trim().parse().map_err(|_| CliError::Config(format!("seed: not a u64: {s:?}")))?,
        (None, None) => 0,
    };
    let out = match (&args.out, resolved.get("out").map(|e| &e.value)) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p.trim()),
        (None, None) => PathBuf::from(format!("{}.csv", args.command.name())),
    };
    let dir = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if !dir.is_dir() {
        return Err(CliError::Config(format!("output directory {} does not exist", dir.display())));
    }
    if let Some(cfg) = &args.config {
        if same_file(cfg, &out) {
            return Err(CliError::Config("output path would overwrite the config file".into()));
        }
    }
    let workers = match args.workers {
        Some(k) => Some(k),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) if !v.trim().is_empty() => Some(
                v.trim().parse().map_err(|_| CliError::Config(format!("{WORKERS_ENV}: not a count: {v:?}")))?,
            ),
            _ => None,
        },
    };
    if workers == Some(0) {
        return Err(CliError::Config("worker count must be positive".into()));
    }

    let params = commands::Params::new(args.command, resolved)?;
    let job = commands::plan(args.command, &params, seed)?;
    Ok(Prepared { command: args.command, seed, out, workers, params, job })
}

/// Runs a prepared job and writes its CSV. Returns whether any row is flagged.
pub fn execute(prep: &Prepared) -> Result<bool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = prep.workers {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| CliError::Contract(format!("cannot start worker pool: {e}")))?;
    let table = pool.install(|| prep.job.run())?;
    let text = output::render(prep.command, prep.seed, prep.params.resolved(), &table);
    output::write_atomic(&prep.out, &text)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", prep.out.display())))?;
    eprintln!("ibound: wrote {} rows to {}", table.rows.len(), prep.out.display());
    Ok(table.flagged)
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = prepare(&args).and_then(|prep| execute(&prep));
    match result {
        Ok(false) => EXIT_OK,
        Ok(true) => {
            eprintln!("ibound: some rows are flagged as unconverged");
            EXIT_FLAGGED
        }
        Err(e) => {
            eprintln!("ibound: {e}");
            e.exit_code()
        }
    }
}
