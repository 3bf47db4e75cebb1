pub mod commands;
pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] moire_core::Error),
    #[error("{0}")]
    Io(String),
}

impl AppError {
    pub fn exit_code(&self) -> u8 {
        use moire_core::Error as E;
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 1,
            AppError::Core(e) => match e {
                E::NonConvergence(_) | E::GapClosure { .. } | E::InsufficientData { .. } | E::NonPositiveWidth(_) => 3,
                _ => 2,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// λ± over a fundamental cell (CSV) with a summary
    Landscape,
    /// bands along a high-symmetry path (CSV)
    Bands,
    /// Chern number of the lowest bands
    Chern,
    /// Agmon distance and tunnelling actions
    Agmon,
    /// band widths across h and the exponential fit
    Scan,
    /// harmonic-oscillator levels, optionally against Bloch energies at Γ
    Harmonic,
    /// minima of λ₋ and the single-well check
    Wells,
    /// finite-difference single-well spectrum
    Well,
    /// analytic Fourier table against sampled coefficients
    FourierCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Landscape => "landscape",
            Command::Bands => "bands",
            Command::Chern => "chern",
            Command::Agmon => "agmon",
            Command::Scan => "scan",
            Command::Harmonic => "harmonic",
            Command::Wells => "wells",
            Command::Well => "well",
            Command::FourierCheck => "fourier-check",
        }
    }
}

/// Numerical experiments on the twisted-bilayer moiré continuum model.
#[derive(Debug, Parser)]
#[command(name = "moire-bands", version)]
pub struct Cli {
    command: Command,
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// output directory; without it the JSON document goes to stdout and tables are skipped
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads for k- and h-sweeps
    #[arg(long, env = "MOIRE_BANDS_WORKERS")]
    workers: Option<usize>,
}

/// A command's results: one JSON document and any number of named CSV tables.
pub struct Artifacts {
    pub json: String,
    pub tables: Vec<(String, String)>,
}

fn write_outputs(cmd: Command, art: &Artifacts, out: Option<&Path>) -> Result<(), AppError> {
    let Some(dir) = out else {
        print!("{}", art.json);
        return Ok(());
    };
    let io = |p: &Path, e: std::io::Error| AppError::Io(format!("{}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(format!("{}.json", cmd.name()));
    fs::write(&path, &art.json).map_err(|e| io(&path, e))?;
    for (name, text) in &art.tables {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| io(&path, e))?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<(), AppError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(AppError::Config("workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| AppError::Config(format!("workers: {e}")))?;
    }
    let text = fs::read_to_string(&cli.config).map_err(|e| AppError::Config(format!("{}: {e}", cli.config.display())))?;
    let cfg = config::parse_config(&text)?;
    let art = commands::run(cli.command, &cfg, cli.out.is_some())?;
    write_outputs(cli.command, &art, cli.out.as_deref())
}

/// Parses `args` (program name first), runs the command and returns the process exit code.
pub fn run_cli<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("moire-bands {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
