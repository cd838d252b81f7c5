//! The `dpm` command line.
//!
//! Exit codes: 0 on success, 1 when a solver or the data fails, 2 on usage
//! errors. Every command prints one summary line per produced result.

mod args;
mod eval;
mod generate;
mod solve;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;
use dpm_core::io::{read_archive, validate_archive, DpmArchive};

pub use args::Cli;
use args::Command;

pub const THREADS_ENV: &str = "DPM_THREADS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(dpm_core::Error),
}

impl From<dpm_core::Error> for CliError {
    fn from(e: dpm_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "error[usage]: {m}"),
            CliError::Core(e) => write!(f, "error[{}]: {e}", e.reason_code()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

pub(crate) fn load(path: &Path) -> CliResult<DpmArchive> {
    Ok(read_archive(path)?)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|source| {
        CliError::Core(
            dpm_core::io::ArchiveError::Io {
                path: path.display().to_string(),
                source,
            }
            .into(),
        )
    })
}

/// Formats a scalar for summary lines.
pub(crate) fn num(v: f64) -> String {
    format!("{v:.6e}")
}

fn thread_count(flag: Option<u16>) -> CliResult<usize> {
    if let Some(n) = flag {
        return Ok(n.into());
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<u16>() {
            Ok(n) if n > 0 => Ok(n.into()),
            _ => usage(format!("{THREADS_ENV}={v} is not a positive thread count")),
        },
        _ => Ok(0),
    }
}

fn dispatch(cli: Cli) -> CliResult<Vec<String>> {
    match cli.command {
        Command::Generate(a) => generate::generate(&a),
        Command::Perturb(a) => generate::perturb(&a),
        Command::Validate { archive } => Ok(vec![format!(
            "valid {}",
            validate_archive(&archive).map_err(CliError::from)?
        )]),
        Command::Solve { task } => solve::solve(&task).map(|l| vec![l]),
        Command::Eval(a) => eval::eval(&a).map(|l| vec![l]),
    }
}

/// Parses `args`, runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let (code, text) = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => (0, e.to_string()),
                _ => (2, e.render().to_string()),
            };
            let sink: &mut dyn Write = if code == 0 { out } else { err };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    let result = thread_count(cli.threads).and_then(|n| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
        pool.install(|| dispatch(cli))
    });
    match result {
        Ok(lines) => {
            for l in lines {
                let _ = writeln!(out, "{l}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
