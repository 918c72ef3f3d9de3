//! Command-line front end: CSV in, text summaries / JSON report / SVG and
//! CSV plot series out.

pub mod args;
pub mod pipeline;
pub mod plot;
pub mod report;

use std::ffi::OsString;
use std::fmt;

use clap::Parser;

pub use args::{Cli, Command};

/// Exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Compute(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => EXIT_INPUT,
            Self::Compute(_) => EXIT_COMPUTE,
            Self::Io(_) => EXIT_IO,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Compute(m) => write!(f, "computation failed: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<dta_core::Error> for CliError {
    fn from(e: dta_core::Error) -> Self {
        use dta_core::Error as E;
        match e {
            E::Domain(_) | E::Input { .. } | E::EmptyInput(_) | E::ZeroCell { .. } | E::InsufficientData { .. } => {
                Self::Input(e.to_string())
            }
            E::Singular { .. } | E::NotPsd | E::NonFiniteStart | E::Fit(_) | E::Test(_) => Self::Compute(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (including the program name) and runs the command.
/// Diagnostics go to stderr; the return value is the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match pipeline::execute(&cli) {
        Ok(warnings) => {
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
