//! Configuration-driven front end for the x-ray HOM engine.

pub mod config;
pub mod output;
pub mod run;
pub mod setup;

use std::fmt;

/// Stable process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const IO: i32 = 4;
}

#[derive(Debug)]
pub enum RunError {
    /// Every semantic violation found in the config.
    Config(Vec<setup::Diagnostic>),
    Syntax(String),
    Usage(String),
    Engine(xhom::Error),
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Syntax(_) | RunError::Usage(_) => exit::CONFIG,
            RunError::Io(_) => exit::IO,
            RunError::Engine(e) => match e {
                xhom::Error::NonConvergent(_) | xhom::Error::NoDip { .. } | xhom::Error::PeakNotFound => exit::NUMERICAL,
                _ => exit::CONFIG,
            },
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(d) => {
                let lines: Vec<String> = d.iter().map(|x| x.to_string()).collect();
                write!(f, "{} config problem(s):\n  {}", d.len(), lines.join("\n  "))
            }
            RunError::Syntax(m) => write!(f, "config syntax: {m}"),
            RunError::Usage(m) => write!(f, "usage: {m}"),
            RunError::Engine(e) => write!(f, "{e}"),
            RunError::Io(m) => write!(f, "I/O: {m}"),
        }
    }
}

impl From<xhom::Error> for RunError {
    fn from(e: xhom::Error) -> Self {
        RunError::Engine(e)
    }
}

/// Loads and fully validates a config file.
pub fn load_setup(path: &std::path::Path, table_dir: Option<&std::path::Path>) -> Result<setup::Setup, RunError> {
    let cfg = config::RunConfig::load(path).map_err(|e| match e {
        config::LoadError::Io(m) => RunError::Io(m),
        e @ config::LoadError::Syntax { .. } => RunError::Syntax(format!("{}: {e}", path.display())),
    })?;
    setup::Setup::resolve(cfg, table_dir).map_err(RunError::Config)
}
