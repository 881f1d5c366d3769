use std::fmt;
use std::path::{Path, PathBuf};

pub const USAGE: u8 = 64;
pub const DATA: u8 = 65;
pub const NO_INPUT: u8 = 66;
pub const CANT_CREATE: u8 = 73;
pub const SOFTWARE: u8 = 70;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// An input file exists but does not parse.
    Data(String),
    NoInput(PathBuf, std::io::Error),
    CantCreate(PathBuf, std::io::Error),
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => USAGE,
            CliError::Data(_) => DATA,
            CliError::NoInput(..) => NO_INPUT,
            CliError::CantCreate(..) => CANT_CREATE,
            CliError::Internal(_) => SOFTWARE,
        }
    }

    pub fn data(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }

    pub fn internal(e: impl fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
            CliError::NoInput(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            CliError::CantCreate(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}
