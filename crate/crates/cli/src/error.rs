use std::fmt;
use std::process::ExitCode;

use hypersep_core::EngineError;
use hypersep_core::index::IndexError;
use hypersep_core::persist::PersistError;
use hypersep_core::sequence::SequenceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage = 1,
    Data = 2,
    Audit = 3,
    Degenerate = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self { kind: Kind::Usage, msg: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self { kind: Kind::Data, msg: msg.into() }
    }

    pub fn audit(msg: impl Into<String>) -> Self {
        Self { kind: Kind::Audit, msg: msg.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind as u8)
    }

    /// Prefixes the message, keeping the kind.
    pub fn context(self, what: impl fmt::Display) -> Self {
        Self { kind: self.kind, msg: format!("{what}: {}", self.msg) }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        let kind = match e {
            EngineError::Usage(_) => Kind::Usage,
            EngineError::DegenerateGeometry { .. } | EngineError::BootstrapFailed { .. } => Kind::Degenerate,
            EngineError::DimensionMismatch { .. } | EngineError::DuplicateId(_) | EngineError::NonFinite(_) => Kind::Data,
        };
        Self { kind, msg: e.to_string() }
    }
}

impl From<PersistError> for CliError {
    fn from(e: PersistError) -> Self {
        Self::data(e.to_string())
    }
}

impl From<IndexError> for CliError {
    fn from(e: IndexError) -> Self {
        let kind = match e {
            IndexError::DimensionMismatch { .. } | IndexError::CodeLength { .. } | IndexError::NotFinalized => Kind::Usage,
            IndexError::Format(_) | IndexError::Io(_) => Kind::Data,
        };
        Self { kind, msg: e.to_string() }
    }
}

impl From<SequenceError> for CliError {
    fn from(e: SequenceError) -> Self {
        match e {
            SequenceError::Engine(e) => e.into(),
            SequenceError::Index(e) => e.into(),
            e => Self::data(e.to_string()),
        }
    }
}
