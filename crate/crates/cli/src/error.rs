use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not a QVOL file: bad magic")]
    BadMagic,

    #[error("malformed QVOL header: {0}")]
    BadHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("payload has {extra} trailing bytes")]
    TrailingBytes { extra: usize },

    #[error("mask payload holds value {value} at voxel {index}; only 0 and 1 are allowed")]
    BadMaskValue { index: usize, value: u8 },

    #[error("expected a {expected} volume, file holds {found}")]
    WrongDtype {
        expected: &'static str,
        found: &'static str,
    },

    #[error("slice index {index} out of range for axis of extent {extent}")]
    SliceOutOfRange { index: usize, extent: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("png encoding failed: {0}")]
    Png(String),

    #[error("{method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<CliError>,
    },

    #[error(transparent)]
    Core(#[from] hire_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for numerical failures, 1 for everything the caller can fix by
    /// changing inputs or arguments.
    pub fn exit_code(&self) -> i32 {
        use hire_core::Error as E;
        match self {
            CliError::Method { source, .. } => source.exit_code(),
            CliError::Core(
                E::NonFinite { .. }
                | E::SingularSymbol { .. }
                | E::ImaginaryResidue { .. }
                | E::NotTightFrame { .. }
                | E::PhaseWrapRisk { .. }
                | E::NoInterior
                | E::EmptyRoi
                | E::MaxIterExceeded { .. }
                | E::Diverged { .. }
                | E::ZeroNormReference
                | E::DegenerateRange,
            ) => 2,
            _ => 1,
        }
    }
}
