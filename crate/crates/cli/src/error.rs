use std::fmt;

use surro_core::blockgp::BlockGpError;
use surro_core::design::DesignError;
use surro_core::explore::ExploreError;
use surro_core::gp::GpError;
use surro_core::hyperopt::HyperoptError;

/// Failure classified by exit code: usage 1, data 2, numerical 3.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<GpError> for CliError {
    fn from(e: GpError) -> Self {
        match e {
            GpError::DimensionMismatch { .. } | GpError::TooFewInstances { .. } => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ExploreError> for CliError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::Gp(inner) => inner.into(),
            ExploreError::Invalid(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<HyperoptError> for CliError {
    fn from(e: HyperoptError) -> Self {
        match e {
            HyperoptError::Gp(inner) => inner.into(),
            HyperoptError::AllCandidatesFailed => CliError::Numerical(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<BlockGpError> for CliError {
    fn from(e: BlockGpError) -> Self {
        match e {
            BlockGpError::InvalidSpec(m) => CliError::Usage(m),
            BlockGpError::EmptyBlock { .. } => CliError::Data(e.to_string()),
            BlockGpError::Gp(inner) => inner.into(),
            BlockGpError::Hyperopt(inner) => inner.into(),
            BlockGpError::Block { source, .. } => source.into(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
