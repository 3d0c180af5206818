use quotelag_core::biaslab::{PanelError, RegressionError};
use quotelag_core::econometrics::EstimationError;
use quotelag_core::impulse::ImpulseError;
use quotelag_core::ingest::IngestError;
use quotelag_core::microstructure::MicroError;
use quotelag_core::quotegrid::GridError;
use quotelag_core::synth::SynthError;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Config,
    Data,
    Estimation,
    Internal,
}

impl ExitKind {
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Config => 2,
            ExitKind::Data => 3,
            ExitKind::Estimation => 4,
            ExitKind::Internal => 5,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ExitKind, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Data, message)
    }

    pub fn estimation(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Estimation, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ExitKind::Internal, message)
    }

    pub fn code(&self) -> i32 {
        self.kind.code()
    }

    /// Prefix the message with where it happened.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        if e.is_config() {
            CliError::config(e.to_string())
        } else {
            CliError::data(e.to_string())
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Grid(g) => g.into(),
            IngestError::Io(io) => CliError::data(io.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        match e {
            EstimationError::InvalidArgument(m) => CliError::config(m),
            other => CliError::estimation(other.to_string()),
        }
    }
}

impl From<ImpulseError> for CliError {
    fn from(e: ImpulseError) -> Self {
        match e {
            ImpulseError::InvalidConfig(_) | ImpulseError::BadHorizon(_) => CliError::config(e.to_string()),
            ImpulseError::Io(_) => CliError::internal(e.to_string()),
            other => CliError::estimation(other.to_string()),
        }
    }
}

impl From<PanelError> for CliError {
    fn from(e: PanelError) -> Self {
        match e {
            PanelError::Config(m) => CliError::config(m),
            PanelError::Grid(g) => g.into(),
            e @ PanelError::AllWeeksFailed(_) => CliError::estimation(e.to_string()),
        }
    }
}

impl From<RegressionError> for CliError {
    fn from(e: RegressionError) -> Self {
        CliError::estimation(e.to_string())
    }
}

impl From<MicroError> for CliError {
    fn from(e: MicroError) -> Self {
        match e {
            MicroError::Estimation(inner) => inner.into(),
            MicroError::Io(_) => CliError::internal(e.to_string()),
            other => CliError::data(other.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) | SynthError::Unstable(_) => CliError::config(e.to_string()),
            other => CliError::internal(other.to_string()),
        }
    }
}
