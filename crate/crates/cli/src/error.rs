use std::fmt;

use flarecast_core::augment::AugmentError;
use flarecast_core::dataset::DatasetError;
use flarecast_core::metrics::MetricsError;
use flarecast_core::preprocess::PreprocessError;
use flarecast_core::raster::RasterError;
use flarecast_core::trainer::TrainError;

/// Exit-code classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Usage => 1,
            Kind::Data => 2,
            Kind::Numeric => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Usage => "usage",
            Kind::Data => "data",
            Kind::Numeric => "numeric",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            kind: Kind::Usage,
            msg: msg.into(),
        }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Self {
            kind: Kind::Data,
            msg: msg.into(),
        }
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Self {
            kind: Kind::Numeric,
            msg: msg.into(),
        }
    }

    /// Prefixes the message with the offending path or item.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.msg = format!("{what}: {}", self.msg);
        self
    }
}

/// One line on stderr: `error[<kind>]: <message>`.
impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.msg.replace('\n', " ");
        write!(f, "error[{}]: {msg}", self.kind.as_str())
    }
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<RasterError> for CliError {
    fn from(e: RasterError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> Self {
        match e {
            PreprocessError::InvalidParameter(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<AugmentError> for CliError {
    fn from(e: AugmentError) -> Self {
        CliError::usage(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidThreshold(_) | MetricsError::InvalidZone(_) => {
                CliError::usage(e.to_string())
            }
            MetricsError::Undefined(_) => CliError::numeric(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let kind = train_kind(&e);
        CliError {
            kind,
            msg: e.to_string(),
        }
    }
}

fn train_kind(e: &TrainError) -> Kind {
    match e {
        TrainError::Seed { source, .. } => train_kind(source),
        TrainError::NonFinite { .. } | TrainError::Loss(_) => Kind::Numeric,
        TrainError::Metrics(MetricsError::Undefined(_)) => Kind::Numeric,
        _ => Kind::Data,
    }
}
