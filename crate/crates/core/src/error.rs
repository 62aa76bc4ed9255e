use thiserror::Error;

pub type Result<T> = std::result::Result<T, MaassError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaassError {
    #[error("InvalidPoint: imaginary part {0} is not positive")]
    InvalidPoint(f64),
    #[error("DomainError: {0}")]
    Domain(String),
    #[error("UnsupportedLevel: no deformation family is known for level {0}")]
    UnsupportedLevel(u32),
    #[error("AccuracyError: {0}")]
    Accuracy(String),
    #[error("DegenerateCollocation: only {moved} of the required {required} points move under the pullback")]
    DegenerateCollocation { moved: usize, required: usize },
    #[error("RankDeficiency: effective rank {rank} of {columns} columns")]
    RankDeficiency { rank: usize, columns: usize },
    #[error("NotConverged: best residual {residual:e} at R = {r} exceeds threshold {threshold:e}")]
    NotConverged { r: f64, residual: f64, threshold: f64 },
    #[error("NoOverlap: the two curves share no window on the requested axis")]
    NoOverlap,
    #[error("ConfigError: {0}")]
    Config(String),
    #[error("IoError: {0}")]
    Io(String),
}

impl MaassError {
    /// Short error-kind name, as printed by the command-line tool.
    pub fn name(&self) -> &'static str {
        match self {
            MaassError::InvalidPoint(_) => "InvalidPoint",
            MaassError::Domain(_) => "DomainError",
            MaassError::UnsupportedLevel(_) => "UnsupportedLevel",
            MaassError::Accuracy(_) => "AccuracyError",
            MaassError::DegenerateCollocation { .. } => "DegenerateCollocation",
            MaassError::RankDeficiency { .. } => "RankDeficiency",
            MaassError::NotConverged { .. } => "NotConverged",
            MaassError::NoOverlap => "NoOverlap",
            MaassError::Config(_) => "ConfigError",
            MaassError::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for MaassError {
    fn from(e: std::io::Error) -> Self {
        MaassError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for MaassError {
    fn from(e: serde_json::Error) -> Self {
        MaassError::Io(e.to_string())
    }
}
