use thiserror::Error;

use crate::scene::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symbol nearly singular for frequency {freq}: min |A(k)| = {min_abs:e} below floor {floor:e}")]
    NearSingularSymbol {
        freq: usize,
        min_abs: f64,
        floor: f64,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid scene: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("defect configuration is not admissible at frequency {freq} (singular value ratio {ratio:e})")]
    NotAdmissible { freq: usize, ratio: f64 },

    #[error("truncated lattice system is numerically singular at frequency {freq}")]
    SingularTruncation { freq: usize },

    #[error("point is off the solution manifold: pole at components {poles:?}")]
    OffManifold { poles: Vec<usize> },

    #[error("no frequency has a trivial receiver-matrix kernel with consistent data")]
    NoUniqueFrequency,

    #[error("no candidate defect reproduces the measurements: {0}")]
    NoCandidate(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("missing input: {0}")]
    Missing(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Input errors are caused by the document or arguments, everything else is numerical.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Validation(_)
                | Error::Dimension(_)
                | Error::Missing(_)
                | Error::Io(_)
        )
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Error::NearSingularSymbol { .. } => "NearSingularSymbol",
            Error::Parse { .. } => "ParseError",
            Error::Validation(_) => "ValidationError",
            Error::NotAdmissible { .. } => "NotAdmissible",
            Error::SingularTruncation { .. } => "SingularTruncation",
            Error::OffManifold { .. } => "OffManifold",
            Error::NoUniqueFrequency => "NoUniqueFrequency",
            Error::NoCandidate(_) => "NoCandidate",
            Error::Dimension(_) => "DimensionMismatch",
            Error::Missing(_) => "MissingInput",
            Error::Io(_) => "IoError",
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
