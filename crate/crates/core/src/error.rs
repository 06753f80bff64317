use thiserror::Error;

/// Every failure the laboratory can report. Variant names double as the
/// machine-readable error names printed by the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("resolution {resolution} along axis {axis} is below the minimum of 3")]
    MeshTooCoarse { axis: usize, resolution: usize },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unsupported dimension {0} (supported: 1..=3)")]
    UnsupportedDimension(usize),
    #[error("fiber metric is not invariant under the gluing map (cell {cell}, defect {defect:e})")]
    MetricNotPhiInvariant { cell: usize, defect: f64 },
    #[error("invalid gluing: {0}")]
    InvalidGluing(String),
    #[error("conformal factor {value} at cell {cell} is not positive")]
    DegenerateConformalFactor { cell: usize, value: f64 },
    #[error("unsupported topology: {0}")]
    UnsupportedTopology(String),
    #[error(
        "no convergence after {iterations} iterations (energy {energy:e}, gradient {gradient:e})"
    )]
    NoConvergence {
        iterations: usize,
        energy: f64,
        gradient: f64,
    },
    #[error("circle maps belong to different winding classes")]
    ClassMismatch,
    #[error("mesh carries no product fiber structure")]
    NotAProduct,
    #[error("degree of fiber {fiber} is ill-conditioned (raw value {raw})")]
    DegreeIllConditioned { fiber: usize, raw: f64 },
    #[error("fiber degree changed during the flow (fiber {fiber}: {before} -> {after})")]
    DegreeDrift {
        fiber: usize,
        before: i64,
        after: i64,
    },
    #[error("density {value:e} at cell {cell} is below the threshold")]
    DegenerateDensity { cell: usize, value: f64 },
    #[error("eigensolver failure: {0}")]
    EigensolverFailure(String),
    #[error("candidate eigenvalue {candidate} exceeds the computed spectrum (largest {largest})")]
    SpectrumTooShallow { candidate: f64, largest: f64 },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable variant name, used on standard error by the CLI.
    pub fn name(&self) -> &'static str {
        match self {
            Error::MeshTooCoarse { .. } => "MeshTooCoarse",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::UnsupportedDimension(_) => "UnsupportedDimension",
            Error::MetricNotPhiInvariant { .. } => "MetricNotPhiInvariant",
            Error::InvalidGluing(_) => "InvalidGluing",
            Error::DegenerateConformalFactor { .. } => "DegenerateConformalFactor",
            Error::UnsupportedTopology(_) => "UnsupportedTopology",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::ClassMismatch => "ClassMismatch",
            Error::NotAProduct => "NotAProduct",
            Error::DegreeIllConditioned { .. } => "DegreeIllConditioned",
            Error::DegreeDrift { .. } => "DegreeDrift",
            Error::DegenerateDensity { .. } => "DegenerateDensity",
            Error::EigensolverFailure(_) => "EigensolverFailure",
            Error::SpectrumTooShallow { .. } => "SpectrumTooShallow",
            Error::Parse(_) => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
