use num_complex::Complex64;
use thiserror::Error;

use crate::symmetry::SymmetryKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid model: {0}")]
    InvariantViolation(String),

    #[error("lattice too small: hopping {hop:?} does not fit in sizes {sizes:?}")]
    LatticeTooSmall { hop: Vec<i32>, sizes: Vec<usize> },

    #[error("eigensolver failed: {0}")]
    Solver(String),

    #[error("eigenvectors were not computed")]
    MissingEigenvectors,

    #[error("no unitary U realises {0} for this model")]
    NoIntertwiner(SymmetryKind),

    #[error("selector matches {count} eigenvalues within {tol} of {energy}")]
    AmbiguousSelector { energy: Complex64, tol: f64, count: usize },

    #[error("eigenvalue index {0} out of range")]
    IndexOutOfRange(usize),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fewer than two eigenvalues within {tol} of {energy}")]
    NotDegenerate { energy: Complex64, tol: f64 },

    #[error("phase winding not resolved: raw value {raw} on {grid} points")]
    NonIntegerPhase { raw: f64, grid: usize },

    #[error("determinant vanishes on {excluded} of {total} quadrature nodes")]
    TooSingular { excluded: usize, total: usize },

    #[error("minimizer hit {iterations} iterations; best mu {best:?}")]
    MaxIterations { best: Vec<f64>, iterations: usize },

    #[error("bands could not be tracked unambiguously near k = {k}")]
    BranchAmbiguity { k: f64 },

    #[error("band pairing failed: {0}")]
    PairingFailure(String),

    #[error("no eigenvalue within {tol} of partner energy {partner} (source {energy})")]
    PartnerNotFound { energy: Complex64, partner: Complex64, tol: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("unknown zoo id '{0}'")]
    UnknownModel(String),

    #[error("model '{id}' has no parameter '{name}'")]
    UnknownParameter { id: String, name: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code, printed by the CLI as `ERROR <code>: <msg>`.
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::InvariantViolation(_) => "InvalidModel",
            Error::LatticeTooSmall { .. } => "LatticeTooSmall",
            Error::Solver(_) => "SolverFailure",
            Error::MissingEigenvectors => "MissingEigenvectors",
            Error::NoIntertwiner(_) => "NoIntertwiner",
            Error::AmbiguousSelector { .. } => "AmbiguousSelector",
            Error::IndexOutOfRange(_) => "IndexOutOfRange",
            Error::DegenerateFit(_) => "DegenerateFit",
            Error::NotDegenerate { .. } => "NotDegenerate",
            Error::NonIntegerPhase { .. } => "NonIntegerPhase",
            Error::TooSingular { .. } => "TooSingular",
            Error::MaxIterations { .. } => "MaxIterations",
            Error::BranchAmbiguity { .. } => "BranchAmbiguity",
            Error::PairingFailure(_) => "PairingFailure",
            Error::PartnerNotFound { .. } => "PartnerNotFound",
            Error::Precondition(_) => "Precondition",
            Error::UnknownModel(_) => "UnknownModel",
            Error::UnknownParameter { .. } => "UnknownParameter",
            Error::Parse(_) => "ParseError",
            Error::Io(_) => "IoError",
            Error::Json(_) => "ParseError",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
