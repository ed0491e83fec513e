use thiserror::Error;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("root finder did not converge for degree {degree} after {iterations} iterations")]
    NonConvergence { degree: usize, iterations: usize },

    #[error("inconsistent boundary classification for dof {dof}: {reason}")]
    InconsistentBoundary { dof: usize, reason: String },

    #[error("non-conforming mesh: element {a} has degree {na} but neighbour {b} has degree {nb}")]
    NonConformingMesh {
        a: usize,
        na: usize,
        b: usize,
        nb: usize,
    },

    #[error("degenerate element map: det J = {det:e} at ({xi}, {eta})")]
    DegenerateMap { det: f64, xi: f64, eta: f64 },

    #[error("permeability is not positive definite at ({x}, {y})")]
    NotPositiveDefinite { x: f64, y: f64 },

    #[error("gather index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("incompatible data: boundary flux {boundary:e} differs from total source {source_total:e}")]
    IncompatibleData { boundary: f64, source_total: f64 },

    #[error("gauge fixing is not applicable: {0}")]
    GaugeNotApplicable(String),

    #[error("factorization failed: {0}")]
    FactorizationFailed(String),

    #[error("relative residual {0:e} exceeds tolerance")]
    ResidualTooLarge(f64),

    #[error("flux field is not divergence free (max cell residual {0:e})")]
    NotDivergenceFree(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
