use thiserror::Error;

/// Errors raised by the numeric and symbolic engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LvrError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("z = {re}{im:+}i lies within {tol:e} of the Fuss-Catalan cut [{cut_start}, inf)")]
    CutProximity {
        re: f64,
        im: f64,
        cut_start: f64,
        tol: f64,
    },

    #[error("homotopy continuation failed at path parameter {at:.6}: {reason}")]
    ContinuationFailure { at: f64, reason: String },

    #[error("derivative requested at the branch point (|1 - p z T^(p-1)| = {0:e})")]
    BranchPoint(f64),

    #[error("eigenvalue {index}: {source}")]
    Eigenvalue {
        index: usize,
        #[source]
        source: Box<LvrError>,
    },

    #[error("log argument crosses the negative real axis along the coupling path (pair ({i}, {j}), winding {winding:.3} rad)")]
    LogBranchAmbiguity { i: usize, j: usize, winding: f64 },

    #[error("degenerate spectrum: |s_{i} - s_{j}| = {gap:e}")]
    DegenerateSpectrum { i: usize, j: usize, gap: f64 },

    #[error("matrix is singular to tolerance (smallest eigenvalue of MM^dagger = {0:e})")]
    SingularMatrix(f64),

    #[error("bad contour geometry: {0}")]
    BadGeometry(String),

    #[error("|v1 - v2| = {0:e} below the collision guard")]
    NearCollision(f64),

    #[error("quadrature did not reach tolerance: {0}")]
    QuadratureFailure(String),

    #[error("tolerance not met: {what} (got {got:e}, tolerance {tol:e})")]
    ToleranceNotMet { what: String, got: f64, tol: f64 },

    #[error("integrand diverges: {0}")]
    DivergentIntegrand(String),

    #[error("total degree {degree} exceeds the pairing enumeration bound {max}")]
    DegreeTooLarge { degree: u32, max: u32 },

    #[error("expression does not match the Schwinger-Dyson pattern: {0}")]
    PatternMismatch(String),

    #[error("size {size} exceeds the enumeration bound {max}")]
    SizeBound { size: usize, max: usize },

    #[error("Monte Carlo variance blowup: {0}")]
    VarianceBlowup(String),
}

pub type Result<T> = std::result::Result<T, LvrError>;

impl LvrError {
    pub(crate) fn at_eigenvalue(self, index: usize) -> Self {
        LvrError::Eigenvalue {
            index,
            source: Box::new(self),
        }
    }
}
