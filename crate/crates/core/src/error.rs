use thiserror::Error;

/// Errors shared across the symbolic and numeric layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operands belong to different symbol alphabets")]
    AlphabetMismatch,
    #[error("differentiation closure exceeded: d/d{var} of {generator}")]
    ClosureExceeded { generator: String, var: String },
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("operator is not symmetric; its quadratic form would not be real")]
    NotSymmetric,
    #[error("Cauchy-Schwarz splitter must be positive: {0}")]
    NonPositiveSplitter(String),
    #[error("no domination found for negative term {term} in the {slot} coefficient")]
    NoDominationFound { slot: String, term: String },
    #[error("field support touches the grid boundary (margin < {margin} cells)")]
    SupportTouchesBoundary { margin: usize },
    #[error("field support violates the admissible region |psi| >= {0}")]
    SupportViolation(f64),
    #[error("derivative order {order} unsupported by the {scheme} scheme")]
    UnsupportedOrder { order: usize, scheme: String },
    #[error("eigensolver diverged: {0}")]
    SolverDiverged(String),
    #[error("admissible region is empty on this grid")]
    EmptyRegion,
    #[error("field decay at the box edge violated: |u| = {value:.3e} of max at the boundary")]
    EdgeDecayViolated { value: f64 },
    #[error("time step rejected: non-finite values at t = {t}")]
    StepRejected { t: f64 },
    #[error("weight overflow: 2*lambda*X^p = {0:.3e} with non-negligible edge mass")]
    WeightOverflow(f64),
    #[error("operator family violates its symmetry invariant by {0:.3e}")]
    NonHermitian(f64),
    #[error("denominator norm vanishes at stored time index {0}")]
    ZeroDenominator(usize),
    #[error("annulus [{0}, {1}] extends outside the periodic box")]
    AnnulusOutsideBox(f64, f64),
    #[error("hypothesis unmet: {0}")]
    HypothesisUnmet(String),
    #[error("envelope fit failed: {0}")]
    FitFailed(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
