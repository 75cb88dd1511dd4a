use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value produced during {stage}")]
    NonFinite { stage: String },

    #[error("matrix is not Hermitian (deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive definite (eigenvalue {eigenvalue:.3e})")]
    NotPositive { eigenvalue: f64 },

    #[error("matrix is singular (|det| = {det:.3e})")]
    Singular { det: f64 },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter {param} = {value} outside admissible range: {reason}")]
    OutOfRange { param: String, value: f64, reason: String },

    #[error("operation not supported for the {family} family")]
    UnsupportedFamily { family: String },

    #[error("closed form requires probe |0>")]
    UnsupportedProbe,

    #[error("state is not normalized (<v|v> = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("QFI has imaginary residue {residue:.3e}")]
    NonRealQfi { residue: f64 },

    #[error("operator is not a rank-1 Hermitian projector (deviation {deviation:.3e})")]
    NotProjector { deviation: f64 },

    #[error("scalar factor vanishes at theta = {theta}")]
    ZeroScalar { theta: f64 },

    #[error("measurement carries no first-order information (|d<A>| = {slope:.3e})")]
    Degenerate { slope: f64 },

    #[error("observable acts trivially on the output state (|g| = {norm:.3e})")]
    ZeroG { norm: f64 },

    #[error("no root of p(theta) = {target} in [{lo}, {hi}]")]
    NoRoot { target: f64, lo: f64, hi: f64 },

    #[error("invalid bracket [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("all {trials} trials failed to produce an estimate")]
    AllTrialsFailed { trials: usize },

    #[error("no positive-definite metric solves eta H = H^dagger eta")]
    NoPositiveSolution,

    #[error("zeta = c eta - I is not positive definite (min eigenvalue {min_eigenvalue:.3e})")]
    ZetaNotPositive { min_eigenvalue: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
