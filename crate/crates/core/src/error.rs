use thiserror::Error;

/// Failures reported by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("diffusion tensor is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("step size underflow at t = {t} (last state {state:?})")]
    StepSizeUnderflow { t: f64, state: Vec<f64> },

    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("cycle search collapsed onto an equilibrium near {point:?}")]
    ConvergedToEquilibrium { point: Vec<f64> },

    #[error("drift vanishes on the cycle at tau = {tau}")]
    VanishingDrift { tau: f64 },

    #[error("multipliers {0} and {1} are too close to separate their eigenvectors")]
    ClusteredMultipliers(String, String),

    #[error("cycle is not asymptotically stable (max nontrivial |multiplier| = {max_modulus:.6})")]
    NotStable { max_modulus: f64 },

    #[error("no positive definite periodic solution: {0}")]
    NoPositiveSolution(String),

    #[error("positive definiteness lost at tau = {tau} (min eigenvalue {min_eigenvalue:.3e})")]
    LostDefiniteness { tau: f64, min_eigenvalue: f64 },

    #[error("flip conjugacy violated: max deviation {0:.3e}")]
    ConjugacyViolation(f64),

    #[error("point is outside the tubular chart (newton residual {0:.3e})")]
    OutsideChart(f64),

    #[error("hamiltonian drift budget exhausted at t = {t}: |H| = {value:.3e}")]
    HamiltonianDrift { t: f64, value: f64 },

    #[error("trajectory left the bounding box at t = {t}")]
    Escaped { t: f64 },

    #[error("diffusion tensor is not differentiable along the trajectory")]
    NonDifferentiableDiffusion,

    #[error("diffusion tensor is singular on the path")]
    SingularDiffusion,

    #[error("end point lies inside the tube (|z| = {z_norm:.3e} <= h = {h:.3e})")]
    InsideTube { z_norm: f64, h: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
