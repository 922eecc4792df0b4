use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single violated model invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Invalid {
    #[error("σ = 0 requires a strictly positive drift (got μ = {0})")]
    NotSpectrallyNegativeDrift(f64),
    #[error("σ must be finite and nonnegative (got {0})")]
    NegativeSigma(f64),
    #[error("arrival rate λ must be finite and nonnegative (got {0})")]
    NegativeArrivalRate(f64),
    #[error("{name} must be finite and strictly positive (got {value})")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("hyperexponential weights and rates differ in length ({weights} vs {rates})")]
    LengthMismatch { weights: usize, rates: usize },
    #[error("hyperexponential law needs at least one phase")]
    Empty,
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("rates must be strictly increasing")]
    RatesNotIncreasing,
    #[error("phase-type generator: {0}")]
    Generator(String),
    #[error("initial vector: {0}")]
    InitialVector(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", join(.0))]
    InvalidModel(Vec<Invalid>),
    #[error("s = {s} is within the exclusion radius of the pole {pole}")]
    Pole { s: Complex64, pole: Complex64 },
    #[error("{0} claims have no rational Laplace exponent")]
    UnsupportedLaw(&'static str),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("repeated roots {first} and {second}; perturb q slightly")]
    RepeatedRoot { first: Complex64, second: Complex64 },
    #[error("root finding did not converge: {0}")]
    Convergence(String),
    #[error("W^(q)({x}) overflows (Φ(q)·x = {exponent}); use the tilted evaluators")]
    Overflow { x: f64, exponent: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join(problems: &[Invalid]) -> String {
    problems.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
