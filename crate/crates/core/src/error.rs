use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("generator index {index} out of range for {generators} generators")]
    GeneratorOutOfRange { index: usize, generators: usize },
    #[error("at most {max} Grassmann generators are supported, got {got}")]
    TooManyGenerators { got: usize, max: usize },
    #[error("generator count mismatch: {left} vs {right}")]
    GeneratorMismatch { left: usize, right: usize },
    #[error("element is not invertible (zero body)")]
    NotInvertible,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("parity violation: {0}")]
    Parity(String),
    #[error("superfunction has negative powers where a polynomial is required")]
    NotPolynomial,
    #[error("invalid kappa {0}: must be a positive rational")]
    InvalidKappa(String),
    #[error("square root of {0} is not representable in this coefficient ring")]
    NoSquareRoot(String),
    #[error("level {level} exceeds cutoff {cutoff}")]
    CutoffOverflow { level: String, cutoff: String },
    #[error("mode {0} does not belong to the {1} algebra")]
    ModeNotInAlgebra(String, &'static str),
    #[error("vector is not homogeneous in level")]
    NotHomogeneous,
    #[error("vector is not singular for the given module parameters")]
    NotSingular,
    #[error("incompatible module parameters")]
    ParamsMismatch,
    #[error("point swallowed at step {step} (t = {time})")]
    SwallowedPoint { step: usize, time: f64 },
    #[error("integrand denominator vanishes at step {step} (t = {time})")]
    DenominatorVanishes { step: usize, time: f64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}
