use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("modulus τ = {0} is outside the supported half-plane (Im τ must be ≥ {min})", min = crate::elliptic::MIN_IM_TAU)]
    InvalidTau(Complex64),

    #[error("series truncated after {terms} terms; last term magnitude {last_term:e}")]
    Truncation { terms: usize, last_term: f64 },

    #[error("argument {arg} is {distance:e} from the lattice (guard {guard:e})")]
    Pole {
        arg: Complex64,
        distance: f64,
        guard: f64,
    },

    #[error("domain violation: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("tensor slots must differ and lie in 1..={n_factors}: got ({a}, {b})")]
    Slot { a: usize, b: usize, n_factors: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown identity check `{0}`")]
    UnknownCheck(String),

    #[error("check `{id}`: every one of {attempted} samples was rejected by the pole guard")]
    AllSamplesRejected { id: String, attempted: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
