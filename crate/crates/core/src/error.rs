use std::fmt;

use thiserror::Error;

/// Which factor of the solved q-Painleve step vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularFactor {
    /// `y_n` itself (the division by `c y_n`).
    Current,
    /// `-c y_n y_{n-1} + q^alpha`.
    Coupling,
}

impl fmt::Display for SingularFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingularFactor::Current => write!(f, "y_n"),
            SingularFactor::Coupling => write!(f, "-c*y_n*y_(n-1) + q^alpha"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot parse `{0}` as a real number")]
    Parse(String),

    #[error("series `{what}` does not decay after {terms} terms")]
    Divergent { what: &'static str, terms: usize },

    #[error("non-finite value at lattice node {index}")]
    Overflow { index: usize },

    #[error("q-difference at x = 0 needs a derivative-at-zero rule")]
    DerivativeAtZero,

    #[error("weight has a pole at x = 0 for alpha < 0")]
    Pole,

    #[error("{x} is not an admissible lattice point: {reason}")]
    NotOnLattice { x: String, reason: &'static str },

    #[error("precision exhausted: a_{index}^2 = {value} is not positive")]
    PrecisionExhausted { index: usize, value: String },

    #[error("interpolation needs {needed} lattice nodes but only {available} exist")]
    Interpolation { needed: usize, available: usize },

    #[error("index {index} outside the valid range {lo}..={hi}")]
    IndexRange { index: usize, lo: usize, hi: usize },

    #[error("singularity at n = {index}: factor {factor} = {value}")]
    Singularity {
        index: usize,
        factor: SingularFactor,
        value: String,
    },

    #[error("variant {variant} requires {requirement}")]
    VariantMismatch {
        variant: &'static str,
        requirement: &'static str,
    },

    #[error("negative discriminant in {which}_{n}: x = {x}, y = {y}")]
    NegativeDiscriminant {
        which: &'static str,
        n: usize,
        x: String,
        y: String,
    },

    #[error("degenerate arguments in {which}_{n}: x and y both vanish")]
    DegenerateArgument { which: &'static str, n: usize },

    #[error("value coincides with a pole of the rational right side: {0}")]
    RationalPole(&'static str),

    #[error("sequence too short: need at least {needed} entries, got {got}")]
    ShortSequence { needed: usize, got: usize },

    #[error("bracket did not close after {iterations} iterations (width {width})")]
    NonConvergence {
        iterations: usize,
        width: String,
        solution: Box<crate::fixedpoint::FixedPointSolution>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Lattice or sequence index the error refers to, when there is one.
    pub fn index(&self) -> Option<usize> {
        match self {
            Error::Overflow { index }
            | Error::PrecisionExhausted { index, .. }
            | Error::IndexRange { index, .. }
            | Error::Singularity { index, .. } => Some(*index),
            Error::NegativeDiscriminant { n, .. } | Error::DegenerateArgument { n, .. } => Some(*n),
            _ => None,
        }
    }
}
