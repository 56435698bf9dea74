//! Error type shared by every stage of the pipeline.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SsmError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("equilibrium error: {0}")]
    Equilibrium(String),
    #[error("commutator error: {0}")]
    Commutator(String),
    #[error("degenerate mode: {0}")]
    DegenerateMode(String),
    #[error("selection error: {0}")]
    Selection(String),
    #[error("not diagonalizable: {0}")]
    NotDiagonalizable(String),
    #[error("real eigenvalue: {0}")]
    RealEigenvalue(String),
    #[error("no spectral gap: {0}")]
    NoSpectralGap(String),
    #[error("projector is not real: {0}")]
    NotReal(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("expansion order too low: {0}")]
    Order(String),
    #[error("solvability violated: {0}")]
    Solvability(String),
    #[error("near resonance: {0}")]
    NearResonance(String),
    #[error("leading-order error: {0}")]
    LeadingOrder(String),
    #[error("quadrature error: {0}")]
    Quadrature(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("singular collocation: {0}")]
    SingularCollocation(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("projection failed: {0}")]
    Projection(String),
    #[error("missing conserved quantity: {0}")]
    MissingConserved(String),
    #[error("assumption check failed: {0}")]
    Assumption(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SsmError {
    /// Process exit code for the command-line front end.
    ///
    /// 1: the input is invalid or violates a hypothesis of the theory.
    /// 2: a numerical stage failed. 3: input/output failure.
    pub fn exit_code(&self) -> i32 {
        use SsmError::*;
        match self {
            Io(_) => 3,
            Parse(_) | Dimension(_) | Equilibrium(_) | Commutator(_) | DegenerateMode(_)
            | Selection(_) | NotDiagonalizable(_) | RealEigenvalue(_) | NoSpectralGap(_)
            | NotReal(_) | InvalidArgument(_) | MissingConserved(_) | Assumption(_) => 1,
            Order(_) | Solvability(_) | NearResonance(_) | LeadingOrder(_) | Quadrature(_)
            | Regime(_) | SingularCollocation(_) | NoConvergence(_) | Divergence(_)
            | Projection(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, SsmError>;
