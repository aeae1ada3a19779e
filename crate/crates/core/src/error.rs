use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("generator {index} is not square ({rows}x{cols})")]
    NonSquareGenerator {
        index: usize,
        rows: usize,
        cols: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid *-algebra: {0}")]
    InvalidAlgebra(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("trace is not faithful (smallest Gram eigenvalue {min_eigenvalue:e})")]
    TraceNotFaithful { min_eigenvalue: f64 },
    #[error("not a trace-preserving *-automorphism: {0}")]
    NotAutomorphism(String),
    #[error("invalid subsystem: {0}")]
    SubsystemInvalid(String),
    #[error("basic construction and commutant of j(F) disagree (residual {residual:e})")]
    CommutantMismatch { residual: f64 },
    #[error("lifted trace extension is inconsistent (residual {residual:e})")]
    ExtensionInconsistent { residual: f64 },
    #[error("span of AeA has rank {rank} but the basic construction has dimension {dim}")]
    SpanDeficient { rank: usize, dim: usize },
    #[error("partial isometries do not sum to the identity: {0}")]
    PartitionInvalid(String),
    #[error("joining state is not positive (smallest Gram eigenvalue {min_eigenvalue:e})")]
    StateNotPositive { min_eigenvalue: f64 },
    #[error("R fails to be isometric (residual {residual:e})")]
    IsometryViolation { residual: f64 },
    #[error("relative ergodicity says {ergodic} but dim E = {dim_e}")]
    VerdictMismatch { ergodic: bool, dim_e: usize },
    #[error("test element is not mean zero (‖D(a)‖ = {norm:e})")]
    NotMeanZero { norm: f64 },
    #[error("subalgebra is not commutative")]
    NotCommutative,
    #[error("invalid module candidate: {0}")]
    InvalidModule(String),
    #[error("invalid system description: {0}")]
    SpecInvalid(String),
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("{0} is not unitary")]
    NotUnitary(String),
    #[error("permutation does not preserve weights: atom {atom} has weight {from} but maps to weight {to}")]
    WeightsNotPreserved { atom: usize, from: f64, to: f64 },
}

impl Error {
    /// Errors that signal a numerical breakdown rather than bad input.
    pub fn is_numerical_breakdown(&self) -> bool {
        matches!(
            self,
            Error::CommutantMismatch { .. }
                | Error::ExtensionInconsistent { .. }
                | Error::StateNotPositive { .. }
                | Error::IsometryViolation { .. }
                | Error::VerdictMismatch { .. }
        )
    }
}
