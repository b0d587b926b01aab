use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::rational::Rational;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input: bad parameters, bad graphs, bad subsets.
    InvalidInput,
    /// A mathematical precondition of a construction does not hold.
    Precondition,
    /// The instance is too large for the configured budget.
    Budget,
    /// A bug: an invariant the mathematics guarantees was violated.
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Parameter(String),
    #[error("duplicate edge {0:?}")]
    DuplicateEdge(Vec<usize>),
    #[error("edge {edge:?} has {found} vertices, expected {expected}")]
    EdgeArity {
        edge: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("vertex {vertex} out of range for {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("invalid vertex subset: {0}")]
    InvalidSubset(String),
    #[error("{0:?} is not an edge of the host graph")]
    NotAnEdge(Vec<usize>),
    #[error("packings live on different host graphs")]
    HostMismatch,
    #[error("negative probability {value} for subsets of size {size}")]
    NegativeProbability { size: usize, value: Rational },
    #[error("target {value} for edge {edge:?} lies outside [{low}, 1]")]
    TargetOutOfRange {
        edge: Vec<usize>,
        value: Rational,
        low: Box<Rational>,
    },
    #[error("boundary {boundary} at edge {edge:?} is outside [{floor}, 1]")]
    BoundaryOutOfRange {
        edge: Vec<usize>,
        boundary: Rational,
        floor: Box<Rational>,
    },
    #[error("deficiency {max_eta} at edge {witness:?} exceeds {threshold} (depth {depth})")]
    Deficiency {
        depth: usize,
        max_eta: Rational,
        threshold: Box<Rational>,
        witness: Vec<usize>,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("resource budget exceeded: {0}")]
    Budget(String),
    #[error("malformed certificate: {0}")]
    MalformedCertificate(String),
    #[error("inconsistent orbit signature: {0}")]
    InconsistentSignature(String),
    #[error("inner decomposition failed on {piece:?}: {source}")]
    Inner { piece: Vec<usize>, source: Box<Error> },
    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parameter(_)
            | Error::DuplicateEdge(_)
            | Error::EdgeArity { .. }
            | Error::VertexOutOfRange { .. }
            | Error::InvalidSubset(_)
            | Error::NotAnEdge(_)
            | Error::HostMismatch
            | Error::MalformedCertificate(_)
            | Error::InconsistentSignature(_) => ErrorKind::InvalidInput,
            Error::NegativeProbability { .. }
            | Error::TargetOutOfRange { .. }
            | Error::BoundaryOutOfRange { .. }
            | Error::Deficiency { .. }
            | Error::Precondition(_) => ErrorKind::Precondition,
            Error::Budget(_) => ErrorKind::Budget,
            Error::Inner { source, .. } => source.kind(),
            Error::Internal(_) => ErrorKind::Internal,
        }
    }
}
