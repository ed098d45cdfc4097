use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit the operation.
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// A position count does not split into the requested parts.
    Factorization { n: usize, parts: usize },
    /// A NaN or infinity was produced or consumed.
    Numeric { op: &'static str },
    /// A precondition of the call was violated.
    Contract(String),
    /// Dense verification matrices were requested above the memory bound.
    VerificationSize { n: usize, bound: usize },
}

impl Error {
    pub(crate) fn dim(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Dimension {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, left, right } => {
                write!(f, "{op}: incompatible shapes {left:?} and {right:?}")
            }
            Error::Factorization { n, parts } => {
                write!(f, "{n} positions cannot be split into {parts} equal parts")
            }
            Error::Numeric { op } => write!(f, "{op}: non-finite value"),
            Error::Contract(msg) => write!(f, "contract violation: {msg}"),
            Error::VerificationSize { n, bound } => {
                write!(f, "dense verification of {n} positions exceeds bound {bound}")
            }
        }
    }
}

impl core::error::Error for Error {}
