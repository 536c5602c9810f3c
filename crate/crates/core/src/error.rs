use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two inputs that must share a shape do not.
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// Frame smaller than 2x2, or a pixel buffer of the wrong length.
    DegenerateFrame {
        width: usize,
        height: usize,
    },
    /// Distributions or histograms with different class/bin counts.
    LengthMismatch {
        expected: usize,
        found: usize,
    },
    InvalidParameter(String),
    InvalidDistribution(String),
    /// A non-empty input was required.
    EmptyInput(&'static str),
    NotEnoughSamples {
        needed: usize,
        found: usize,
    },
    InvalidGraph(String),
    InvalidBundle(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::DegenerateFrame { width, height } => {
                write!(f, "degenerate frame {width}x{height} (need at least 2x2)")
            }
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidDistribution(msg) => write!(f, "invalid distribution: {msg}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::NotEnoughSamples { needed, found } => {
                write!(f, "need at least {needed} samples, found {found}")
            }
            Error::InvalidGraph(msg) => write!(f, "invalid frame graph: {msg}"),
            Error::InvalidBundle(msg) => write!(f, "invalid prediction bundle: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
